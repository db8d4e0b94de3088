// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsac/gradient_suite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <ostream>
#include <random>

#include "lsac/audio_tower.hpp"
#include "lsac/contrastive.hpp"
#include "lsac/cscm.hpp"
#include "lsac/gradcheck.hpp"
#include "lsac/nn.hpp"
#include "lsac/text_tower.hpp"

namespace lsac {
namespace {

Tensor uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor(std::move(shape), std::move(data));
}

// Initial weights are tiny; redraw them so every nonlinearity sees O(1)
// pre-activations.
ParameterSet scramble(const ParameterSet& ps, Rng& rng) {
    ParameterSet out;
    for (const auto& [name, t] : ps) out.add(name, uniform(t.shape(), rng, -0.5, 0.5));
    return out;
}

using Forward = std::function<NodeRef(Binder&, std::span<const NodeRef>)>;

// Checks a composite layer with respect to its data inputs and every
// parameter. Parameters come after the data inputs.
GradCheckResult check_layer(const ParameterSet& ps, std::vector<Tensor> data, const Forward& forward,
                            std::size_t max_coords, std::uint64_t seed) {
    std::vector<std::string> names;
    std::vector<Tensor> inputs = data;
    for (const auto& [name, t] : ps) {
        names.push_back(name);
        inputs.push_back(t);
    }
    const std::size_t n_data = data.size();
    auto build = [&](Graph& g, std::span<const NodeRef> leaves) {
        Binder p(g, ps);
        for (std::size_t i = 0; i < names.size(); ++i) p.bind(names[i], leaves[n_data + i]);
        return forward(p, leaves.first(n_data));
    };
    GradCheckOptions opt;
    opt.max_coords_per_input = max_coords;
    opt.seed = seed;
    return check_gradients(build, inputs, opt);
}

struct Suite {
    std::uint64_t seed;
    std::vector<GradientCase>& out;

    void record(const std::string& name, const GradCheckResult& r) {
        out.push_back({name, seed, r.max_rel_error, r.coords_checked, r.worst});
    }

    void primitive(const std::string& name, OpKind op, std::vector<Tensor> in, OpAttrs attrs = {}) {
        GradCheckResult r;
        r.max_rel_error = finite_difference_check(op, in, 1e-5, attrs);
        for (const auto& t : in) r.coords_checked += t.numel();
        record(name, r);
    }
};

void primitives(Suite& s, Rng& rng) {
    s.primitive("matmul", OpKind::matmul, {uniform({3, 4}, rng), uniform({4, 2}, rng)});
    s.primitive("matmul batched", OpKind::matmul, {uniform({2, 3, 4}, rng), uniform({2, 4, 5}, rng)});
    s.primitive("matmul shared rhs", OpKind::matmul, {uniform({2, 3, 4}, rng), uniform({4, 5}, rng)});
    {
        OpAttrs a;
        a.stride = 2;
        a.padding = 1;
        s.primitive("conv2d", OpKind::conv2d, {uniform({2, 5, 5}, rng), uniform({3, 2, 3, 3}, rng)}, a);
        s.primitive("conv2d batched", OpKind::conv2d, {uniform({2, 2, 4, 4}, rng), uniform({1, 2, 3, 3}, rng)}, a);
    }
    s.primitive("add broadcast", OpKind::add, {uniform({2, 3, 1}, rng), uniform({1, 4}, rng)});
    s.primitive("mul broadcast", OpKind::mul, {uniform({2, 3, 4}, rng), uniform({3, 1}, rng)});
    s.primitive("layer_norm", OpKind::layer_norm, {uniform({3, 6}, rng), uniform({6}, rng), uniform({6}, rng)});
    s.primitive("softmax", OpKind::softmax, {uniform({3, 5}, rng, -3, 3)});
    s.primitive("gelu", OpKind::gelu, {uniform({10}, rng, -3, 3)});
    s.primitive("sigmoid", OpKind::sigmoid, {uniform({10}, rng, -4, 4)});
    s.primitive("exp", OpKind::exp, {uniform({6}, rng)});
    for (int axis : {0, 1, -1}) {
        OpAttrs a;
        a.axis = axis;
        s.primitive("mean_pool", OpKind::mean_pool, {uniform({3, 4, 2}, rng)}, a);
        s.primitive("max_pool", OpKind::max_pool, {uniform({3, 4, 2}, rng)}, a);
    }
    {
        OpAttrs a;
        a.shape = {6, 2};
        s.primitive("reshape", OpKind::reshape, {uniform({3, 4}, rng)}, a);
    }
    {
        OpAttrs a;
        a.perm = {2, 0, 1};
        s.primitive("transpose", OpKind::transpose, {uniform({2, 3, 4}, rng)}, a);
    }
    {
        OpAttrs a;
        a.indices = {2, 0, 2};
        s.primitive("embed_lookup", OpKind::embed_lookup, {uniform({4, 3}, rng)}, a);
    }
    {
        OpAttrs a;
        a.axis = 1;
        s.primitive("concat", OpKind::concat, {uniform({2, 3}, rng), uniform({2, 1}, rng)}, a);
    }
    s.primitive("sum", OpKind::sum, {uniform({2, 3}, rng)});
    s.primitive("l2_normalize", OpKind::l2_normalize, {uniform({3, 4}, rng)});
    {
        OpAttrs a;
        a.indices = {1, 0, 3};
        s.primitive("softmax_cross_entropy", OpKind::softmax_cross_entropy, {uniform({3, 4}, rng, -2, 2)}, a);
    }
}

CscmConfig small_cscm() {
    CscmConfig c;
    c.depth = 8;
    c.height = 4;
    c.width = 4;
    c.reduction = 4;
    c.spatial_kernel = 3;
    c.head_channels = 6;
    c.embed_dim = 5;
    return c;
}

void composites(Suite& s, Rng& rng) {
    const std::uint64_t seed = s.seed;
    {
        ParameterSet ps;
        nn::add_block(ps, "b", 8, 2, rng);
        ps = scramble(ps, rng);
        nn::AttentionLayout layout{2, 1, 5, 1, 5, 2, true};
        s.record("text block", check_layer(ps, {uniform({10, 8}, rng)}, [&](Binder& p, std::span<const NodeRef> x) {
            return nn::block(p, "b", x[0], layout);
        }, 0, seed));
    }
    {
        ParameterSet ps;
        nn::add_block(ps, "b", 8, 2, rng);
        ps = scramble(ps, rng);
        nn::AttentionLayout layout{1, 4, 4, 2, 2, 2, false};
        s.record("audio block", check_layer(ps, {uniform({16, 8}, rng)}, [&](Binder& p, std::span<const NodeRef> x) {
            return nn::block(p, "b", x[0], layout);
        }, 0, seed));
    }
    {
        TextTowerConfig cfg{12, 6, 8, 1, 2, 2, 5};
        ParameterSet ps;
        add_text_tower(ps, cfg, rng);
        ps = scramble(ps, rng);
        const std::vector<TokenSequence> seqs{{{10, 3, 4, 11}}, {{10, 7, 11}}};
        s.record("text tower", check_layer(ps, {}, [&](Binder& p, std::span<const NodeRef>) {
            return encode_text(p, cfg, seqs);
        }, 12, seed));
    }
    {
        AudioTowerConfig cfg;
        cfg.mel_bins = 8;
        cfg.frames = 8;
        cfg.patch_h = cfg.patch_w = 1;
        cfg.window = 2;
        cfg.mlp_ratio = 2;
        cfg.widths = {4, 8};
        cfg.depths = {1, 1};
        cfg.heads = {2, 2};
        ParameterSet ps;
        add_audio_tower(ps, cfg, rng);
        ps = scramble(ps, rng);
        MelSpectrogram mel{8, 8, std::vector<double>(64)};
        for (auto& v : mel.values) v = uniform({1}, rng)[0];
        const std::vector<PatchSequence> patches{patchify(mel, 1, 1)};
        s.record("audio tower", check_layer(ps, {}, [&](Binder& p, std::span<const NodeRef>) {
            return encode_audio(p, cfg, patches);
        }, 12, seed));
    }
    const CscmConfig cc = small_cscm();
    {
        ParameterSet ps;
        add_conv_attention(ps, cc, rng);
        ps = scramble(ps, rng);
        s.record("conv_attention", check_layer(ps, {uniform({2, cc.depth, cc.height, cc.width}, rng)},
                                               [&](Binder& p, std::span<const NodeRef> x) {
                                                   return conv_attention(p, cc, x[0]);
                                               },
                                               0, seed));
    }
    {
        ParameterSet ps;
        add_cscm_projection(ps, cc, rng);
        ps = scramble(ps, rng);
        s.record("cscm project", check_layer(ps, {uniform({2, cc.depth, cc.height, cc.width}, rng)},
                                             [&](Binder& p, std::span<const NodeRef> x) {
                                                 return cscm_project(p, cc, x[0]);
                                             },
                                             0, seed));
    }
    {
        ParameterSet ps;
        add_cscm(ps, cc, rng);
        ps = scramble(ps, rng);
        s.record("cscm head", check_layer(ps, {uniform({2 * cc.height * cc.width, cc.depth}, rng)},
                                          [&](Binder& p, std::span<const NodeRef> x) {
                                              return cscm_head(p, cc, x[0], 2);
                                          },
                                          16, seed));
    }
    {
        ParameterSet ps;
        add_pool_head(ps, 8, 5, rng);
        ps = scramble(ps, rng);
        s.record("pool head", check_layer(ps, {uniform({2 * 6, 8}, rng)}, [&](Binder& p, std::span<const NodeRef> x) {
            return baseline_pool_project(p, x[0], 2);
        }, 0, seed));
    }
    const ParameterSet none;
    s.record("contrastive_loss", check_layer(none, {uniform({4, 4}, rng)}, [&](Binder& p, std::span<const NodeRef> x) {
        return contrastive_loss(p.graph(), x[0], 2.5);
    }, 0, seed));
    s.record("contrastive_loss learnable scale",
             check_layer(none, {uniform({4, 4}, rng), uniform({1}, rng)}, [&](Binder& p, std::span<const NodeRef> x) {
                 return contrastive_loss(p.graph(), x[0], x[1]);
             }, 0, seed));
    s.record("similarity + contrastive_loss",
             check_layer(none, {uniform({4, 6}, rng), uniform({4, 6}, rng)}, [&](Binder& p, std::span<const NodeRef> x) {
                 return contrastive_loss(p.graph(), similarity_matrix(p.graph(), x[0], x[1]), 3.0);
             }, 0, seed));
}

}  // namespace

double GradientSuiteResult::max_rel_error() const {
    double worst = 0.0;
    for (const auto& c : cases) worst = std::max(worst, c.max_rel_error);
    return worst;
}

GradientSuiteResult run_gradient_suite(std::size_t seeds, std::ostream* progress) {
    const auto start = std::chrono::steady_clock::now();
    GradientSuiteResult result;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        Rng rng(seed);
        Suite s{seed, result.cases};
        primitives(s, rng);
        composites(s, rng);
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress) {
        std::map<std::string, GradientCase> worst;
        std::vector<std::string> order;
        for (const auto& c : result.cases) {
            auto [it, fresh] = worst.emplace(c.name, c);
            if (fresh) order.push_back(c.name);
            if (c.max_rel_error > it->second.max_rel_error) it->second = c;
        }
        for (const auto& name : order) {
            const auto& c = worst.at(name);
            *progress << (c.max_rel_error < kGradientTolerance ? "ok   " : "FAIL ") << name << ": max rel error "
                      << c.max_rel_error << " (seed " << c.seed << ")";
            if (c.max_rel_error >= kGradientTolerance) *progress << " " << c.worst;
            *progress << "\n";
        }
        *progress << "gradient suite: " << result.cases.size() << " checks in " << result.seconds << " s\n";
    }
    return result;
}

}  // namespace lsac
