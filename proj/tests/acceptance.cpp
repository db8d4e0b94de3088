// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lsac/bpe.hpp"
#include "lsac/contrastive.hpp"
#include "lsac/gradient_suite.hpp"
#include "lsac/trainer.hpp"
#include "../src/binary_io.hpp"

using namespace lsac;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass;
    std::string detail;
};

Tensor uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = d(rng);
    return Tensor(std::move(shape), std::move(v));
}

std::filesystem::path config_file(const std::string& name) { return std::filesystem::path(LSAC_CONFIG_DIR) / name; }

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_suite() {
    const auto r = run_gradient_suite(10);
    std::size_t names = 0;
    std::vector<std::string> seen;
    for (const auto& c : r.cases) {
        if (std::find(seen.begin(), seen.end(), c.name) == seen.end()) seen.push_back(c.name);
    }
    names = seen.size();
    const bool ok = r.passed(kGradientTolerance) && r.seconds < 120.0;
    return {ok, std::to_string(names) + " ops and layers x 10 seeds, max rel error " + fmt("%.2e", r.max_rel_error()) +
                    ", " + fmt("%.1f", r.seconds) + " s"};
}

// ---- 2 ----------------------------------------------------------------------

// Scalar reference: mean of the two directional cross-entropies.
double loss_oracle(const std::vector<std::vector<double>>& s, double scale) {
    const std::size_t n = s.size();
    long double rows = 0.0L, cols = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double zr = 0.0L, zc = 0.0L;
        for (std::size_t j = 0; j < n; ++j) {
            zr += std::exp(static_cast<long double>(scale * s[i][j]));
            zc += std::exp(static_cast<long double>(scale * s[j][i]));
        }
        rows += std::log(zr) - scale * s[i][i];
        cols += std::log(zc) - scale * s[i][i];
    }
    return static_cast<double>((rows + cols) / (2.0L * n));
}

Outcome loss_oracle_check() {
    Rng rng(2024);
    double worst = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        for (double scale : {1.0, 10.0}) {
            for (int rep = 0; rep < 100; ++rep) {
                const Tensor t = uniform({n, n}, rng);
                std::vector<std::vector<double>> s(n, std::vector<double>(n));
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) s[i][j] = t[i * n + j];
                const double want = loss_oracle(s, scale);
                Graph g;
                const double graph = g.value(contrastive_loss(g, g.constant(t), scale)).item();
                worst = std::max({worst, std::abs(contrastive_loss(t, scale) - want), std::abs(graph - want)});
                ++count;
            }
        }
    }
    const double one = contrastive_loss(Tensor({1, 1}, {0.37}), 1.0);
    const double two = contrastive_loss(Tensor::zeros({2, 2}), 1.0);
    const bool exact = one == 0.0 && std::abs(two - std::log(2.0)) < 1e-15;
    return {worst < 1e-6 && exact, std::to_string(count) + " matrices n=1..4, max deviation " + fmt("%.2e", worst) +
                                        "; n=1 -> " + fmt("%g", one) + ", n=2 zeros -> " + fmt("%.15f", two)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome similarity_oracle() {
    Rng rng(77);
    double worst = 0.0;
    std::size_t entries = 0;
    for (std::size_t n = 1; n <= 16; ++n) {
        for (int rep = 0; rep < 5; ++rep) {
            const std::size_t c = 32;
            const Tensor a = uniform({n, c}, rng), t = uniform({n, c}, rng);
            const Tensor eager = similarity_matrix(a, t);
            Graph g;
            const Tensor graph = g.value(similarity_matrix(g, g.constant(a), g.constant(t)));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    long double dot = 0.0L, na = 0.0L, nt = 0.0L;
                    for (std::size_t k = 0; k < c; ++k) {
                        const long double x = a[i * c + k], y = t[j * c + k];
                        dot += x * y;
                        na += x * x;
                        nt += y * y;
                    }
                    const double want = static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nt)));
                    worst = std::max({worst, std::abs(eager[i * n + j] - want), std::abs(graph[i * n + j] - want)});
                    ++entries;
                }
            }
        }
    }
    return {worst < 1e-6, std::to_string(entries) + " entries over n=1..16, max deviation " + fmt("%.2e", worst)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome synthetic_overfit() {
    const auto start = Clock::now();
    const TrainConfig base = TrainConfig::load(config_file("synth_tones.conf"));
    const Dataset data = load_dataset(base);
    const auto [train_set, eval_set] = fold_split(data.samples, base.eval_fold);
    std::size_t passing = 0;
    std::string detail;
    for (std::uint64_t seed : {0, 1, 2}) {
        TrainConfig cfg = base;
        cfg.seed = seed;
        const Model model = model_from(train(cfg, data.spec, train_set));
        const double tr = evaluate(model, data.spec, train_set, 0).overall;
        const double ho = evaluate(model, data.spec, eval_set, cfg.eval_fold).overall;
        if (tr >= 0.95 && ho >= 0.90) ++passing;
        detail += "seed " + std::to_string(seed) + " train " + fmt("%.3f", tr) + " held-out " + fmt("%.3f", ho) + "; ";
    }
    const double secs = seconds_since(start);
    const std::size_t per_class = train_set.size() / data.spec.n_classes;
    detail += std::to_string(per_class) + " train clips/class, " + std::to_string(base.epochs) + " epochs, " +
              std::to_string(passing) + "/3 seeds pass, " + fmt("%.0f", secs) + " s";
    return {passing >= 2 && secs < 600.0 && base.epochs <= 50, detail};
}

// ---- 5 ----------------------------------------------------------------------

Outcome schedule_exactness() {
    long double g = 1.0L;
    double worst_ulps = 0.0;
    for (std::size_t k = 0; k <= 100; ++k) {
        const double oracle = static_cast<double>(static_cast<long double>(8e-5) * g);
        const double got = lr_at_epoch(8e-5, 0.96, k);
        worst_ulps = std::max(worst_ulps, std::abs(got - oracle) / (std::nextafter(oracle, 1.0) - oracle));
        g *= static_cast<long double>(0.96);
    }
    const bool anchors = lr_at_epoch(8e-5, 0.96, 0) == 8e-5 && std::abs(lr_at_epoch(8e-5, 0.96, 1) / 7.68e-5 - 1.0) < 1e-15;
    return {worst_ulps <= 1.0 && anchors, "k=0..100 within " + fmt("%g", worst_ulps) + " ulp of the extended-precision product, k=0 exact"};
}

// ---- 6 ----------------------------------------------------------------------

Outcome full_shapes() {
    const TrainConfig cfg = TrainConfig::with_profile("full");
    const auto audio = cfg.audio();
    const auto head = cfg.cscm();
    bool ok = audio.tokens_out() == 64 && audio.d_map() == 768 && audio.h_map() == 8 && audio.w_map() == 8 &&
              head.depth == 768 && head.height == 8 && head.width == 8 && head.embed_dim == 1024;

    // One forward pass of the full-scale audio path on a random spectrogram.
    ParameterSet ps;
    Rng rng(5);
    add_audio_tower(ps, audio, rng);
    add_cscm(ps, head, rng);
    MelSpectrogram mel{cfg.n_mels, cfg.clip_frames, std::vector<double>(cfg.n_mels * cfg.clip_frames)};
    std::normal_distribution<double> normal(-4.0, 2.0);
    for (auto& v : mel.values) v = normal(rng);
    Graph g;
    Binder p(g, ps, false);
    const std::vector<PatchSequence> patches{patchify(mel, cfg.patch_h, cfg.patch_w)};
    const NodeRef tokens = encode_audio(p, audio, patches);
    const NodeRef map = reshape_tokens(g, tokens, 1, head.height, head.width);
    const NodeRef emb = cscm_head(p, head, tokens, 1);
    ok = ok && g.shape(tokens) == Shape{64, 768} && g.shape(map) == Shape{1, 768, 8, 8} && g.shape(emb) == Shape{1, 1024};
    return {ok, "tokens " + to_string(g.shape(tokens)) + " -> map " + to_string(g.shape(map)) + " -> embedding " +
                    to_string(g.shape(emb)) + ", head " + std::to_string(cscm_parameter_count(head)) + " parameters"};
}

// ---- 7 ----------------------------------------------------------------------

Outcome determinism_and_persistence() {
    const TrainConfig cfg = TrainConfig::load(config_file("synth_smoke.conf"));
    const Dataset data = load_dataset(cfg);
    const auto [train_set, eval_set] = fold_split(data.samples, cfg.eval_fold);
    const Checkpoint a = train(cfg, data.spec, train_set);
    const Checkpoint b = train(cfg, data.spec, train_set);
    const bool same_log = !a.loss_log.empty() && a.loss_log == b.loss_log;

    const auto path = std::filesystem::temp_directory_path() / "lsac_acceptance.sack";
    save_checkpoint(a, path);
    const Checkpoint back = load_checkpoint(path);
    std::filesystem::remove(path);
    const std::string before = evaluate(model_from(a), data.spec, eval_set, cfg.eval_fold).to_csv();
    const std::string after = evaluate(model_from(back), data.spec, eval_set, cfg.eval_fold).to_csv();
    const std::string twin = evaluate(model_from(b), data.spec, eval_set, cfg.eval_fold).to_csv();
    return {same_log && before == after && before == twin,
            std::string("loss logs ") + (same_log ? "identical" : "differ") + ", reports after reload " +
                (before == after ? "bit-identical" : "differ") + ", twin-run reports " +
                (before == twin ? "identical" : "differ")};
}

// ---- 8 ----------------------------------------------------------------------

Outcome ablation_harness() {
    const auto out = std::filesystem::temp_directory_path() / "lsac_acceptance_ablation.csv";
    std::filesystem::remove(out);
    const std::string cmd = std::string("\"") + LSAC_CLI + "\" ablate-prompts --config \"" +
                            config_file("synth_smoke.conf").string() + "\" --templates \"" +
                            config_file("prompt_templates.txt").string() + "\" --seeds 0,1 --out \"" + out.string() +
                            "\" > /dev/null";
    const int status = std::system(cmd.c_str());
    if (status != 0 || !std::filesystem::exists(out)) return {false, "ablate-prompts exited with status " + std::to_string(status)};
    std::istringstream in(io::read_file(out));
    std::filesystem::remove(out);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    const std::vector<std::string> templates{"{}", "a clip of {}", "an audio clip of {}"};
    bool ok = lines.size() == 4 && lines[0] == "template,runs,mean_accuracy,std_accuracy";
    std::string table;
    for (std::size_t i = 0; ok && i < 3; ++i) {
        const std::string& row = lines[i + 1];
        const auto c3 = row.rfind(','), c2 = row.rfind(',', c3 - 1), c1 = row.rfind(',', c2 - 1);
        ok = row.substr(0, c1) == templates[i] && row.substr(c1 + 1, c2 - c1 - 1) == "2";
        const double mean = std::stod(row.substr(c2 + 1, c3 - c2 - 1)), sd = std::stod(row.substr(c3 + 1));
        ok = ok && mean >= 0.0 && mean <= 1.0 && sd >= 0.0;
        table += "\"" + templates[i] + "\" " + fmt("%.3f", mean) + " +/- " + fmt("%.3f", sd) + "; ";
    }
    return {ok, table + "3 templates x 2 seeds"};
}

// ---- 9 ----------------------------------------------------------------------

Outcome invariance_suite() {
    Rng rng(9);
    std::string detail;
    bool ok = true;

    double cos_dev = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Tensor a = uniform({16}, rng), t = uniform({16}, rng);
        const double base = cosine_similarity(a.data(), t.data());
        for (double alpha : {1e-3, 1.0, 1e3}) {
            for (double beta : {1e-3, 1.0, 1e3}) {
                std::vector<double> sa(a.data().begin(), a.data().end()), st(t.data().begin(), t.data().end());
                for (auto& v : sa) v *= alpha;
                for (auto& v : st) v *= beta;
                cos_dev = std::max(cos_dev, std::abs(cosine_similarity(sa, st) - base));
            }
        }
    }
    ok = ok && cos_dev <= 1e-9;
    detail += "cosine scale deviation " + fmt("%.1e", cos_dev);

    double sym_dev = 0.0;
    for (std::size_t n = 1; n <= 16; ++n) {
        const Tensor s = uniform({n, n}, rng);
        std::vector<double> tv(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) tv[j * n + i] = s[i * n + j];
        sym_dev = std::max(sym_dev, std::abs(contrastive_loss(s, 1.0) - contrastive_loss(Tensor({n, n}, tv), 1.0)));
    }
    ok = ok && sym_dev <= 1e-12;
    detail += ", transpose asymmetry " + fmt("%.1e", sym_dev);

    bool argmax_same = true;
    double score_dev = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::pair<std::size_t, Tensor>> classes;
        for (std::size_t k = 0; k < 6; ++k) classes.emplace_back(k, uniform({12}, rng));
        const Tensor e = uniform({12}, rng);
        const auto base = classify(e.data(), classes);
        for (double alpha : {1e-3, 0.5, 7.0, 1e3}) {
            std::vector<double> scaled(e.data().begin(), e.data().end());
            for (auto& v : scaled) v *= alpha;
            const auto r = classify(scaled, classes);
            argmax_same = argmax_same && r.class_id == base.class_id;
            for (std::size_t k = 0; k < r.scores.size(); ++k) {
                const double d = std::abs(r.scores[k].score - base.scores[k].score);
                // Power-of-two scaling is exact in binary floating point.
                if (alpha == 0.5 && d != 0.0) argmax_same = false;
                score_dev = std::max(score_dev, d);
            }
        }
    }
    ok = ok && argmax_same && score_dev <= 1e-9;
    detail += std::string(", classify argmax ") + (argmax_same ? "stable" : "changed") + " (score deviation " +
              fmt("%.1e", score_dev) + ")";

    const BpeVocab& vocab = default_vocab();
    std::uniform_int_distribution<int> byte(0x21, 0x7e), len(1, 8), words(0, 6), space(0, 3);
    std::size_t round_trips = 0, failures = 0;
    const char* spaces[] = {" ", "  ", "\t", " \n "};
    for (int rep = 0; rep < 500; ++rep) {
        std::string text = rep % 2 ? "  " : "";
        const int nw = words(rng);
        for (int w = 0; w < nw; ++w) {
            for (int c = len(rng); c > 0; --c) text.push_back(static_cast<char>(byte(rng)));
            text += spaces[space(rng)];
        }
        const TokenSequence seq = tokenize(text, vocab, 1000);
        ++round_trips;
        if (decode(seq, vocab) != normalize_text(text)) ++failures;
    }
    for (const char* label : {"dog", "Car_Horn", "crackling_fire", "tone 849 hz"}) {
        const std::string text = apply_prompt(label, PromptTemplate("an audio clip of {}"));
        ++round_trips;
        if (decode(tokenize(text, vocab), vocab) != normalize_text(text)) ++failures;
    }
    ok = ok && failures == 0;
    detail += ", tokenizer round trips " + std::to_string(round_trips - failures) + "/" + std::to_string(round_trips);
    return {ok, detail};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "gradient suite", gradient_suite},
        {2, "loss oracle", loss_oracle_check},
        {3, "similarity oracle", similarity_oracle},
        {4, "synthetic overfit", synthetic_overfit},
        {5, "schedule exactness", schedule_exactness},
        {6, "full-scale shape contract", full_shapes},
        {7, "determinism and persistence", determinism_and_persistence},
        {8, "prompt ablation harness", ablation_harness},
        {9, "invariance suite", invariance_suite},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto start = Clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << " ["
                  << fmt("%.1f", seconds_since(start)) << " s]" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
    return failed ? 1 : 0;
}
