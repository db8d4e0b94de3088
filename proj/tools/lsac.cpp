// SPDX-FileCopyrightText: Copyright 2026 The lsac Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train, eval, crossval, classify, ablate-prompts,
// gradcheck.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lsac/gradient_suite.hpp"
#include "lsac/trainer.hpp"
#include "../src/binary_io.hpp"

namespace {

using namespace lsac;

std::vector<std::string> read_lines(const std::string& path) {
    std::istringstream in(io::read_file(path));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') out.push_back(line);
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
    std::vector<std::uint64_t> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stoull(item));
    return out;
}

// The rate eval() would use for this config, without loading a dataset.
double nominal_eval_rate(const TrainConfig& cfg) {
    if (cfg.eval_rate > 0.0) return cfg.eval_rate;
    if (cfg.dataset == "synth") return cfg.synth_rate;
    if (cfg.dataset == "esc50") return 32000.0;
    return 44100.0;
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
    } else {
        io::write_file(path, text);
        std::cout << "wrote " << path << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive audio-text classifier: training and evaluation"};
    app.require_subcommand(1);

    std::string config_path, dataset, root, out_path, ckpt_path, report_path, wav_path, labels_path, templates_path,
        seeds_list, prompt;
    std::size_t fold = 0, epochs = 0, grad_seeds = 10;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_cmd->add_option("--config", config_path, "key = value config file");
    train_cmd->add_option("--dataset", dataset, "esc50, us8k or synth")->check(CLI::IsMember({"esc50", "us8k", "synth"}));
    train_cmd->add_option("--root", root, "dataset root directory");
    train_cmd->add_option("--fold", fold, "held-out fold");
    train_cmd->add_option("--epochs", epochs, "override the configured epoch count");
    train_cmd->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { seed = v; seed_set = true; }, "seed");
    train_cmd->add_option("--out", out_path, "checkpoint path")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one fold");
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    eval_cmd->add_option("--root", root, "dataset root (defaults to the one in the checkpoint)");
    eval_cmd->add_option("--fold", fold, "fold to evaluate (defaults to the trained eval fold)");
    eval_cmd->add_option("--report", report_path, "CSV report path (stdout when omitted)");

    auto* cv_cmd = app.add_subcommand("crossval", "train and evaluate once per held-out fold");
    cv_cmd->add_option("--config", config_path, "key = value config file")->required();
    cv_cmd->add_option("--root", root, "dataset root directory");
    cv_cmd->add_option("--out", out_path, "CSV output (stdout when omitted)");

    auto* classify_cmd = app.add_subcommand("classify", "classify one WAV file");
    classify_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    classify_cmd->add_option("--wav", wav_path, "audio file")->required();
    classify_cmd->add_option("--labels", labels_path, "one class name per line")->required();
    classify_cmd->add_option("--template", prompt, "prompt template with one {} placeholder");

    auto* ablate_cmd = app.add_subcommand("ablate-prompts", "train and evaluate each template over several seeds");
    ablate_cmd->add_option("--config", config_path, "key = value config file")->required();
    ablate_cmd->add_option("--templates", templates_path, "one template per line")->required();
    ablate_cmd->add_option("--seeds", seeds_list, "comma-separated seeds")->required();
    ablate_cmd->add_option("--out", out_path, "CSV output (stdout when omitted)");

    auto* grad_cmd = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
    grad_cmd->add_option("--seeds", grad_seeds, "number of seeds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            TrainConfig cfg = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
            if (!dataset.empty()) cfg.dataset = dataset;
            if (!root.empty()) cfg.root = root;
            if (fold) cfg.eval_fold = fold;
            if (epochs) cfg.epochs = epochs;
            if (seed_set) cfg.seed = seed;
            cfg.validate();
            const Dataset data = load_dataset(cfg);
            const auto [train_set, eval_set] = fold_split(data.samples, cfg.eval_fold);
            std::cout << "training on " << train_set.size() << " clips, holding out fold " << cfg.eval_fold << " ("
                      << eval_set.size() << " clips)\n";
            const Checkpoint ckpt = train(cfg, data.spec, train_set, &std::cout);
            save_checkpoint(ckpt, out_path);
            const EvalReport report = evaluate(model_from(ckpt), data.spec, eval_set, cfg.eval_fold);
            std::cout << "held-out accuracy " << report.overall << "\nwrote " << out_path << "\n";
        } else if (*eval_cmd) {
            const Checkpoint ckpt = load_checkpoint(ckpt_path);
            TrainConfig cfg = ckpt.config;
            if (!root.empty()) cfg.root = root;
            const std::size_t f = fold ? fold : cfg.eval_fold;
            const Dataset data = load_dataset(cfg);
            const auto eval_set = fold_split(data.samples, f).second;
            const EvalReport report = evaluate(model_from(ckpt), data.spec, eval_set, f);
            write_or_print(report_path, report.to_csv());
            if (!report_path.empty()) std::cout << "accuracy " << report.overall << "\n";
        } else if (*cv_cmd) {
            TrainConfig cfg = TrainConfig::load(config_path);
            if (!root.empty()) cfg.root = root;
            cfg.validate();
            const Dataset data = load_dataset(cfg);
            std::ostringstream csv;
            csv << "fold,clips,accuracy\n";
            std::vector<double> accs;
            for (std::size_t f = 1; f <= data.spec.n_folds; ++f) {
                cfg.eval_fold = f;
                const auto [train_set, eval_set] = fold_split(data.samples, f);
                const Checkpoint ckpt = train(cfg, data.spec, train_set);
                const double acc = evaluate(model_from(ckpt), data.spec, eval_set, f).overall;
                accs.push_back(acc);
                csv << f << "," << eval_set.size() << "," << acc << "\n";
                std::cerr << "fold " << f << ": " << acc << "\n";
            }
            double mean = 0.0, var = 0.0;
            for (double a : accs) mean += a;
            mean /= static_cast<double>(accs.size());
            for (double a : accs) var += (a - mean) * (a - mean);
            const double sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
            csv << "mean," << data.samples.size() << "," << mean << "\nstd,," << sd << "\n";
            write_or_print(out_path, csv.str());
        } else if (*classify_cmd) {
            Model model = model_from(load_checkpoint(ckpt_path));
            if (!prompt.empty()) {
                model.config.prompt = prompt;
                model.config.validate();
            }
            const auto labels = read_lines(labels_path);
            if (labels.empty()) throw ConfigError("no labels in " + labels_path);
            Sample sample;
            sample.path = wav_path;
            const auto result = predict(model, labels, {sample}, nominal_eval_rate(model.config)).at(0);
            std::cout << labels[result.class_id] << "\n";
            for (const auto& s : result.scores) std::cout << "  " << labels[s.class_id] << "\t" << s.score << "\n";
        } else if (*ablate_cmd) {
            const TrainConfig cfg = TrainConfig::load(config_path);
            const auto templates = read_lines(templates_path);
            const auto seeds = parse_seeds(seeds_list);
            const Dataset data = load_dataset(cfg);
            const auto rows = prompt_ablation(cfg, data, templates, seeds, &std::cerr);
            write_or_print(out_path, format_ablation(rows));
        } else if (*grad_cmd) {
            const auto result = run_gradient_suite(grad_seeds, &std::cout);
            if (!result.passed(kGradientTolerance)) {
                std::cout << "gradient suite FAILED: max relative error " << result.max_rel_error() << "\n";
                return 1;
            }
            std::cout << "gradient suite passed: max relative error " << result.max_rel_error() << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
