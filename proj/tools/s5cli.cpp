// Command-line front end: data generation, training, pretraining, evaluation,
// benchmarking, ablations and checkpoint inspection.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "s5/train.hpp"

namespace {

using namespace s5;

TrainConfig load_config(const std::string& config_path, uint64_t seed_override,
                        bool has_seed, bool deterministic_topk) {
    TrainConfig cfg =
        config_path.empty() ? TrainConfig::defaults() : TrainConfig::load(config_path);
    if (has_seed) {
        cfg.seed = seed_override;
    }
    if (deterministic_topk) {
        cfg.deterministic_topk = true;
    }
    cfg.validate();
    return cfg;
}

Dataset dataset_for(const TrainConfig& cfg, const std::string& data_path) {
    if (!data_path.empty()) {
        return load_dataset(data_path);
    }
    Rng rng(cfg.seed, stream_id("data"));
    return gen_task(cfg.task_spec(), rng);
}

int cmd_gen_data(const TrainConfig& cfg, const std::string& out_path) {
    Rng rng(cfg.seed, stream_id("data"));
    Dataset ds = gen_task(cfg.task_spec(), rng);
    save_dataset(ds, out_path);
    std::cout << "wrote " << out_path << " (" << ds.train.size() << "/" << ds.val.size()
              << "/" << ds.test.size() << " samples)\n";
    return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& data_path,
              const std::string& out_dir, const std::string& resume) {
    Dataset ds = dataset_for(cfg, data_path);
    TrainHooks hooks;
    hooks.out_dir = out_dir;
    hooks.resume_from = resume;
    TrainOutput out = train_classifier(cfg, ds, hooks);
    std::cout << metrics_csv_header() << "\n";
    for (const MetricsRow& row : out.metrics) {
        std::cout << to_csv(row) << "\n";
    }
    return 0;
}

int cmd_pretrain(const TrainConfig& cfg, const std::string& out_dir) {
    PretrainOutput out = pretrain_lsmcl(cfg, out_dir);
    std::cout << "epoch,loss,pos_sim,neg_sim,lr\n";
    for (const std::string& row : out.csv_rows) {
        std::cout << row << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             bool deterministic_topk) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    TrainConfig cfg;
    S5Classifier model = classifier_from_checkpoint(ckpt, &cfg);
    if (deterministic_topk) {
        cfg.deterministic_topk = true;
    }
    Dataset ds = dataset_for(cfg, data_path);
    EvalResult val = evaluate_classifier(model, cfg, ds.val, stream_id("cli-eval-val"));
    EvalResult test = evaluate_classifier(model, cfg, ds.test, stream_id("cli-eval-test"));
    std::cout << "split,loss,accuracy,recall\n";
    std::cout << "val," << val.loss << "," << val.accuracy << "," << val.recall << "\n";
    std::cout << "test," << test.loss << "," << test.accuracy << "," << test.recall << "\n";
    return 0;
}

int cmd_bench(const TrainConfig& cfg, const std::string& out_dir) {
    std::vector<BenchRow> rows = bench(cfg);
    std::cout << bench_csv_header() << "\n";
    std::vector<std::string> lines;
    for (const BenchRow& row : rows) {
        lines.push_back(to_csv(row));
        std::cout << lines.back() << "\n";
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_csv(out_dir + "/bench.csv", bench_csv_header(), lines);
    }
    return 0;
}

int cmd_ablate(const TrainConfig& cfg, const std::string& axis, const std::string& out_dir) {
    std::vector<AblationRow> rows;
    if (axis == "eta") {
        rows = ablate_eta(cfg, {0.0, 0.2, 0.5, 0.8, 0.9});
    } else if (axis == "frames") {
        rows = ablate_frames(cfg);
    } else if (axis == "stride") {
        rows = ablate_stride(cfg, {{2, 2}, {3, 2}});
    } else if (axis == "lsmcl") {
        rows = ablate_lsmcl(cfg);
    } else {
        throw ConfigError("unknown ablation axis '" + axis +
                          "' (expected eta|frames|stride|lsmcl)");
    }
    std::cout << ablation_csv_header() << "\n";
    std::vector<std::string> lines;
    for (const AblationRow& row : rows) {
        lines.push_back(to_csv(row));
        std::cout << lines.back() << "\n";
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_csv(out_dir + "/ablation_" + axis + ".csv", ablation_csv_header(), lines);
    }
    return 0;
}

int cmd_inspect_kernel(const std::string& checkpoint_path, int layer, int length) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    TrainConfig cfg;
    S5Classifier model = classifier_from_checkpoint(ckpt, &cfg);
    const int blocks = static_cast<int>(model.backbone.blocks.size());
    if (layer < 0 || layer >= blocks) {
        throw ArgError("layer index out of range (model has " + std::to_string(blocks) +
                       " blocks)");
    }
    NoTapeScope guard;
    S4Kernel kernel = materialize_kernel(model.backbone.blocks[layer].s4, length);
    const int d = kernel.channels(), l = kernel.length();
    for (int ch = 0; ch < d; ++ch) {
        for (int i = 0; i < l; ++i) {
            std::cout << kernel.kbar.at2(ch, i) << (i + 1 < l ? "," : "");
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_inspect_mask(const std::string& checkpoint_path, const std::string& data_path,
                     int sample, bool deterministic_topk) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    TrainConfig cfg;
    S5Classifier model = classifier_from_checkpoint(ckpt, &cfg);
    Dataset ds = dataset_for(cfg, data_path);
    if (sample < 0 || sample >= static_cast<int>(ds.test.size())) {
        throw ArgError("sample index out of range for the test split");
    }
    const SyntheticVideo& video = ds.test[static_cast<size_t>(sample)];
    NoTapeScope guard;
    TokenGrid grid =
        tokenize(video.frames, model.patch, model.backbone.embed, model.backbone.pos);
    Tensor features = shadow_features(model.shadow, grid.tokens);
    Tensor probs = mask_probs(model.mg, selector_from_string(cfg.selector) ==
                                            SelectorKind::linear
                                        ? grid.tokens.detached()
                                        : features);
    const int st = grid.rows();
    const int k = kept_token_count(st, cfg.eta);
    Rng rng(cfg.seed, stream_id("inspect-mask"));
    SelectionResult sel =
        gumbel_topk(probs.detached(), k, rng, model.mg.eps, deterministic_topk);
    std::cout << "token,t,s,prob,selected\n";
    std::vector<bool> chosen(static_cast<size_t>(st), false);
    for (int idx : sel.indices) {
        chosen[static_cast<size_t>(idx)] = true;
    }
    for (int r = 0; r < st; ++r) {
        std::cout << r << "," << r / grid.s << "," << r % grid.s << "," << probs[r] << ","
                  << (chosen[static_cast<size_t>(r)] ? 1 : 0) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective structured state-space sequence models, desk scale"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_path, resume, axis = "eta", checkpoint_path;
    uint64_t seed = 0;
    bool deterministic_topk = false;
    int layer = 0, length = 64, sample = 0;

    app.add_option("--config", config_path, "path to a key=value config file");
    auto* seed_opt = app.add_option("--seed", seed, "seed override");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--deterministic-topk", deterministic_topk,
                 "noise-free top-K selection at evaluation");

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
    std::string gen_out = "dataset.s5ds";
    gen->add_option("--file", gen_out, "output dataset path");

    CLI::App* train = app.add_subcommand("train", "train a classifier");
    train->add_option("--data", data_path, "dataset file (generated when absent)");
    train->add_option("--resume", resume, "checkpoint to resume from");

    CLI::App* pretrain = app.add_subcommand("pretrain", "LSMCL pretraining");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "classifier checkpoint")
        ->required();
    eval_cmd->add_option("--data", data_path, "dataset file (generated when absent)");

    CLI::App* bench_cmd = app.add_subcommand("bench", "memory/throughput proxy");

    CLI::App* ablate = app.add_subcommand("ablate", "ablation grids");
    ablate->add_option("--axis", axis, "eta|frames|stride|lsmcl");

    CLI::App* ik = app.add_subcommand("inspect-kernel", "dump kernel rows as CSV");
    ik->add_option("--checkpoint", checkpoint_path, "classifier checkpoint")->required();
    ik->add_option("--layer", layer, "block index");
    ik->add_option("--length", length, "kernel length");

    CLI::App* im = app.add_subcommand("inspect-mask", "dump selection probabilities as CSV");
    im->add_option("--checkpoint", checkpoint_path, "classifier checkpoint")->required();
    im->add_option("--data", data_path, "dataset file (generated when absent)");
    im->add_option("--sample", sample, "test-split sample index");

    CLI11_PARSE(app, argc, argv);

    try {
        const bool has_seed = seed_opt->count() > 0;
        TrainConfig cfg = load_config(config_path, seed, has_seed, deterministic_topk);
        if (gen->parsed()) return cmd_gen_data(cfg, gen_out);
        if (train->parsed()) return cmd_train(cfg, data_path, out_dir, resume);
        if (pretrain->parsed()) return cmd_pretrain(cfg, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, data_path, deterministic_topk);
        if (bench_cmd->parsed()) return cmd_bench(cfg, out_dir);
        if (ablate->parsed()) return cmd_ablate(cfg, axis, out_dir);
        if (ik->parsed()) return cmd_inspect_kernel(checkpoint_path, layer, length);
        if (im->parsed()) return cmd_inspect_mask(checkpoint_path, data_path, sample,
                                                  deterministic_topk);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const s5::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const s5::FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const s5::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const s5::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
