#include "s5/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "s5/mem.hpp"

namespace s5 {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int argmax_row(const Tensor& logits) {
    const std::vector<double>& v = logits.values();
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[static_cast<size_t>(best)]) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

ForwardOptions forward_options(const TrainConfig& cfg, bool train,
                               const StepKernels* kernels) {
    ForwardOptions opts;
    opts.eta = cfg.eta;
    opts.selector = selector_from_string(cfg.selector);
    opts.train = train;
    opts.deterministic_topk = cfg.deterministic_topk;
    opts.rho_g = cfg.rho_g;
    opts.kernels = kernels;
    return opts;
}

double selection_recall(const SyntheticVideo& video, const S5BlockStats& stats,
                        SelectorKind selector, int s_extent) {
    if (selector == SelectorKind::none) {
        return 1.0; // every token, planted ones included, reaches the model
    }
    return informative_recall(video, stats.selection.indices, s_extent);
}

} // namespace

std::string metrics_csv_header() {
    return "epoch,split,loss,accuracy,recall,kept_k,wall_ms,peak_bytes";
}

std::string to_csv(const MetricsRow& row) {
    return std::to_string(row.epoch) + "," + row.split + "," + fmt(row.loss) + "," +
           fmt(row.accuracy) + "," + fmt(row.recall) + "," + std::to_string(row.kept_k) +
           "," + fmt(row.wall_ms) + "," + std::to_string(row.peak_bytes);
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot open CSV for writing: " + path);
    }
    f << header << "\n";
    for (const std::string& row : rows) {
        f << row << "\n";
    }
}

EvalResult evaluate_classifier(const S5Classifier& model, const TrainConfig& cfg,
                               const std::vector<SyntheticVideo>& split,
                               uint64_t stream_tag) {
    NoTapeScope guard;
    const TaskSpec task = cfg.task_spec();
    const SelectorKind selector = selector_from_string(cfg.selector);
    const int st = task.token_count();
    const int kept = selector == SelectorKind::none ? st : kept_token_count(st, cfg.eta);
    StepKernels kernels = prepare_step_kernels(model, st, kept);
    ForwardOptions opts = forward_options(cfg, false, &kernels);

    EvalResult out;
    if (split.empty()) {
        return out;
    }
    int correct = 0;
    for (size_t i = 0; i < split.size(); ++i) {
        Rng gum(cfg.seed, stream_id("eval-gumbel", stream_tag, i));
        Rng drop(cfg.seed, stream_id("eval-dropout", stream_tag, i));
        S5BlockStats stats;
        Tensor logits = classifier_forward(model, split[i].frames, opts, gum, drop, &stats);
        out.loss += cross_entropy(logits, {split[i].label}).item();
        if (argmax_row(logits) == split[i].label) {
            ++correct;
        }
        out.recall += selection_recall(split[i], stats, selector, task.patches_per_frame());
    }
    out.loss /= static_cast<double>(split.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
    out.recall /= static_cast<double>(split.size());
    return out;
}

ParamTable classifier_param_table(S5Classifier& model) {
    ParamTable table;
    model.visit([&table](const std::string& name, Tensor& t, bool) { table.put(name, &t); });
    return table;
}

Checkpoint make_classifier_checkpoint(S5Classifier& model, const TrainConfig& cfg,
                                      const AdamW& opt, double lr, double plateau_best,
                                      int plateau_bad, int next_epoch) {
    Checkpoint ckpt;
    ckpt.meta.mode = "classifier";
    ckpt.meta.config_echo = cfg.to_string();
    ckpt.meta.next_epoch = next_epoch;
    ckpt.meta.optimizer_steps = opt.step_count();
    ckpt.meta.lr = lr;
    ckpt.meta.plateau_best = plateau_best;
    ckpt.meta.plateau_bad_epochs = plateau_bad;
    ckpt.params = classifier_param_table(model).snapshot();
    ckpt.moments = opt.state();
    return ckpt;
}

S5Classifier classifier_from_checkpoint(const Checkpoint& ckpt, TrainConfig* cfg_out) {
    if (ckpt.meta.mode != "classifier") {
        throw CheckpointError("checkpoint mode is '" + ckpt.meta.mode +
                              "', expected 'classifier'");
    }
    TrainConfig cfg = TrainConfig::parse(ckpt.meta.config_echo);
    Rng init_rng(cfg.seed, stream_id("init"));
    S5Classifier model = init_classifier(cfg, init_rng);
    classifier_param_table(model).load_from(ckpt);
    if (cfg_out) {
        *cfg_out = cfg;
    }
    return model;
}

TrainOutput train_classifier(const TrainConfig& cfg, const Dataset& ds,
                             const TrainHooks& hooks) {
    cfg.validate();
    const TaskSpec task = ds.spec;
    const SelectorKind selector = selector_from_string(cfg.selector);
    const int st = task.token_count();
    const int kept = selector == SelectorKind::none ? st : kept_token_count(st, cfg.eta);

    TrainOutput out;
    Rng init_rng(cfg.seed, stream_id("init"));
    out.model = init_classifier(cfg, init_rng);
    if (hooks.init_backbone) {
        transfer_init(*hooks.init_backbone, out.model);
    }

    AdamW opt(cfg.resolved_lr(), cfg.weight_decay);
    PlateauScheduler sched(cfg.plateau_factor, cfg.plateau_patience);
    double lr = cfg.resolved_lr();
    int start_epoch = 0;

    if (!hooks.resume_from.empty()) {
        Checkpoint ckpt = load_checkpoint(hooks.resume_from);
        if (ckpt.meta.mode != "classifier") {
            throw CheckpointError("cannot resume training from a '" + ckpt.meta.mode +
                                  "' checkpoint");
        }
        classifier_param_table(out.model).load_from(ckpt);
        opt.state() = ckpt.moments;
        opt.set_step_count(ckpt.meta.optimizer_steps);
        lr = ckpt.meta.lr;
        sched.restore(ckpt.meta.plateau_best, ckpt.meta.plateau_bad_epochs);
        start_epoch = ckpt.meta.next_epoch;
    }
    opt.set_lr(lr);

    std::vector<int> order(ds.train.size());
    const int batch = cfg.batch_size;
    int stopped_after = -1;

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        mem::reset_peak();
        const Clock::time_point epoch_start = Clock::now();
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(cfg.seed, stream_id("shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        double recall_sum = 0.0;
        int64_t seen = 0;
        int correct = 0;

        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(batch)) {
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(batch));
            const int bsize = static_cast<int>(end - begin);

            Tape tape;
            TapeScope scope(tape);
            out.model.visit_trainable([&tape](const std::string&, Tensor& t, bool trainable) {
                if (trainable) {
                    t = tape.watch(t);
                }
            });
            StepKernels kernels = prepare_step_kernels(out.model, st, kept);
            ForwardOptions opts = forward_options(cfg, true, &kernels);

            std::vector<Tensor> logit_rows;
            std::vector<int> labels;
            logit_rows.reserve(static_cast<size_t>(bsize));
            labels.reserve(static_cast<size_t>(bsize));
            for (size_t pos = begin; pos < end; ++pos) {
                const SyntheticVideo& video = ds.train[static_cast<size_t>(order[pos])];
                Rng gum(cfg.seed,
                        stream_id("gumbel", static_cast<uint64_t>(epoch), pos));
                Rng drop(cfg.seed,
                         stream_id("dropout", static_cast<uint64_t>(epoch), pos));
                S5BlockStats stats;
                Tensor logits =
                    classifier_forward(out.model, video.frames, opts, gum, drop, &stats);
                if (argmax_row(logits) == video.label) {
                    ++correct;
                }
                recall_sum +=
                    selection_recall(video, stats, selector, task.patches_per_frame());
                logit_rows.push_back(logits.reshaped({1, logits.dim(0)}));
                labels.push_back(video.label);
            }
            Tensor loss = cross_entropy(concat(logit_rows, 0), labels);
            tape.backward(loss);

            opt.begin_step();
            out.model.visit_trainable(
                [&tape, &opt](const std::string& name, Tensor& t, bool trainable) {
                    if (!trainable) {
                        return;
                    }
                    Tensor g = tape.grad(t);
                    t = t.detached();
                    opt.update(name, t, g);
                });
            momentum_update(out.model.shadow, out.model.backbone.blocks.front());

            loss_sum += loss.item() * bsize;
            seen += bsize;
        }

        MetricsRow train_row;
        train_row.epoch = epoch;
        train_row.split = "train";
        train_row.loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
        train_row.accuracy = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        train_row.recall = seen > 0 ? recall_sum / static_cast<double>(seen) : 0.0;
        train_row.kept_k = kept;
        train_row.wall_ms = cfg.timing_in_metrics ? ms_since(epoch_start) : 0.0;
        train_row.peak_bytes = mem::peak_bytes();
        out.metrics.push_back(train_row);

        const Clock::time_point val_start = Clock::now();
        EvalResult val = evaluate_classifier(out.model, cfg, ds.val,
                                             stream_id("val", static_cast<uint64_t>(epoch)));
        MetricsRow val_row;
        val_row.epoch = epoch;
        val_row.split = "val";
        val_row.loss = val.loss;
        val_row.accuracy = val.accuracy;
        val_row.recall = val.recall;
        val_row.kept_k = kept;
        val_row.wall_ms = cfg.timing_in_metrics ? ms_since(val_start) : 0.0;
        val_row.peak_bytes = mem::peak_bytes();
        out.metrics.push_back(val_row);
        out.val_accuracy_per_epoch.push_back(val.accuracy);
        out.final_val_accuracy = val.accuracy;
        out.final_val_recall = val.recall;

        lr = sched.observe(train_row.loss, lr);
        opt.set_lr(lr);

        if (hooks.stop_after_epoch >= 0 && epoch >= hooks.stop_after_epoch) {
            stopped_after = epoch;
            break;
        }
    }

    const int next_epoch = stopped_after >= 0 ? stopped_after + 1 : cfg.epochs;
    if (stopped_after < 0) {
        EvalResult test = evaluate_classifier(out.model, cfg, ds.test, stream_id("test"));
        MetricsRow test_row;
        test_row.epoch = cfg.epochs - 1;
        test_row.split = "test";
        test_row.loss = test.loss;
        test_row.accuracy = test.accuracy;
        test_row.recall = test.recall;
        test_row.kept_k = kept;
        test_row.wall_ms = 0.0;
        test_row.peak_bytes = mem::peak_bytes();
        out.metrics.push_back(test_row);
        out.test_accuracy = test.accuracy;
        out.test_recall = test.recall;
    }

    if (!hooks.out_dir.empty()) {
        std::filesystem::create_directories(hooks.out_dir);
        std::vector<std::string> rows;
        rows.reserve(out.metrics.size());
        for (const MetricsRow& row : out.metrics) {
            rows.push_back(to_csv(row));
        }
        write_csv(hooks.out_dir + "/metrics.csv", metrics_csv_header(), rows);
        Checkpoint ckpt = make_classifier_checkpoint(out.model, cfg, opt, lr,
                                                     sched.best_loss(), sched.bad_epochs(),
                                                     next_epoch);
        save_checkpoint(ckpt, hooks.out_dir + "/checkpoint.s5ck");
    }
    return out;
}

// ---------------------------------------------------------------------------
// LSMCL pretraining

ParamTable pretrain_param_table(ContrastiveHeads& heads) {
    ParamTable table;
    heads.q.visit("q.", [&table](const std::string& n, Tensor& t, bool) { table.put(n, &t); });
    heads.k.visit("k.", [&table](const std::string& n, Tensor& t, bool) { table.put(n, &t); });
    return table;
}

Checkpoint make_pretrain_checkpoint(ContrastiveHeads& heads, const TrainConfig& cfg,
                                    const AdamW& opt, int next_epoch) {
    Checkpoint ckpt;
    ckpt.meta.mode = "pretrain";
    ckpt.meta.config_echo = cfg.to_string();
    ckpt.meta.next_epoch = next_epoch;
    ckpt.meta.optimizer_steps = opt.step_count();
    ckpt.meta.lr = opt.lr();
    ckpt.meta.plateau_best = 0.0;
    ckpt.meta.plateau_bad_epochs = 0;
    ckpt.params = pretrain_param_table(heads).snapshot();
    ckpt.moments = opt.state();
    return ckpt;
}

ContrastiveHeads pretrain_from_checkpoint(const Checkpoint& ckpt, TrainConfig* cfg_out) {
    if (ckpt.meta.mode != "pretrain") {
        throw CheckpointError("checkpoint mode is '" + ckpt.meta.mode +
                              "', expected 'pretrain'");
    }
    TrainConfig cfg = TrainConfig::parse(ckpt.meta.config_echo);
    Rng init_rng(cfg.seed, stream_id("pretrain-init"));
    ContrastiveHeads heads = init_contrastive(cfg, init_rng);
    pretrain_param_table(heads).load_from(ckpt);
    if (cfg_out) {
        *cfg_out = cfg;
    }
    return heads;
}

PretrainOutput pretrain_lsmcl(const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const TaskSpec task = cfg.task_spec();
    const int clip_frames = task.frames;
    const int video_frames = clip_frames * cfg.tau_long + cfg.tau_long;
    const int st = task.token_count();

    std::vector<SyntheticVideo> videos;
    videos.reserve(static_cast<size_t>(cfg.pretrain_videos));
    for (int i = 0; i < cfg.pretrain_videos; ++i) {
        videos.push_back(gen_sparse_video(task, video_frames,
                                          stream_id("pretrain-video", cfg.seed,
                                                    static_cast<uint64_t>(i))));
    }

    PretrainOutput out;
    Rng init_rng(cfg.seed, stream_id("pretrain-init"));
    out.heads = init_contrastive(cfg, init_rng);
    AdamW opt(cfg.pretrain_lr, cfg.pretrain_weight_decay);

    const int warmup_epochs = static_cast<int>(
        std::ceil(cfg.pretrain_warmup_frac * static_cast<double>(cfg.pretrain_epochs)));

    std::vector<int> order(videos.size());
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const double warm =
            warmup_epochs > 0
                ? std::min(1.0, static_cast<double>(epoch + 1) / warmup_epochs)
                : 1.0;
        opt.set_lr(cfg.pretrain_lr * warm);

        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(cfg.seed, stream_id("pretrain-shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0, pos_sum = 0.0, neg_sum = 0.0;
        int steps = 0;
        const size_t batch = static_cast<size_t>(cfg.pretrain_batch_size);
        for (size_t begin = 0; begin + 2 <= order.size(); begin += batch) {
            const size_t end = std::min(order.size(), begin + batch);
            if (end - begin < 2) {
                break; // batch-norm and the contrastive loss need >= 2
            }
            std::vector<ClipPair> pairs;
            pairs.reserve(end - begin);
            for (size_t pos = begin; pos < end; ++pos) {
                const SyntheticVideo& video = videos[static_cast<size_t>(order[pos])];
                Rng clip_rng(cfg.seed, stream_id("clip", static_cast<uint64_t>(epoch), pos));
                ClipPair pair = sample_long_short(video.frames, clip_frames, cfg.tau_long,
                                                  cfg.tau_short, clip_rng);
                Rng mask_long_rng(cfg.seed,
                                  stream_id("mask-long", static_cast<uint64_t>(epoch), pos));
                Rng mask_short_rng(cfg.seed,
                                   stream_id("mask-short", static_cast<uint64_t>(epoch), pos));
                pair.mask_long = random_mask_indices(st, cfg.eta, mask_long_rng);
                pair.mask_short = random_mask_indices(st, cfg.eta, mask_short_rng);
                pairs.push_back(std::move(pair));
            }
            Rng drop(cfg.seed, stream_id("pretrain-dropout", static_cast<uint64_t>(epoch),
                                         begin));
            LsmclStepStats stats = lsmcl_step(out.heads, pairs, cfg.rho_nce, opt, drop);
            loss_sum += stats.loss;
            pos_sum += stats.positive_similarity;
            neg_sum += stats.negative_similarity;
            ++steps;
        }
        const double inv = steps > 0 ? 1.0 / steps : 0.0;
        out.final_loss = loss_sum * inv;
        out.csv_rows.push_back(std::to_string(epoch) + "," + fmt(loss_sum * inv) + "," +
                               fmt(pos_sum * inv) + "," + fmt(neg_sum * inv) + "," +
                               fmt(opt.lr()));
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_csv(out_dir + "/pretrain_metrics.csv", "epoch,loss,pos_sim,neg_sim,lr",
                  out.csv_rows);
        Checkpoint ckpt =
            make_pretrain_checkpoint(out.heads, cfg, opt, cfg.pretrain_epochs);
        save_checkpoint(ckpt, out_dir + "/pretrain_checkpoint.s5ck");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bench + ablation

std::string bench_csv_header() {
    return "eta,kept_tokens,s5_block_bytes,peak_step_bytes,step_ms,tokens_per_s,samples_per_s";
}

std::string to_csv(const BenchRow& row) {
    return fmt(row.eta) + "," + std::to_string(row.kept_tokens) + "," +
           std::to_string(row.s5_block_bytes) + "," + std::to_string(row.peak_step_bytes) +
           "," + fmt(row.step_ms) + "," + fmt(row.tokens_per_s) + "," +
           fmt(row.samples_per_s);
}

std::vector<BenchRow> bench(const TrainConfig& cfg, const std::vector<double>& etas) {
    cfg.validate();
    TaskSpec task = cfg.task_spec();
    task.train_size = cfg.batch_size;
    task.val_size = 1;
    task.test_size = 1;
    Rng data_rng(cfg.seed, stream_id("bench-data"));
    Dataset ds = gen_task(task, data_rng);
    const int st = task.token_count();

    std::vector<BenchRow> rows;
    for (double eta : etas) {
        TrainConfig run_cfg = cfg;
        run_cfg.eta = eta;
        const SelectorKind selector = selector_from_string(run_cfg.selector);
        const int kept =
            selector == SelectorKind::none ? st : kept_token_count(st, eta);

        Rng init_rng(run_cfg.seed, stream_id("init"));
        S5Classifier model = init_classifier(run_cfg, init_rng);

        BenchRow row;
        row.eta = eta;
        double total_ms = 0.0;
        int64_t block_bytes = 0;
        const int measured_steps = 2;
        for (int step = 0; step < measured_steps + 1; ++step) {
            mem::reset_peak();
            const Clock::time_point t0 = Clock::now();
            Tape tape;
            TapeScope scope(tape);
            model.visit_trainable([&tape](const std::string&, Tensor& t, bool trainable) {
                if (trainable) {
                    t = tape.watch(t);
                }
            });
            StepKernels kernels = prepare_step_kernels(model, st, kept);
            ForwardOptions opts = forward_options(run_cfg, true, &kernels);
            std::vector<Tensor> logit_rows;
            std::vector<int> labels;
            int64_t step_block_bytes = 0;
            int kept_seen = 0;
            for (size_t i = 0; i < ds.train.size(); ++i) {
                Rng gum(run_cfg.seed, stream_id("bench-gumbel", static_cast<uint64_t>(step), i));
                Rng drop(run_cfg.seed,
                         stream_id("bench-dropout", static_cast<uint64_t>(step), i));
                S5BlockStats stats;
                Tensor logits =
                    classifier_forward(model, ds.train[i].frames, opts, gum, drop, &stats);
                logit_rows.push_back(logits.reshaped({1, logits.dim(0)}));
                labels.push_back(ds.train[i].label);
                step_block_bytes += stats.main_path_alloc_bytes;
                kept_seen = stats.kept_tokens;
            }
            Tensor loss = cross_entropy(concat(logit_rows, 0), labels);
            tape.backward(loss);
            model.visit_trainable([](const std::string&, Tensor& t, bool) {
                t = t.detached();
            });
            row.kept_tokens = kept_seen;
            row.peak_step_bytes = mem::peak_bytes();
            const double step_ms = ms_since(t0);
            if (step > 0) { // first step warms caches
                total_ms += step_ms;
                block_bytes += step_block_bytes;
            }
        }
        row.step_ms = total_ms / measured_steps;
        row.s5_block_bytes = block_bytes / (measured_steps * static_cast<int64_t>(ds.train.size()));
        const double sec = row.step_ms / 1000.0;
        row.samples_per_s = sec > 0 ? static_cast<double>(ds.train.size()) / sec : 0.0;
        row.tokens_per_s = row.samples_per_s * st;
        rows.push_back(row);
    }
    return rows;
}

std::string ablation_csv_header() { return "axis,cell,accuracy,recall,loss"; }

std::string to_csv(const AblationRow& row) {
    return row.axis + "," + row.cell + "," + fmt(row.accuracy) + "," + fmt(row.recall) +
           "," + fmt(row.loss);
}

std::vector<AblationRow> ablate_eta(const TrainConfig& cfg, const std::vector<double>& etas) {
    Rng data_rng(cfg.seed, stream_id("data"));
    Dataset ds = gen_task(cfg.task_spec(), data_rng);
    std::vector<AblationRow> rows;
    for (double eta : etas) {
        TrainConfig cell = cfg;
        cell.eta = eta;
        TrainOutput run = train_classifier(cell, ds);
        AblationRow row;
        row.axis = "eta";
        row.cell = fmt(eta);
        row.accuracy = run.test_accuracy;
        row.recall = run.test_recall;
        row.loss = run.metrics.back().loss;
        rows.push_back(row);
    }
    return rows;
}

std::vector<AblationRow> ablate_frames(const TrainConfig& cfg) {
    std::vector<AblationRow> rows;
    for (int denom : {2, 1}) {
        TrainConfig cell = cfg;
        cell.task_kind = "long-range";
        cell.task_frames = cfg.task_frames;
        TrainConfig full = cell;
        Rng data_rng(cfg.seed, stream_id("data"));
        Dataset ds = gen_long_range_task(full.task_spec(), data_rng);
        if (denom == 2) {
            // Truncate every video to its first half; the label needs the
            // final frame, so this provably destroys the signal.
            const int half = cfg.task_frames / 2;
            std::vector<int> keep(static_cast<size_t>(half));
            std::iota(keep.begin(), keep.end(), 0);
            auto truncate = [&keep, half](std::vector<SyntheticVideo>& split) {
                for (SyntheticVideo& v : split) {
                    v.frames = gather_rows(v.frames, keep);
                    (void)half;
                }
            };
            truncate(ds.train);
            truncate(ds.val);
            truncate(ds.test);
            ds.spec.frames = half;
            cell.task_frames = half;
        }
        TrainOutput run = train_classifier(cell, ds);
        AblationRow row;
        row.axis = "frames";
        row.cell = std::to_string(cell.task_frames);
        row.accuracy = run.test_accuracy;
        row.recall = run.test_recall;
        row.loss = run.metrics.back().loss;
        rows.push_back(row);
    }
    return rows;
}

std::vector<AblationRow> ablate_stride(const TrainConfig& cfg,
                                       const std::vector<std::pair<int, int>>& taus) {
    Rng data_rng(cfg.seed, stream_id("data"));
    Dataset ds = gen_task(cfg.task_spec(), data_rng);
    std::vector<AblationRow> rows;
    for (const auto& [tau_l, tau_s] : taus) {
        TrainConfig cell = cfg;
        cell.tau_long = tau_l;
        cell.tau_short = tau_s;
        PretrainOutput pre = pretrain_lsmcl(cell);
        TrainHooks hooks;
        hooks.init_backbone = &pre.heads.q;
        TrainOutput run = train_classifier(cell, ds, hooks);
        AblationRow row;
        row.axis = "stride";
        row.cell = std::to_string(tau_l) + ":" + std::to_string(tau_s);
        row.accuracy = run.test_accuracy;
        row.recall = run.test_recall;
        row.loss = run.metrics.back().loss;
        rows.push_back(row);
    }
    return rows;
}

std::vector<AblationRow> ablate_lsmcl(const TrainConfig& cfg) {
    Rng data_rng(cfg.seed, stream_id("data"));
    Dataset ds = gen_task(cfg.task_spec(), data_rng);
    std::vector<AblationRow> rows;
    {
        TrainOutput scratch = train_classifier(cfg, ds);
        AblationRow row;
        row.axis = "lsmcl";
        row.cell = "scratch";
        row.accuracy = scratch.test_accuracy;
        row.recall = scratch.test_recall;
        row.loss = scratch.metrics.back().loss;
        rows.push_back(row);
    }
    {
        PretrainOutput pre = pretrain_lsmcl(cfg);
        TrainHooks hooks;
        hooks.init_backbone = &pre.heads.q;
        TrainOutput tuned = train_classifier(cfg, ds, hooks);
        AblationRow row;
        row.axis = "lsmcl";
        row.cell = "pretrained";
        row.accuracy = tuned.test_accuracy;
        row.recall = tuned.test_recall;
        row.loss = tuned.metrics.back().loss;
        rows.push_back(row);
    }
    return rows;
}

} // namespace s5
