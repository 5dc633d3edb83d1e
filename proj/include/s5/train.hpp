#pragma once

#include <optional>
#include <string>
#include <vector>

#include "s5/checkpoint.hpp"
#include "s5/lsmcl.hpp"

namespace s5 {

// One metrics CSV line. Columns are fixed:
// epoch,split,loss,accuracy,recall,kept_k,wall_ms,peak_bytes
// wall_ms stays 0 unless timing_in_metrics is enabled, keeping the file
// byte-reproducible for identical (config, seed).
struct MetricsRow {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    double recall = 0.0;
    int kept_k = 0;
    double wall_ms = 0.0;
    int64_t peak_bytes = 0;
};

std::string metrics_csv_header();
std::string to_csv(const MetricsRow& row);
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    double recall = 0.0;
};

EvalResult evaluate_classifier(const S5Classifier& model, const TrainConfig& cfg,
                               const std::vector<SyntheticVideo>& split,
                               uint64_t stream_tag);

struct TrainHooks {
    ContrastiveEncoder* init_backbone = nullptr; // fine-tune from this pretrained encoder
    std::string out_dir;                         // writes metrics.csv + checkpoint.s5ck
    std::string resume_from;                     // checkpoint path
    int stop_after_epoch = -1;                   // checkpoint and stop past this epoch
};

struct TrainOutput {
    S5Classifier model;
    std::vector<MetricsRow> metrics;
    std::vector<double> val_accuracy_per_epoch;
    double final_val_accuracy = 0.0;
    double final_val_recall = 0.0;
    double test_accuracy = 0.0;
    double test_recall = 0.0;
};

TrainOutput train_classifier(const TrainConfig& cfg, const Dataset& ds,
                             const TrainHooks& hooks = {});

// Classifier checkpoint plumbing.
ParamTable classifier_param_table(S5Classifier& model);
Checkpoint make_classifier_checkpoint(S5Classifier& model, const TrainConfig& cfg,
                                      const AdamW& opt, double lr, double plateau_best,
                                      int plateau_bad, int next_epoch);
S5Classifier classifier_from_checkpoint(const Checkpoint& ckpt, TrainConfig* cfg_out);

// LSMCL pretraining over freshly generated longer videos.
struct PretrainOutput {
    ContrastiveHeads heads;
    std::vector<std::string> csv_rows; // epoch,loss,pos_sim,neg_sim,lr
    double final_loss = 0.0;
};

PretrainOutput pretrain_lsmcl(const TrainConfig& cfg, const std::string& out_dir = "");

ParamTable pretrain_param_table(ContrastiveHeads& heads);
Checkpoint make_pretrain_checkpoint(ContrastiveHeads& heads, const TrainConfig& cfg,
                                    const AdamW& opt, int next_epoch);
ContrastiveHeads pretrain_from_checkpoint(const Checkpoint& ckpt, TrainConfig* cfg_out);

// Desk-scale efficiency proxy: one instrumented training step per masking
// ratio with shared seeds.
struct BenchRow {
    double eta = 0.0;
    int kept_tokens = 0;
    int64_t s5_block_bytes = 0;
    int64_t peak_step_bytes = 0;
    double step_ms = 0.0;
    double tokens_per_s = 0.0;
    double samples_per_s = 0.0;
};

std::vector<BenchRow> bench(const TrainConfig& cfg, const std::vector<double>& etas = {0.0,
                                                                                       0.5});
std::string bench_csv_header();
std::string to_csv(const BenchRow& row);

// Ablation cells (one training run per row, shared seeds across cells).
struct AblationRow {
    std::string axis;
    std::string cell;
    double accuracy = 0.0;
    double recall = 0.0;
    double loss = 0.0;
};

std::string ablation_csv_header();
std::string to_csv(const AblationRow& row);

std::vector<AblationRow> ablate_eta(const TrainConfig& cfg, const std::vector<double>& etas);
std::vector<AblationRow> ablate_frames(const TrainConfig& cfg);
std::vector<AblationRow> ablate_stride(const TrainConfig& cfg,
                                       const std::vector<std::pair<int, int>>& taus);
std::vector<AblationRow> ablate_lsmcl(const TrainConfig& cfg);

} // namespace s5
