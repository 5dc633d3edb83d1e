#pragma once

#include <cstdint>
#include <string>

#include "s5/synth.hpp"

namespace s5 {

// Every hyperparameter in one flat struct; parsed from `key = value` text with
// '#' comments. Unknown keys are rejected. When `lr` is absent it is derived
// as 1e-3 * batch_size / 16 at load time.
struct TrainConfig {
    uint64_t seed = 42;

    // task
    std::string task_kind = "sparse-token";
    int task_classes = 4;
    int task_frames = 12;
    int task_height = 32;
    int task_width = 32;
    int task_patch = 8;
    int task_planted = 16;
    double task_noise_std = 0.1;
    int task_train = 2000;
    int task_val = 500;
    int task_test = 500;

    // model
    int d_emb = 64;
    int state_dim = 16;
    int blocks = 3;
    std::string strides = "2,2,2";
    double dropout = 0.2;

    // optimization
    double lr = 0.0; // 0 means "derive from batch size"
    double weight_decay = 0.01;
    int batch_size = 16;
    int epochs = 30;
    double plateau_factor = 0.2;
    int plateau_patience = 1;

    // selection
    double eta = 0.5;
    double rho_g = 1.0;
    double m_s4 = 0.01;
    std::string selector = "linear_s4";
    bool deterministic_topk = false;

    // contrastive pretraining
    double rho_nce = 0.2;
    double m_key = 0.99;
    int tau_long = 3;
    int tau_short = 2;
    int pretrain_epochs = 60;
    int pretrain_batch_size = 8;
    double pretrain_lr = 1e-3;
    double pretrain_weight_decay = 0.05;
    double pretrain_warmup_frac = 0.13;
    int pretrain_videos = 128;
    int proj_hidden = 64;
    int proj_out = 32;

    // harness
    bool timing_in_metrics = false;

    static TrainConfig defaults() { return TrainConfig{}; }
    static TrainConfig load(const std::string& path);
    static TrainConfig parse(const std::string& text);

    // Canonical serialization (the checkpoint's config echo); stable key order.
    std::string to_string() const;

    void validate() const;
    TaskSpec task_spec() const;
    std::vector<int> stride_list() const;
    double resolved_lr() const;
};

} // namespace s5
