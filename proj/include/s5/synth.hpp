#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "s5/rng.hpp"
#include "s5/tensor.hpp"

namespace s5 {

enum class TaskKind { sparse_token, long_range };

TaskKind task_kind_from_string(const std::string& s);
std::string task_kind_to_string(TaskKind k);

struct TaskSpec {
    TaskKind kind = TaskKind::sparse_token;
    int classes = 4;
    int frames = 12; // T
    int height = 32;
    int width = 32;
    int patch = 8;
    int planted_count = 16;
    double noise_std = 0.1;
    int train_size = 2000;
    int val_size = 500;
    int test_size = 500;

    int patches_per_frame() const { return (height / patch) * (width / patch); }
    int token_count() const { return patches_per_frame() * frames; }
    void validate() const;
};

// One generated video: frames, its label, and the coordinates of the tokens
// that determine the label (the recall oracle).
struct SyntheticVideo {
    Tensor frames; // [T x H x W x 3]
    int label = 0;
    std::vector<std::pair<int, int>> planted; // (t, s)
    uint64_t seed = 0;

    std::vector<int> planted_token_indices(int s_extent) const;
};

struct Dataset {
    TaskSpec spec;
    std::vector<SyntheticVideo> train;
    std::vector<SyntheticVideo> val;
    std::vector<SyntheticVideo> test;
};

// Background patches are i.i.d. noise; planted patches carry one of `classes`
// fixed orthogonal patterns plus noise; the label is the majority pattern.
Dataset gen_sparse_token_task(const TaskSpec& spec, Rng& rng);

// The label pairs a first-frame pattern with a last-frame pattern; middle
// frames are pure noise, so truncated inputs provably lose the signal.
Dataset gen_long_range_task(const TaskSpec& spec, Rng& rng);

Dataset gen_task(const TaskSpec& spec, Rng& rng);

// Generates a single sparse-token video with a longer frame count; used by
// pretraining, where clips are cut from longer sequences.
SyntheticVideo gen_sparse_video(const TaskSpec& spec, int frames, uint64_t seed);

// Fraction of planted tokens found in `selected` (ascending token indices).
double informative_recall(const SyntheticVideo& video, const std::vector<int>& selected,
                          int s_extent);

// Binary dataset file: magic "S5DS", version, spec block, then per-sample
// label, planted coords and little-endian f64 frame data.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace s5
