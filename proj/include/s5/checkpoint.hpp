#pragma once

#include <map>
#include <string>
#include <vector>

#include "s5/optim.hpp"
#include "s5/tensor.hpp"

namespace s5 {

// Header metadata carried by every checkpoint next to the parameter table.
struct CheckpointMeta {
    std::string mode; // "classifier" or "pretrain"
    std::string config_echo;
    int next_epoch = 0;
    int64_t optimizer_steps = 0;
    double lr = 0.0;
    double plateau_best = 0.0;
    int plateau_bad_epochs = 0;
};

struct Checkpoint {
    CheckpointMeta meta;
    std::vector<std::pair<std::string, Tensor>> params; // insertion order preserved
    std::map<std::string, AdamW::Moments> moments;

    const Tensor* find(const std::string& name) const;
};

// Binary layout: magic "S5CK", version, meta block, named parameter table
// (name, ndim, dims, f64 little-endian values), optimizer moment table.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint parameters into the visited tensors by exact name; every
// name must appear on both sides with matching shape, otherwise a
// CheckpointError describes the first offender.
class ParamTable {
  public:
    void put(const std::string& name, Tensor* slot) { slots_.emplace_back(name, slot); }
    const std::vector<std::pair<std::string, Tensor*>>& slots() const { return slots_; }

    void load_from(const Checkpoint& ckpt) const;
    std::vector<std::pair<std::string, Tensor>> snapshot() const;

  private:
    std::vector<std::pair<std::string, Tensor*>> slots_;
};

} // namespace s5
