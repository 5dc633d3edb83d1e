#pragma once

#include <string>
#include <vector>

#include "s5/config.hpp"
#include "s5/select.hpp"

namespace s5 {

struct BackboneParams {
    LinearParams embed;
    PositionalEncodings pos;
    std::vector<DecoderBlockParams> blocks;
    void visit(const std::string& prefix, const ParamVisitor& v);
    int final_width() const;
};

// Classifier: tokenizer + (optionally selective) first block + plain decoder
// blocks + linear head. The shadow mirrors the first block's LN and S4.
struct S5Classifier {
    BackboneParams backbone;
    LinearParams head;
    MaskGenerator mg;
    MomentumS4 shadow;
    int patch = 8;

    void visit(const ParamVisitor& v);          // everything, shadow marked frozen
    void visit_trainable(const ParamVisitor& v); // backbone + head + mg
};

S5Classifier init_classifier(const TrainConfig& cfg, Rng& rng);

// Kernels materialized once per optimizer step: the main-block kernels are
// recorded on the active tape (parameters must be watched first), the shadow
// kernel never is.
struct StepKernels {
    S4Kernel shadow;
    std::vector<S4Kernel> blocks;
};

// Sequence lengths seen by each block's S4 stage when the first block keeps
// `kept` of `st` tokens.
std::vector<int> block_sequence_lengths(int st, int kept,
                                        const std::vector<DecoderBlockParams>& blocks);

StepKernels prepare_step_kernels(const S5Classifier& model, int st, int kept);

struct ForwardOptions {
    double eta = 0.5;
    SelectorKind selector = SelectorKind::linear_s4;
    bool train = false;
    bool deterministic_topk = false;
    double rho_g = 1.0;
    const StepKernels* kernels = nullptr;
};

// frames[TxHxWx3] -> logits[classes]. `rng_gumbel` drives the selection noise,
// `rng_dropout` the dropout masks; keeping the streams apart makes an eta=0
// selective run bit-identical to the selector-free baseline.
Tensor classifier_forward(const S5Classifier& model, const Tensor& frames,
                          const ForwardOptions& opts, Rng& rng_gumbel, Rng& rng_dropout,
                          S5BlockStats* stats = nullptr);

} // namespace s5
