#pragma once

#include <string>
#include <vector>

#include "s5/blocks.hpp"

namespace s5 {

// Per-token linear scorer; softmax over all S*T positions gives the selection
// distribution.
struct MaskGenerator {
    LinearParams score;      // [D x 1]
    double gumbel_temp = 1.0; // rho_g
    double eps = 1e-10;
    void visit(const std::string& prefix, const ParamVisitor& v);
};

// Gradient-free shadow of the first block's LN + S4, tracked as a moving
// average of the main parameters.
struct MomentumS4 {
    LayerNormParams ln;
    SsmLayerParams s4;
    double momentum = 0.01; // m_s4
    void visit(const std::string& prefix, const ParamVisitor& v);
};

// The K chosen tokens plus everything the straight-through backward needs.
struct SelectionResult {
    std::vector<int> indices; // ascending, exactly K distinct entries
    Tensor onehots;           // [K x ST], row k one-hot at indices[k]
    Tensor probs;             // [ST] selection distribution (values only)
    Tensor perturbed;         // [ST] log p + g used for the ranking
    int k() const { return static_cast<int>(indices.size()); }
};

// Elementwise dst <- m*dst + (1-m)*src; shapes must agree.
void momentum_blend(Tensor& dst, const Tensor& src, double m);

// Applies the moving-average update against the main first block. Called once
// per optimizer step.
void momentum_update(MomentumS4& shadow, const DecoderBlockParams& main_block);

// Builds a fresh shadow from the main block (used at init).
MomentumS4 make_shadow(const DecoderBlockParams& main_block, double momentum);

// Shadow forward pass, never recorded on a tape.
Tensor shadow_features(const MomentumS4& shadow, const Tensor& tokens);
Tensor shadow_features_with_kernel(const MomentumS4& shadow, const S4Kernel& kernel,
                                   const Tensor& tokens);

// Softmax over per-token linear scores; sums to 1 across the token axis.
Tensor mask_probs(const MaskGenerator& mg, const Tensor& x_s4);

// Samples K tokens without replacement by ranking log p + Gumbel noise
// (g = -log(-log(u+eps)+eps)). `deterministic` switches to noise-free top-K
// for reproducible evaluation.
SelectionResult gumbel_topk(const Tensor& probs, int k, Rng& rng, double eps = 1e-10,
                            bool deterministic = false);

// Relaxed selector softmax(perturbed/rho) and its VJP onto log-probabilities:
// the backward rule of the straight-through estimator.
std::vector<double> st_relaxed(const std::vector<double>& perturbed, double rho);
std::vector<double> st_gradient(const std::vector<double>& perturbed, double rho,
                                const std::vector<double>& upstream);

// Plain ordered gather; forward values bit-identical to the source rows.
Tensor select_tokens(const Tensor& x, const SelectionResult& sel);

// Straight-through gather: forward uses the hard one-hot rows; backward sends
// the selected-row gradients to x and the relaxed-softmax gradients into logp.
Tensor select_tokens_st(const Tensor& x, const Tensor& logp, const SelectionResult& sel,
                        double rho);

enum class SelectorKind { none, random_mask, linear, linear_s4 };

SelectorKind selector_from_string(const std::string& s);
std::string selector_to_string(SelectorKind k);

// Tokens kept by the selector: max(1, round((1-eta)*ST)).
int kept_token_count(int st, double eta);

struct S5BlockStats {
    SelectionResult selection;
    int kept_tokens = 0;
    int64_t main_path_alloc_bytes = 0;
};

struct S5BlockOptions {
    double eta = 0.5;
    SelectorKind selector = SelectorKind::linear_s4;
    bool train = false;
    bool deterministic_topk = false;
    // Optional pre-materialized kernels (per-step reuse).
    const S4Kernel* shadow_kernel = nullptr;
    const S4Kernel* block_kernel = nullptr;
};

// Full first-block pipeline: shadow S4 features -> mask probabilities ->
// Gumbel-top-K -> straight-through gather -> decoder block on the kept tokens.
// Selection noise and dropout draw from separate generators so selector
// variants stay bit-comparable.
Tensor s5_block_forward(const DecoderBlockParams& block, const MomentumS4& shadow,
                        const MaskGenerator& mg, const TokenGrid& grid,
                        const S5BlockOptions& opts, Rng& rng_gumbel, Rng& rng_dropout,
                        S5BlockStats* stats = nullptr);

} // namespace s5
