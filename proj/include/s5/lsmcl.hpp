#pragma once

#include <string>
#include <utility>
#include <vector>

#include "s5/model.hpp"
#include "s5/optim.hpp"

namespace s5 {

// A long clip and a contained short clip cut from one video with strides
// tau_long > tau_short, plus the per-clip random masks (kept token indices).
struct ClipPair {
    Tensor long_frames;  // [T_clip x H x W x 3], stride tau_long
    Tensor short_frames; // [T_clip x H x W x 3], stride tau_short
    int long_start = 0;
    int short_start = 0;
    int tau_long = 0;
    int tau_short = 0;
    std::vector<int> mask_long;  // ascending kept indices, |.| = round((1-eta)*ST)
    std::vector<int> mask_short;
};

// Uniformly places the long clip, then the short clip inside the long clip's
// temporal span. Requires video length >= clip_frames * tau_long.
ClipPair sample_long_short(const Tensor& video, int clip_frames, int tau_long,
                           int tau_short, Rng& rng);

// round((1-eta)*st) kept positions, ascending.
std::vector<int> random_mask_indices(int st, double eta, Rng& rng);

// Spec-shaped convenience: kept token rows plus the kept index set.
std::pair<Tensor, std::vector<int>> random_mask(const TokenGrid& grid, double eta,
                                                Rng& rng);

// Batched InfoNCE at temperature rho with in-batch negatives; the key matrix
// is treated as constant (no gradient into the key branch).
Tensor info_nce(const Tensor& q, const Tensor& k, double rho);

// One projection/prediction layer: linear + BN (+ optional ReLU).
struct MlpLayer {
    LinearParams lin;
    Tensor bn_gamma;
    Tensor bn_beta;
    BatchNormState bn;
    bool relu_after = false;
    void visit(const std::string& prefix, const ParamVisitor& v, bool trainable = true);
};

struct MlpHead {
    std::vector<MlpLayer> layers;
    Tensor forward(const Tensor& x, bool train);
    void visit(const std::string& prefix, const ParamVisitor& v, bool trainable = true);
};

MlpHead init_projection(int in, int hidden, int out, Rng& rng); // 3 layers
MlpHead init_prediction(int dim, int hidden, Rng& rng);         // 2 layers

// Query/key encoder: backbone + projection (+ prediction on the query side).
struct ContrastiveEncoder {
    BackboneParams backbone;
    MlpHead projection;
    MlpHead prediction;
    bool has_prediction = false;
    int patch = 8;
    void visit(const std::string& prefix, const ParamVisitor& v, bool trainable = true);
};

struct ContrastiveHeads {
    ContrastiveEncoder q;
    ContrastiveEncoder k; // mirror of q minus the prediction head; never trained
    double m_key = 0.99;
};

ContrastiveHeads init_contrastive(const TrainConfig& cfg, Rng& rng);

// Backbone feature of one masked clip: tokenize, keep the masked-in rows,
// run the decoder stack, mean-pool.
Tensor encoder_backbone_feature(const ContrastiveEncoder& enc, const Tensor& clip,
                                const std::vector<int>& kept, bool train,
                                Rng& rng_dropout);

// theta_k <- m*theta_k + (1-m)*theta_q over backbone + projection (BN running
// stats included).
void momentum_update_key(ContrastiveHeads& heads);

struct LsmclStepStats {
    double loss = 0.0;
    double positive_similarity = 0.0;
    double negative_similarity = 0.0;
};

// One symmetrized optimization step:
// loss = 0.5*[nce(q(short), k(long)) + nce(q(long), k(short))], AdamW on the
// query side, then the momentum update of the key encoder.
LsmclStepStats lsmcl_step(ContrastiveHeads& heads, const std::vector<ClipPair>& batch,
                          double rho, AdamW& opt, Rng& rng_dropout);

// Copies the pretrained query backbone into a classifier for fine-tuning.
void transfer_init(ContrastiveEncoder& pretrained_q, S5Classifier& model);

} // namespace s5
