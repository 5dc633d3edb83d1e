#pragma once

#include <string>
#include <vector>

#include "s5/s4.hpp"

namespace s5 {

struct LinearParams {
    Tensor w; // [in x out]
    Tensor b; // [out]
    int in_dim() const { return w.dim(0); }
    int out_dim() const { return w.dim(1); }
    void visit(const std::string& prefix, const ParamVisitor& v);
};

// y = x*w + b for x[R x in].
Tensor linear(const LinearParams& p, const Tensor& x);

struct LayerNormParams {
    Tensor gamma; // [D]
    Tensor beta;  // [D]
    double eps = 1e-5;
    void visit(const std::string& prefix, const ParamVisitor& v);
};

Tensor apply_layer_norm(const LayerNormParams& p, const Tensor& x);

// Learnable spatial/temporal position tables added to every patch embedding.
struct PositionalEncodings {
    Tensor e_s; // [S x D]
    Tensor e_t; // [T x D]
    void visit(const std::string& prefix, const ParamVisitor& v);
};

// S*T patch embeddings flattened t-major, s-minor: row r <-> (t = r / S, s = r % S).
struct TokenGrid {
    Tensor tokens; // [(S*T) x D]
    int s = 0;
    int t = 0;
    int rows() const { return s * t; }
    static int row_index(int t_idx, int s_idx, int s_extent) { return t_idx * s_extent + s_idx; }
};

// Decoder block: LN -> S4 -> pool -> MLP, summed with a pooled linear skip.
// The MLP (linear, GELU, dropout) and the skip both halve the channel width.
struct DecoderBlockParams {
    LayerNormParams ln;
    SsmLayerParams s4;
    int pool_stride = 2;
    LinearParams mlp;  // [D x D/2]
    LinearParams skip; // [D x D/2]
    double dropout_p = 0.2;
    int width() const { return mlp.in_dim(); }
    void visit(const std::string& prefix, const ParamVisitor& v);
};

// Flattens each patch (py, px, channel row-major), one row per (t, s).
Tensor extract_patches(const Tensor& frames, int patch);

// Patch -> linear embedding -> spatial + temporal encodings.
TokenGrid tokenize(const Tensor& frames, int patch, const LinearParams& embed,
                   const PositionalEncodings& enc);

Tensor decoder_block(const DecoderBlockParams& params, const Tensor& x, bool train,
                     Rng& rng);

// Same dataflow with a pre-materialized kernel for the S4 stage.
Tensor decoder_block_with_kernel(const DecoderBlockParams& params, const S4Kernel& kernel,
                                 const Tensor& x, bool train, Rng& rng);

// Stacked decoder blocks, then a mean over the remaining positions.
Tensor backbone_forward(const std::vector<DecoderBlockParams>& blocks,
                        const TokenGrid& grid, bool train, Rng& rng);

Tensor classify(const Tensor& feature, const LinearParams& head);

// Initializers. Weights are scaled normal draws; encodings start small.
LinearParams init_linear(int in, int out, Rng& rng);
LayerNormParams init_layer_norm(int d);
PositionalEncodings init_positional(int s, int t, int d, Rng& rng);
DecoderBlockParams init_decoder_block(int width, int state_dim, int pool_stride,
                                      double dropout_p, Rng& rng);

} // namespace s5
