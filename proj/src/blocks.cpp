#include "s5/blocks.hpp"

#include <cmath>

namespace s5 {

void LinearParams::visit(const std::string& prefix, const ParamVisitor& v) {
    v(prefix + "w", w, true);
    v(prefix + "b", b, true);
}

Tensor linear(const LinearParams& p, const Tensor& x) {
    return add(matmul(x, p.w), p.b);
}

void LayerNormParams::visit(const std::string& prefix, const ParamVisitor& v) {
    v(prefix + "gamma", gamma, true);
    v(prefix + "beta", beta, true);
}

Tensor apply_layer_norm(const LayerNormParams& p, const Tensor& x) {
    return layer_norm(x, p.gamma, p.beta, p.eps);
}

void PositionalEncodings::visit(const std::string& prefix, const ParamVisitor& v) {
    v(prefix + "e_s", e_s, true);
    v(prefix + "e_t", e_t, true);
}

void DecoderBlockParams::visit(const std::string& prefix, const ParamVisitor& v) {
    ln.visit(prefix + "ln.", v);
    s4.visit(prefix + "s4.", v);
    mlp.visit(prefix + "mlp.", v);
    skip.visit(prefix + "skip.", v);
}

Tensor extract_patches(const Tensor& frames, int patch) {
    if (frames.ndim() != 4 || frames.dim(3) != 3) {
        throw ShapeError("extract_patches: expected frames[TxHxWx3]");
    }
    const int t = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
    if (patch < 1 || h % patch != 0 || w % patch != 0) {
        throw ShapeError("extract_patches: H and W must be divisible by the patch size");
    }
    const int gy = h / patch, gx = w / patch;
    const int s = gy * gx;
    const int raw = patch * patch * 3;
    const std::vector<double>& fv = frames.values();
    std::vector<double> out(static_cast<size_t>(t) * s * raw);
    size_t row = 0;
    for (int ti = 0; ti < t; ++ti) {
        for (int py = 0; py < gy; ++py) {
            for (int px = 0; px < gx; ++px) {
                double* dst = &out[row * raw];
                for (int y = 0; y < patch; ++y) {
                    const int iy = py * patch + y;
                    const size_t base =
                        ((static_cast<size_t>(ti) * h + iy) * w + static_cast<size_t>(px) * patch) * 3;
                    for (int x = 0; x < patch * 3; ++x) {
                        dst[y * patch * 3 + x] = fv[base + static_cast<size_t>(x)];
                    }
                }
                ++row;
            }
        }
    }
    return make_tensor({t * s, raw}, std::move(out));
}

TokenGrid tokenize(const Tensor& frames, int patch, const LinearParams& embed,
                   const PositionalEncodings& enc) {
    Tensor raw = extract_patches(frames, patch);
    const int t = frames.dim(0);
    const int s = raw.dim(0) / t;
    if (enc.e_s.dim(0) != s || enc.e_t.dim(0) != t) {
        throw ShapeError("tokenize: positional tables do not match the (S, T) grid");
    }
    Tensor z = linear(embed, raw);
    TokenGrid grid;
    grid.tokens = add_positional(z, enc.e_s, enc.e_t);
    grid.s = s;
    grid.t = t;
    return grid;
}

Tensor decoder_block(const DecoderBlockParams& params, const Tensor& x, bool train,
                     Rng& rng) {
    S4Kernel kernel = materialize_kernel(params.s4, x.dim(0));
    return decoder_block_with_kernel(params, kernel, x, train, rng);
}

Tensor decoder_block_with_kernel(const DecoderBlockParams& params, const S4Kernel& kernel,
                                 const Tensor& x, bool train, Rng& rng) {
    Tensor x_s4 = fft_conv(apply_layer_norm(params.ln, x), kernel);
    Tensor x_mlp = dropout(gelu(linear(params.mlp, pool(x_s4, params.pool_stride))),
                           params.dropout_p, rng, train);
    Tensor x_skip = linear(params.skip, pool(x, params.pool_stride));
    return add(x_skip, x_mlp);
}

Tensor backbone_forward(const std::vector<DecoderBlockParams>& blocks,
                        const TokenGrid& grid, bool train, Rng& rng) {
    Tensor x = grid.tokens;
    for (const DecoderBlockParams& block : blocks) {
        if (x.dim(1) != block.width()) {
            throw ShapeError("backbone_forward: block widths do not chain");
        }
        x = decoder_block(block, x, train, rng);
    }
    return mean_axis(x, 0);
}

Tensor classify(const Tensor& feature, const LinearParams& head) {
    Tensor f = feature.ndim() == 1 ? feature.reshaped({1, feature.dim(0)}) : feature;
    if (f.dim(1) != head.in_dim()) {
        throw ShapeError("classify: feature width does not match the head");
    }
    return linear(head, f).reshaped({head.out_dim()});
}

LinearParams init_linear(int in, int out, Rng& rng) {
    std::vector<double> w(static_cast<size_t>(in) * out);
    const double scl = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w) v = rng.normal() * scl;
    LinearParams p;
    p.w = Tensor::from_data({in, out}, std::move(w));
    p.b = Tensor::zeros({out});
    return p;
}

LayerNormParams init_layer_norm(int d) {
    LayerNormParams p;
    p.gamma = Tensor::full({d}, 1.0);
    p.beta = Tensor::zeros({d});
    return p;
}

PositionalEncodings init_positional(int s, int t, int d, Rng& rng) {
    PositionalEncodings enc;
    std::vector<double> es(static_cast<size_t>(s) * d);
    std::vector<double> et(static_cast<size_t>(t) * d);
    for (double& v : es) v = rng.normal() * 0.02;
    for (double& v : et) v = rng.normal() * 0.02;
    enc.e_s = Tensor::from_data({s, d}, std::move(es));
    enc.e_t = Tensor::from_data({t, d}, std::move(et));
    return enc;
}

DecoderBlockParams init_decoder_block(int width, int state_dim, int pool_stride,
                                      double dropout_p, Rng& rng) {
    if (width % 2 != 0) {
        throw ArgError("init_decoder_block: width must be even");
    }
    DecoderBlockParams p;
    p.ln = init_layer_norm(width);
    Rng s4_rng = rng.split(1);
    p.s4 = init_ssm_params(state_dim, width, s4_rng);
    p.pool_stride = pool_stride;
    Rng mlp_rng = rng.split(2);
    p.mlp = init_linear(width, width / 2, mlp_rng);
    Rng skip_rng = rng.split(3);
    p.skip = init_linear(width, width / 2, skip_rng);
    p.dropout_p = dropout_p;
    return p;
}

} // namespace s5
