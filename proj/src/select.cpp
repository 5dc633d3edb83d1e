#include "s5/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s5/mem.hpp"

namespace s5 {

void MaskGenerator::visit(const std::string& prefix, const ParamVisitor& v) {
    score.visit(prefix + "score.", v);
}

void MomentumS4::visit(const std::string& prefix, const ParamVisitor& v) {
    ParamVisitor frozen = [&v](const std::string& name, Tensor& t, bool) {
        v(name, t, false);
    };
    ln.visit(prefix + "ln.", frozen);
    s4.visit(prefix + "s4.", frozen);
}

void momentum_blend(Tensor& dst, const Tensor& src, double m) {
    if (dst.dims() != src.dims()) {
        throw CheckpointError("momentum update: shape mismatch");
    }
    const std::vector<double>& dv = dst.values();
    const std::vector<double>& sv = src.values();
    std::vector<double> out(dv.size());
    for (size_t i = 0; i < dv.size(); ++i) {
        out[i] = m * dv[i] + (1.0 - m) * sv[i];
    }
    dst = make_tensor(dst.dims(), std::move(out));
}

void momentum_update(MomentumS4& shadow, const DecoderBlockParams& main_block) {
    const double m = shadow.momentum;
    momentum_blend(shadow.ln.gamma, main_block.ln.gamma, m);
    momentum_blend(shadow.ln.beta, main_block.ln.beta, m);
    momentum_blend(shadow.s4.a, main_block.s4.a, m);
    momentum_blend(shadow.s4.b_in, main_block.s4.b_in, m);
    momentum_blend(shadow.s4.c_out, main_block.s4.c_out, m);
    momentum_blend(shadow.s4.log_delta, main_block.s4.log_delta, m);
}

MomentumS4 make_shadow(const DecoderBlockParams& main_block, double momentum) {
    MomentumS4 shadow;
    shadow.ln.gamma = main_block.ln.gamma.detached();
    shadow.ln.beta = main_block.ln.beta.detached();
    shadow.ln.eps = main_block.ln.eps;
    shadow.s4.a = main_block.s4.a.detached();
    shadow.s4.b_in = main_block.s4.b_in.detached();
    shadow.s4.c_out = main_block.s4.c_out.detached();
    shadow.s4.log_delta = main_block.s4.log_delta.detached();
    shadow.momentum = momentum;
    return shadow;
}

Tensor shadow_features(const MomentumS4& shadow, const Tensor& tokens) {
    NoTapeScope guard;
    return s4_forward(shadow.s4, apply_layer_norm(shadow.ln, tokens.detached()));
}

Tensor shadow_features_with_kernel(const MomentumS4& shadow, const S4Kernel& kernel,
                                   const Tensor& tokens) {
    NoTapeScope guard;
    return fft_conv(apply_layer_norm(shadow.ln, tokens.detached()), kernel);
}

Tensor mask_probs(const MaskGenerator& mg, const Tensor& x_s4) {
    if (x_s4.ndim() != 2 || x_s4.dim(1) != mg.score.in_dim()) {
        throw ShapeError("mask_probs: feature width does not match the mask generator");
    }
    Tensor scores = linear(mg.score, x_s4).reshaped({x_s4.dim(0)});
    return softmax(scores);
}

SelectionResult gumbel_topk(const Tensor& probs, int k, Rng& rng, double eps,
                            bool deterministic) {
    const int st = static_cast<int>(probs.size());
    if (k < 1 || k > st) {
        throw ArgError("gumbel_topk: K must lie in [1, ST]");
    }
    const std::vector<double>& p = probs.values();
    double total = 0.0;
    for (double v : p) {
        if (v < 0.0) {
            throw ArgError("gumbel_topk: probabilities must be non-negative");
        }
        total += v;
    }
    if (std::fabs(total - 1.0) > 1e-6) {
        throw ArgError("gumbel_topk: probabilities must sum to 1");
    }

    std::vector<double> perturbed(static_cast<size_t>(st));
    for (int i = 0; i < st; ++i) {
        double noise = 0.0;
        if (!deterministic) {
            const double u = rng.uniform();
            noise = -std::log(-std::log(u + eps) + eps);
        }
        perturbed[static_cast<size_t>(i)] = std::log(p[static_cast<size_t>(i)] + eps) + noise;
    }

    std::vector<int> order(static_cast<size_t>(st));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&perturbed](int lhs, int rhs) {
                          if (perturbed[static_cast<size_t>(lhs)] !=
                              perturbed[static_cast<size_t>(rhs)]) {
                              return perturbed[static_cast<size_t>(lhs)] >
                                     perturbed[static_cast<size_t>(rhs)];
                          }
                          return lhs < rhs;
                      });
    SelectionResult sel;
    sel.indices.assign(order.begin(), order.begin() + k);
    std::sort(sel.indices.begin(), sel.indices.end());

    std::vector<double> onehots(static_cast<size_t>(k) * st, 0.0);
    for (int row = 0; row < k; ++row) {
        onehots[static_cast<size_t>(row) * st + sel.indices[static_cast<size_t>(row)]] = 1.0;
    }
    sel.onehots = make_tensor({k, st}, std::move(onehots));
    sel.probs = probs.detached();
    sel.perturbed = make_tensor({st}, std::move(perturbed));
    return sel;
}

std::vector<double> st_relaxed(const std::vector<double>& perturbed, double rho) {
    if (rho <= 0.0) {
        throw ArgError("st_relaxed: rho must be positive");
    }
    std::vector<double> r(perturbed.size());
    double mx = perturbed[0];
    for (double v : perturbed) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < perturbed.size(); ++i) {
        r[i] = std::exp((perturbed[i] - mx) / rho);
        sum += r[i];
    }
    for (double& v : r) v /= sum;
    return r;
}

std::vector<double> st_gradient(const std::vector<double>& perturbed, double rho,
                                const std::vector<double>& upstream) {
    if (upstream.size() != perturbed.size()) {
        throw ShapeError("st_gradient: upstream size mismatch");
    }
    std::vector<double> r = st_relaxed(perturbed, rho);
    double ra = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        ra += r[i] * upstream[i];
    }
    std::vector<double> out(r.size());
    for (size_t i = 0; i < r.size(); ++i) {
        out[i] = r[i] * (upstream[i] - ra) / rho;
    }
    return out;
}

Tensor select_tokens(const Tensor& x, const SelectionResult& sel) {
    if (x.ndim() != 2 || x.dim(0) != static_cast<int>(sel.probs.size())) {
        throw ShapeError("select_tokens: selection does not match the token grid");
    }
    return gather_rows(x, sel.indices);
}

Tensor select_tokens_st(const Tensor& x, const Tensor& logp, const SelectionResult& sel,
                        double rho) {
    if (x.ndim() != 2) {
        throw ShapeError("select_tokens_st: expected tokens[STxD]");
    }
    const int st = x.dim(0), d = x.dim(1);
    if (logp.size() != st) {
        throw ShapeError("select_tokens_st: log-probability length mismatch");
    }
    const int k = sel.k();
    const std::vector<double>& xv = x.values();
    std::vector<double> out(static_cast<size_t>(k) * d);
    for (int row = 0; row < k; ++row) {
        const int src = sel.indices[static_cast<size_t>(row)];
        std::copy_n(&xv[static_cast<size_t>(src) * d], d, &out[static_cast<size_t>(row) * d]);
    }
    Tensor result = make_tensor({k, d}, std::move(out));
    Tape* tp = Tape::active();
    const bool x_on = x.on(tp);
    const bool p_on = logp.on(tp);
    if (tp && (x_on || p_on)) {
        std::vector<int> ins;
        if (x_on) ins.push_back(x.node());
        if (p_on) ins.push_back(logp.node());
        std::vector<int> indices = sel.indices;
        Tensor perturbed = sel.perturbed;
        int id = tp->record(
            result.size(), std::move(ins),
            [x, logp, perturbed, indices, rho, st, d, x_on, p_on](
                Tape& t, const std::vector<double>& g) {
                if (x_on) {
                    // Hard path: only the gathered rows receive gradient.
                    for (size_t row = 0; row < indices.size(); ++row) {
                        t.accumulate_at(x.node(),
                                        static_cast<int64_t>(indices[row]) * d,
                                        &g[row * static_cast<size_t>(d)], d);
                    }
                }
                if (p_on) {
                    // Soft path: each selected token contributes through the
                    // relaxed softmax of (log p + g)/rho.
                    const std::vector<double>& xv2 = x.values();
                    std::vector<double> dlogp(static_cast<size_t>(st), 0.0);
                    std::vector<double> upstream(static_cast<size_t>(st));
                    for (size_t row = 0; row < indices.size(); ++row) {
                        const double* grow = &g[row * static_cast<size_t>(d)];
                        for (int i = 0; i < st; ++i) {
                            double s = 0.0;
                            const double* xrow = &xv2[static_cast<size_t>(i) * d];
                            for (int j = 0; j < d; ++j) {
                                s += grow[j] * xrow[j];
                            }
                            upstream[static_cast<size_t>(i)] = s;
                        }
                        std::vector<double> contrib =
                            st_gradient(perturbed.values(), rho, upstream);
                        for (int i = 0; i < st; ++i) {
                            dlogp[static_cast<size_t>(i)] += contrib[static_cast<size_t>(i)];
                        }
                    }
                    t.accumulate(logp.node(), dlogp);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

SelectorKind selector_from_string(const std::string& s) {
    if (s == "none") return SelectorKind::none;
    if (s == "random") return SelectorKind::random_mask;
    if (s == "linear") return SelectorKind::linear;
    if (s == "linear_s4") return SelectorKind::linear_s4;
    throw ConfigError("unknown selector '" + s + "' (expected none|random|linear|linear_s4)");
}

std::string selector_to_string(SelectorKind k) {
    switch (k) {
    case SelectorKind::none: return "none";
    case SelectorKind::random_mask: return "random";
    case SelectorKind::linear: return "linear";
    default: return "linear_s4";
    }
}

int kept_token_count(int st, double eta) {
    if (eta < 0.0 || eta >= 1.0) {
        throw ArgError("masking ratio must lie in [0, 1)");
    }
    int k = static_cast<int>(std::llround((1.0 - eta) * st));
    return std::max(1, k);
}

Tensor s5_block_forward(const DecoderBlockParams& block, const MomentumS4& shadow,
                        const MaskGenerator& mg, const TokenGrid& grid,
                        const S5BlockOptions& opts, Rng& rng_gumbel, Rng& rng_dropout,
                        S5BlockStats* stats) {
    const Tensor& tokens = grid.tokens;
    const int st = tokens.dim(0);
    const int k = kept_token_count(st, opts.eta);

    Tensor kept;
    SelectionResult sel;
    if (opts.selector == SelectorKind::none) {
        kept = tokens;
    } else if (opts.selector == SelectorKind::random_mask) {
        Tensor uniform = Tensor::full({st}, 1.0 / st);
        sel = gumbel_topk(uniform, k, rng_gumbel, mg.eps, opts.deterministic_topk);
        kept = select_tokens(tokens, sel);
    } else {
        Tensor features;
        if (opts.selector == SelectorKind::linear_s4) {
            features = opts.shadow_kernel
                           ? shadow_features_with_kernel(shadow, *opts.shadow_kernel, tokens)
                           : shadow_features(shadow, tokens);
        } else {
            features = tokens.detached();
        }
        Tensor probs = mask_probs(mg, features);
        sel = gumbel_topk(probs.detached(), k, rng_gumbel, mg.eps, opts.deterministic_topk);
        Tensor logp = log(probs);
        kept = select_tokens_st(tokens, logp, sel, mg.gumbel_temp);
    }

    if (stats) {
        stats->selection = sel;
        stats->kept_tokens = kept.dim(0);
    }
    mem::AllocScope main_path;
    Tensor out = opts.block_kernel ? decoder_block_with_kernel(block, *opts.block_kernel,
                                                               kept, opts.train, rng_dropout)
                                   : decoder_block(block, kept, opts.train, rng_dropout);
    if (stats) {
        stats->main_path_alloc_bytes = main_path.allocated();
    }
    return out;
}

} // namespace s5
