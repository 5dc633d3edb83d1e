#include "s5/s4.hpp"

#include <cmath>

#include "s5/fft.hpp"

namespace s5 {

void SsmLayerParams::visit(const std::string& prefix, const ParamVisitor& v) {
    v(prefix + "A", a, true);
    v(prefix + "B", b_in, true);
    v(prefix + "C", c_out, true);
    v(prefix + "log_delta", log_delta, true);
}

Tensor hippo_init(int n) {
    if (n < 1) {
        throw ArgError("hippo_init: N must be >= 1");
    }
    std::vector<double> a(static_cast<size_t>(n) * n, 0.0);
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col <= row; ++col) {
            double v;
            if (row == col) {
                v = -(row + 1.0);
            } else {
                v = -std::sqrt(2.0 * row + 1.0) * std::sqrt(2.0 * col + 1.0);
            }
            a[static_cast<size_t>(row) * n + col] = v;
        }
    }
    return Tensor::from_data({n, n}, std::move(a));
}

std::pair<Tensor, Tensor> discretize(const Tensor& a, const Tensor& b,
                                     const Tensor& delta) {
    if (a.ndim() != 2 || a.dim(0) != a.dim(1)) {
        throw ShapeError("discretize: A must be square");
    }
    const int n = a.dim(0);
    if (b.size() != n) {
        throw ShapeError("discretize: B must be an N-vector");
    }
    if (delta.size() != 1 || delta.item() <= 0.0) {
        throw ArgError("discretize: delta must be a positive scalar");
    }
    Tensor half_da = scale(mul(a, delta), 0.5); // delta*A/2
    Tensor ident = Tensor::eye(n);
    Tensor m_minus = sub(ident, half_da);
    Tensor m_plus = add(ident, half_da);
    Tensor abar;
    Tensor bbar;
    try {
        abar = linear_solve(m_minus, m_plus);
        bbar = linear_solve(m_minus, mul(b.reshaped({n, 1}), delta));
    } catch (const NumericalError&) {
        throw NumericalError("discretize: (I - delta*A/2) is singular for delta=" +
                             std::to_string(delta.item()) + ", N=" + std::to_string(n));
    }
    return {abar, bbar.reshaped({n})};
}

S4Kernel materialize_kernel(const SsmLayerParams& params, int len) {
    if (len < 1) {
        throw ArgError("materialize_kernel: L must be >= 1");
    }
    const int d = params.channels();
    const int n = params.state_dim();
    Tensor deltas = exp(params.log_delta); // [D], positive by construction
    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(d));
    for (int ch = 0; ch < d; ++ch) {
        Tensor delta_ch = gather_rows(deltas, {ch});
        Tensor b_ch = gather_rows(params.b_in, {ch}).reshaped({n});
        Tensor c_ch = gather_rows(params.c_out, {ch}).reshaped({n});
        auto [abar, bbar] = discretize(params.a, b_ch, delta_ch);
        Tensor v = bbar.reshaped({n, 1});
        std::vector<Tensor> taps;
        taps.reserve(static_cast<size_t>(len));
        for (int i = 0; i < len; ++i) {
            taps.push_back(dot(c_ch, v));
            if (i + 1 < len) {
                v = matmul(abar, v);
            }
        }
        rows.push_back(concat(taps, 0).reshaped({1, len}));
    }
    S4Kernel kernel{concat(rows, 0)};
    const std::vector<double>& kv = kernel.kbar.values();
    for (int ch = 0; ch < d; ++ch) {
        for (int i = 0; i < len; ++i) {
            if (!std::isfinite(kv[static_cast<size_t>(ch) * len + i])) {
                throw NumericalError("materialize_kernel: non-finite entry at channel " +
                                     std::to_string(ch) + ", index " + std::to_string(i));
            }
        }
    }
    return kernel;
}

Tensor fft_conv(const Tensor& u, const S4Kernel& kernel) {
    if (u.ndim() != 2) {
        throw ShapeError("fft_conv: expected u[LxD]");
    }
    const int l = u.dim(0), d = u.dim(1);
    if (kernel.length() != l || kernel.channels() != d) {
        throw ShapeError("fft_conv: kernel length/channels must match the input");
    }
    const Tensor& kbar = kernel.kbar;
    const std::vector<double>& uv = u.values();
    const std::vector<double>& kv = kbar.values();
    std::vector<double> out(static_cast<size_t>(l) * d);
    std::vector<double> ucol(static_cast<size_t>(l));
    std::vector<double> krow(static_cast<size_t>(l));
    for (int ch = 0; ch < d; ++ch) {
        for (int i = 0; i < l; ++i) {
            ucol[static_cast<size_t>(i)] = uv[static_cast<size_t>(i) * d + ch];
            krow[static_cast<size_t>(i)] = kv[static_cast<size_t>(ch) * l + i];
        }
        std::vector<double> y = fft_causal_conv(krow, ucol);
        for (int i = 0; i < l; ++i) {
            out[static_cast<size_t>(i) * d + ch] = y[static_cast<size_t>(i)];
        }
    }
    Tensor result = make_tensor({l, d}, std::move(out));
    Tape* tp = Tape::active();
    const bool u_on = u.on(tp);
    const bool k_on = kbar.on(tp);
    if (tp && (u_on || k_on)) {
        std::vector<int> ins;
        if (u_on) ins.push_back(u.node());
        if (k_on) ins.push_back(kbar.node());
        int id = tp->record(
            result.size(), std::move(ins),
            [u, kbar, l, d, u_on, k_on](Tape& t, const std::vector<double>& g) {
                const std::vector<double>& uv2 = u.values();
                const std::vector<double>& kv2 = kbar.values();
                std::vector<double> gcol(static_cast<size_t>(l));
                std::vector<double> hrow(static_cast<size_t>(l));
                std::vector<double> du;
                std::vector<double> dk;
                if (u_on) du.assign(static_cast<size_t>(l) * d, 0.0);
                if (k_on) dk.assign(static_cast<size_t>(l) * d, 0.0);
                for (int ch = 0; ch < d; ++ch) {
                    for (int i = 0; i < l; ++i) {
                        gcol[static_cast<size_t>(i)] = g[static_cast<size_t>(i) * d + ch];
                    }
                    if (u_on) {
                        // du = correlate(g, kbar): convolution adjoint.
                        for (int i = 0; i < l; ++i) {
                            hrow[static_cast<size_t>(i)] = kv2[static_cast<size_t>(ch) * l + i];
                        }
                        std::vector<double> duc =
                            fft_correlate(gcol, hrow, static_cast<size_t>(l));
                        for (int i = 0; i < l; ++i) {
                            du[static_cast<size_t>(i) * d + ch] = duc[static_cast<size_t>(i)];
                        }
                    }
                    if (k_on) {
                        for (int i = 0; i < l; ++i) {
                            hrow[static_cast<size_t>(i)] = uv2[static_cast<size_t>(i) * d + ch];
                        }
                        std::vector<double> dkc =
                            fft_correlate(gcol, hrow, static_cast<size_t>(l));
                        for (int i = 0; i < l; ++i) {
                            dk[static_cast<size_t>(ch) * l + i] = dkc[static_cast<size_t>(i)];
                        }
                    }
                }
                if (u_on) t.accumulate(u.node(), du);
                if (k_on) t.accumulate(kbar.node(), dk);
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor s4_forward(const SsmLayerParams& params, const Tensor& u) {
    if (u.ndim() != 2 || u.dim(1) != params.channels()) {
        throw ShapeError("s4_forward: input channel count must match the layer");
    }
    S4Kernel kernel = materialize_kernel(params, u.dim(0));
    return fft_conv(u, kernel);
}

Tensor s4_forward_with_kernel(const S4Kernel& kernel, const Tensor& u) {
    return fft_conv(u, kernel);
}

Tensor recurrent_scan(const SsmLayerParams& params, const Tensor& u) {
    if (u.ndim() != 2 || u.dim(1) != params.channels()) {
        throw ShapeError("recurrent_scan: input channel count must match the layer");
    }
    NoTapeScope guard; // forward-only oracle
    const int l = u.dim(0);
    const int d = params.channels();
    const int n = params.state_dim();
    const std::vector<double>& uv = u.values();
    std::vector<double> out(static_cast<size_t>(l) * d, 0.0);
    for (int ch = 0; ch < d; ++ch) {
        Tensor delta_ch = gather_rows(exp(params.log_delta), {ch});
        Tensor b_ch = gather_rows(params.b_in, {ch}).reshaped({n});
        Tensor c_ch = gather_rows(params.c_out, {ch});
        auto [abar_t, bbar_t] = discretize(params.a, b_ch, delta_ch);
        const std::vector<double>& abar = abar_t.values();
        const std::vector<double>& bbar = bbar_t.values();
        const std::vector<double>& cv = c_ch.values();
        std::vector<double> state(static_cast<size_t>(n), 0.0);
        std::vector<double> next(static_cast<size_t>(n));
        for (int k = 0; k < l; ++k) {
            const double uk = uv[static_cast<size_t>(k) * d + ch];
            for (int i = 0; i < n; ++i) {
                double acc = bbar[static_cast<size_t>(i)] * uk;
                const double* arow = &abar[static_cast<size_t>(i) * n];
                for (int j = 0; j < n; ++j) {
                    acc += arow[j] * state[static_cast<size_t>(j)];
                }
                next[static_cast<size_t>(i)] = acc;
            }
            std::swap(state, next);
            double y = 0.0;
            for (int i = 0; i < n; ++i) {
                y += cv[static_cast<size_t>(i)] * state[static_cast<size_t>(i)];
            }
            out[static_cast<size_t>(k) * d + ch] = y;
        }
    }
    return make_tensor({l, d}, std::move(out));
}

SsmLayerParams init_ssm_params(int state_dim, int channels, Rng& rng, double delta_min,
                               double delta_max) {
    SsmLayerParams p;
    p.a = hippo_init(state_dim);
    std::vector<double> b(static_cast<size_t>(channels) * state_dim);
    std::vector<double> c(static_cast<size_t>(channels) * state_dim);
    const double scl = 1.0 / std::sqrt(static_cast<double>(state_dim));
    for (double& v : b) v = rng.normal() * scl;
    for (double& v : c) v = rng.normal() * scl;
    p.b_in = Tensor::from_data({channels, state_dim}, std::move(b));
    p.c_out = Tensor::from_data({channels, state_dim}, std::move(c));
    std::vector<double> ld(static_cast<size_t>(channels));
    const double lo = std::log(delta_min), hi = std::log(delta_max);
    for (double& v : ld) v = lo + (hi - lo) * rng.uniform();
    p.log_delta = Tensor::from_data({channels}, std::move(ld));
    return p;
}

} // namespace s5
