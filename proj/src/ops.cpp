#include "s5/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace s5 {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool on(const Tensor& x, const Tape* tp) { return x.on(tp); }

enum class Broadcast { same, scalar, row };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dims() == b.dims()) {
        return Broadcast::same;
    }
    if (b.size() == 1) {
        return Broadcast::scalar;
    }
    if (b.ndim() == 1 && a.ndim() >= 1 && a.dim(a.ndim() - 1) == b.dim(0)) {
        return Broadcast::row;
    }
    throw ShapeError(std::string(op) + ": incompatible shapes");
}

// Reduces an a-shaped gradient onto b's shape for the broadcast modes above.
std::vector<double> reduce_to_b(const std::vector<double>& g, const Tensor& b,
                                Broadcast mode) {
    if (mode == Broadcast::same) {
        return g;
    }
    if (mode == Broadcast::scalar) {
        double s = 0.0;
        for (double v : g) {
            s += v;
        }
        return {s};
    }
    const size_t d = static_cast<size_t>(b.size());
    std::vector<double> out(d, 0.0);
    for (size_t i = 0; i < g.size(); ++i) {
        out[i % d] += g[i];
    }
    return out;
}

double b_at(const Tensor& b, Broadcast mode, size_t i, size_t d) {
    switch (mode) {
    case Broadcast::same: return b.values()[i];
    case Broadcast::scalar: return b.values()[0];
    default: return b.values()[i % d];
    }
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    Broadcast mode = broadcast_mode(a, b, "add");
    const size_t d = static_cast<size_t>(b.size());
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] += b_at(b, mode, i, d);
    }
    Tensor result = make_tensor(a.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(a, tp) || on(b, tp))) {
        std::vector<int> ins;
        if (on(a, tp)) ins.push_back(a.node());
        if (on(b, tp)) ins.push_back(b.node());
        int id = tp->record(result.size(), std::move(ins),
                            [a, b, mode, tp](Tape& t, const std::vector<double>& g) {
                                if (on(a, tp)) t.accumulate(a.node(), g);
                                if (on(b, tp)) t.accumulate(b.node(), reduce_to_b(g, b, mode));
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Broadcast mode = broadcast_mode(a, b, "sub");
    const size_t d = static_cast<size_t>(b.size());
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] -= b_at(b, mode, i, d);
    }
    Tensor result = make_tensor(a.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(a, tp) || on(b, tp))) {
        std::vector<int> ins;
        if (on(a, tp)) ins.push_back(a.node());
        if (on(b, tp)) ins.push_back(b.node());
        int id = tp->record(result.size(), std::move(ins),
                            [a, b, mode, tp](Tape& t, const std::vector<double>& g) {
                                if (on(a, tp)) t.accumulate(a.node(), g);
                                if (on(b, tp)) {
                                    std::vector<double> db = reduce_to_b(g, b, mode);
                                    for (double& v : db) v = -v;
                                    t.accumulate(b.node(), db);
                                }
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Broadcast mode = broadcast_mode(a, b, "mul");
    const size_t d = static_cast<size_t>(b.size());
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] *= b_at(b, mode, i, d);
    }
    Tensor result = make_tensor(a.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(a, tp) || on(b, tp))) {
        std::vector<int> ins;
        if (on(a, tp)) ins.push_back(a.node());
        if (on(b, tp)) ins.push_back(b.node());
        int id = tp->record(
            result.size(), std::move(ins),
            [a, b, mode, d, tp](Tape& t, const std::vector<double>& g) {
                if (on(a, tp)) {
                    std::vector<double> da(g.size());
                    for (size_t i = 0; i < g.size(); ++i) {
                        da[i] = g[i] * b_at(b, mode, i, d);
                    }
                    t.accumulate(a.node(), da);
                }
                if (on(b, tp)) {
                    std::vector<double> ga(g.size());
                    const std::vector<double>& av = a.values();
                    for (size_t i = 0; i < g.size(); ++i) {
                        ga[i] = g[i] * av[i];
                    }
                    t.accumulate(b.node(), reduce_to_b(ga, b, mode));
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.values());
    for (double& v : out) {
        v *= c;
    }
    Tensor result = make_tensor(a.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(a, tp)) {
        int id = tp->record(result.size(), {a.node()},
                            [a, c](Tape& t, const std::vector<double>& g) {
                                std::vector<double> da(g.size());
                                for (size_t i = 0; i < g.size(); ++i) da[i] = c * g[i];
                                t.accumulate(a.node(), da);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Bwd bwd_from_xy) {
    const std::vector<double>& xv = x.values();
    std::vector<double> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) {
        out[i] = fwd(xv[i]);
    }
    Tensor result = make_tensor(x.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        Tensor y = result;
        int id = tp->record(result.size(), {x.node()},
                            [x, y, bwd_from_xy](Tape& t, const std::vector<double>& g) {
                                const std::vector<double>& xv2 = x.values();
                                const std::vector<double>& yv = y.values();
                                std::vector<double> dx(g.size());
                                for (size_t i = 0; i < g.size(); ++i) {
                                    dx[i] = g[i] * bwd_from_xy(xv2[i], yv[i]);
                                }
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

} // namespace

Tensor exp(const Tensor& x) {
    return unary_op(x, [](double v) { return std::exp(v); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary_op(x, [](double v) { return std::log(v); },
                    [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
    return unary_op(x, [](double v) { return std::sqrt(v); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor relu(const Tensor& x) {
    return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                    [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    return unary_op(x,
                    [](double v) { return v * 0.5 * std::erfc(-v * kInvSqrt2); },
                    [](double v, double) {
                        double phi_cdf = 0.5 * std::erfc(-v * kInvSqrt2);
                        double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                        return phi_cdf + v * phi_pdf;
                    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: expected [MxK]*[KxN]");
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const std::vector<double>& av = a.values();
    const std::vector<double>& bv = b.values();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[static_cast<size_t>(p) * n];
            double* orow = &out[static_cast<size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                orow[j] += aip * brow[j];
            }
        }
    }
    Tensor result = make_tensor({m, n}, std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(a, tp) || on(b, tp))) {
        std::vector<int> ins;
        if (on(a, tp)) ins.push_back(a.node());
        if (on(b, tp)) ins.push_back(b.node());
        int id = tp->record(
            result.size(), std::move(ins),
            [a, b, m, k, n, tp](Tape& t, const std::vector<double>& g) {
                const std::vector<double>& av2 = a.values();
                const std::vector<double>& bv2 = b.values();
                if (on(a, tp)) {
                    // da = g * b^T
                    std::vector<double> da(static_cast<size_t>(m) * k, 0.0);
                    for (int i = 0; i < m; ++i) {
                        for (int j = 0; j < n; ++j) {
                            const double gij = g[static_cast<size_t>(i) * n + j];
                            if (gij == 0.0) continue;
                            const double* brow = &bv2[0];
                            for (int p = 0; p < k; ++p) {
                                da[static_cast<size_t>(i) * k + p] +=
                                    gij * brow[static_cast<size_t>(p) * n + j];
                            }
                        }
                    }
                    t.accumulate(a.node(), da);
                }
                if (on(b, tp)) {
                    // db = a^T * g
                    std::vector<double> db(static_cast<size_t>(k) * n, 0.0);
                    for (int i = 0; i < m; ++i) {
                        for (int p = 0; p < k; ++p) {
                            const double aip = av2[static_cast<size_t>(i) * k + p];
                            if (aip == 0.0) continue;
                            const double* grow = &g[static_cast<size_t>(i) * n];
                            double* drow = &db[static_cast<size_t>(p) * n];
                            for (int j = 0; j < n; ++j) {
                                drow[j] += aip * grow[j];
                            }
                        }
                    }
                    t.accumulate(b.node(), db);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor transpose(const Tensor& x) {
    if (x.ndim() != 2) {
        throw ShapeError("transpose: expected a 2-D tensor");
    }
    const int m = x.dim(0), n = x.dim(1);
    const std::vector<double>& xv = x.values();
    std::vector<double> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<size_t>(j) * m + i] = xv[static_cast<size_t>(i) * n + j];
        }
    }
    Tensor result = make_tensor({n, m}, std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        int id = tp->record(result.size(), {x.node()},
                            [x, m, n](Tape& t, const std::vector<double>& g) {
                                std::vector<double> dx(g.size());
                                for (int i = 0; i < n; ++i) {
                                    for (int j = 0; j < m; ++j) {
                                        dx[static_cast<size_t>(j) * n + i] =
                                            g[static_cast<size_t>(i) * m + j];
                                    }
                                }
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor softmax(const Tensor& x) {
    if (x.ndim() < 1) {
        throw ShapeError("softmax: undefined input");
    }
    const int c = x.dim(x.ndim() - 1);
    const int64_t rows = x.size() / c;
    const std::vector<double>& xv = x.values();
    std::vector<double> out(xv.size());
    for (int64_t r = 0; r < rows; ++r) {
        const double* in = &xv[static_cast<size_t>(r) * c];
        double* o = &out[static_cast<size_t>(r) * c];
        double mx = in[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (int j = 0; j < c; ++j) o[j] /= sum;
    }
    Tensor result = make_tensor(x.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        Tensor y = result;
        int id = tp->record(result.size(), {x.node()},
                            [x, y, c, rows](Tape& t, const std::vector<double>& g) {
                                const std::vector<double>& yv = y.values();
                                std::vector<double> dx(g.size());
                                for (int64_t r = 0; r < rows; ++r) {
                                    const double* yr = &yv[static_cast<size_t>(r) * c];
                                    const double* gr = &g[static_cast<size_t>(r) * c];
                                    double dotgy = 0.0;
                                    for (int j = 0; j < c; ++j) dotgy += gr[j] * yr[j];
                                    double* dr = &dx[static_cast<size_t>(r) * c];
                                    for (int j = 0; j < c; ++j) {
                                        dr[j] = yr[j] * (gr[j] - dotgy);
                                    }
                                }
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.ndim() < 1) {
        throw ShapeError("layer_norm: undefined input");
    }
    const int d = x.dim(x.ndim() - 1);
    if (d < 1 || gamma.size() != d || beta.size() != d) {
        throw ShapeError("layer_norm: affine parameters must match the last axis");
    }
    if (eps <= 0.0) {
        throw ArgError("layer_norm: eps must be positive");
    }
    const int64_t rows = x.size() / d;
    const std::vector<double>& xv = x.values();
    std::vector<double> xhat(xv.size());
    std::vector<double> inv_std(static_cast<size_t>(rows));
    std::vector<double> out(xv.size());
    const std::vector<double>& gv = gamma.values();
    const std::vector<double>& bv = beta.values();
    for (int64_t r = 0; r < rows; ++r) {
        const double* in = &xv[static_cast<size_t>(r) * d];
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += in[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = in[j] - mean;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = inv;
        for (int j = 0; j < d; ++j) {
            const double h = (in[j] - mean) * inv;
            xhat[static_cast<size_t>(r) * d + j] = h;
            out[static_cast<size_t>(r) * d + j] = gv[j] * h + bv[j];
        }
    }
    Tensor result = make_tensor(x.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(x, tp) || on(gamma, tp) || on(beta, tp))) {
        std::vector<int> ins;
        if (on(x, tp)) ins.push_back(x.node());
        if (on(gamma, tp)) ins.push_back(gamma.node());
        if (on(beta, tp)) ins.push_back(beta.node());
        auto xhat_p = std::make_shared<std::vector<double>>(std::move(xhat));
        auto inv_p = std::make_shared<std::vector<double>>(std::move(inv_std));
        int id = tp->record(
            result.size(), std::move(ins),
            [x, gamma, beta, d, rows, xhat_p, inv_p, tp](Tape& t,
                                                         const std::vector<double>& g) {
                const std::vector<double>& gv2 = gamma.values();
                if (on(x, tp)) {
                    std::vector<double> dx(g.size());
                    for (int64_t r = 0; r < rows; ++r) {
                        const double* gr = &g[static_cast<size_t>(r) * d];
                        const double* hr = &(*xhat_p)[static_cast<size_t>(r) * d];
                        const double inv = (*inv_p)[static_cast<size_t>(r)];
                        double mean_h = 0.0, mean_hx = 0.0;
                        for (int j = 0; j < d; ++j) {
                            const double hj = gr[j] * gv2[j];
                            mean_h += hj;
                            mean_hx += hj * hr[j];
                        }
                        mean_h /= d;
                        mean_hx /= d;
                        double* dr = &dx[static_cast<size_t>(r) * d];
                        for (int j = 0; j < d; ++j) {
                            const double hj = gr[j] * gv2[j];
                            dr[j] = inv * (hj - mean_h - hr[j] * mean_hx);
                        }
                    }
                    t.accumulate(x.node(), dx);
                }
                if (on(gamma, tp)) {
                    std::vector<double> dg(static_cast<size_t>(d), 0.0);
                    for (int64_t r = 0; r < rows; ++r) {
                        for (int j = 0; j < d; ++j) {
                            dg[static_cast<size_t>(j)] +=
                                g[static_cast<size_t>(r) * d + j] *
                                (*xhat_p)[static_cast<size_t>(r) * d + j];
                        }
                    }
                    t.accumulate(gamma.node(), dg);
                }
                if (on(beta, tp)) {
                    std::vector<double> db(static_cast<size_t>(d), 0.0);
                    for (int64_t r = 0; r < rows; ++r) {
                        for (int j = 0; j < d; ++j) {
                            db[static_cast<size_t>(j)] += g[static_cast<size_t>(r) * d + j];
                        }
                    }
                    t.accumulate(beta.node(), db);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) {
        throw ArgError("concat: no inputs");
    }
    const int nd = parts[0].ndim();
    if (axis < 0 || axis >= nd) {
        throw ShapeError("concat: axis out of range");
    }
    std::vector<int> dims = parts[0].dims();
    int total_axis = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != nd) {
            throw ShapeError("concat: rank mismatch");
        }
        for (int i = 0; i < nd; ++i) {
            if (i != axis && p.dim(i) != dims[static_cast<size_t>(i)]) {
                throw ShapeError("concat: extent mismatch off the concat axis");
            }
        }
        total_axis += p.dim(axis);
    }
    dims[static_cast<size_t>(axis)] = total_axis;

    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= parts[0].dim(i);
    for (int i = axis + 1; i < nd; ++i) inner *= parts[0].dim(i);

    std::vector<double> out(static_cast<size_t>(checked_size(dims)));
    const int64_t out_row = static_cast<int64_t>(total_axis) * inner;
    int64_t axis_offset = 0;
    for (const Tensor& p : parts) {
        const int64_t p_row = static_cast<int64_t>(p.dim(axis)) * inner;
        const std::vector<double>& pv = p.values();
        for (int64_t o = 0; o < outer; ++o) {
            std::memcpy(&out[static_cast<size_t>(o * out_row + axis_offset * inner)],
                        &pv[static_cast<size_t>(o * p_row)],
                        static_cast<size_t>(p_row) * sizeof(double));
        }
        axis_offset += p.dim(axis);
    }
    Tensor result = make_tensor(dims, std::move(out));
    Tape* tp = Tape::active();
    bool any = false;
    for (const Tensor& p : parts) {
        any = any || (tp && on(p, tp));
    }
    if (tp && any) {
        std::vector<int> ins;
        for (const Tensor& p : parts) {
            if (on(p, tp)) ins.push_back(p.node());
        }
        std::vector<Tensor> captured = parts;
        int id = tp->record(
            result.size(), std::move(ins),
            [captured, outer, inner, out_row, tp](Tape& t, const std::vector<double>& g) {
                int64_t axis_offset = 0;
                for (const Tensor& p : captured) {
                    const int64_t p_axis = p.size() / (outer * inner);
                    if (on(p, tp)) {
                        const int64_t p_row = p_axis * inner;
                        std::vector<double> dp(static_cast<size_t>(p.size()));
                        for (int64_t o = 0; o < outer; ++o) {
                            std::memcpy(
                                &dp[static_cast<size_t>(o * p_row)],
                                &g[static_cast<size_t>(o * out_row + axis_offset * inner)],
                                static_cast<size_t>(p_row) * sizeof(double));
                        }
                        t.accumulate(p.node(), dp);
                    }
                    axis_offset += p_axis;
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor mean_axis(const Tensor& x, int axis) {
    if (x.ndim() != 2 || (axis != 0 && axis != 1)) {
        throw ShapeError("mean_axis: expected a 2-D tensor and axis 0/1");
    }
    const int m = x.dim(0), n = x.dim(1);
    const std::vector<double>& xv = x.values();
    const int out_n = axis == 0 ? n : m;
    const int red = axis == 0 ? m : n;
    std::vector<double> out(static_cast<size_t>(out_n), 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out[static_cast<size_t>(axis == 0 ? j : i)] += xv[static_cast<size_t>(i) * n + j];
        }
    }
    for (double& v : out) v /= red;
    Tensor result = make_tensor({out_n}, std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        int id = tp->record(result.size(), {x.node()},
                            [x, m, n, axis, red](Tape& t, const std::vector<double>& g) {
                                std::vector<double> dx(static_cast<size_t>(m) * n);
                                for (int i = 0; i < m; ++i) {
                                    for (int j = 0; j < n; ++j) {
                                        dx[static_cast<size_t>(i) * n + j] =
                                            g[static_cast<size_t>(axis == 0 ? j : i)] / red;
                                    }
                                }
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor var_axis(const Tensor& x, int axis) {
    if (x.ndim() != 2 || (axis != 0 && axis != 1)) {
        throw ShapeError("var_axis: expected a 2-D tensor and axis 0/1");
    }
    const int m = x.dim(0), n = x.dim(1);
    const std::vector<double>& xv = x.values();
    const int out_n = axis == 0 ? n : m;
    const int red = axis == 0 ? m : n;
    std::vector<double> mean(static_cast<size_t>(out_n), 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            mean[static_cast<size_t>(axis == 0 ? j : i)] += xv[static_cast<size_t>(i) * n + j];
        }
    }
    for (double& v : mean) v /= red;
    std::vector<double> out(static_cast<size_t>(out_n), 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const int o = axis == 0 ? j : i;
            const double c = xv[static_cast<size_t>(i) * n + j] - mean[static_cast<size_t>(o)];
            out[static_cast<size_t>(o)] += c * c;
        }
    }
    for (double& v : out) v /= red;
    Tensor result = make_tensor({out_n}, std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        auto mean_p = std::make_shared<std::vector<double>>(std::move(mean));
        int id = tp->record(
            result.size(), {x.node()},
            [x, m, n, axis, red, mean_p](Tape& t, const std::vector<double>& g) {
                const std::vector<double>& xv2 = x.values();
                std::vector<double> dx(static_cast<size_t>(m) * n);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const int o = axis == 0 ? j : i;
                        dx[static_cast<size_t>(i) * n + j] =
                            g[static_cast<size_t>(o)] * 2.0 *
                            (xv2[static_cast<size_t>(i) * n + j] -
                             (*mean_p)[static_cast<size_t>(o)]) /
                            red;
                    }
                }
                t.accumulate(x.node(), dx);
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    Tensor result = make_tensor({1}, {s});
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        int id = tp->record(1, {x.node()},
                            [x](Tape& t, const std::vector<double>& g) {
                                std::vector<double> dx(static_cast<size_t>(x.size()), g[0]);
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor mean_all(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
    if (x.ndim() < 1) {
        throw ShapeError("gather_rows: undefined input");
    }
    const int r = x.dim(0);
    const int64_t stride = x.size() / r;
    for (int idx : rows) {
        if (idx < 0 || idx >= r) {
            throw UsageError("gather_rows: index out of range");
        }
    }
    std::vector<int> dims = x.dims();
    dims[0] = static_cast<int>(rows.size());
    const std::vector<double>& xv = x.values();
    std::vector<double> out(static_cast<size_t>(rows.size()) * stride);
    for (size_t k = 0; k < rows.size(); ++k) {
        std::memcpy(&out[k * static_cast<size_t>(stride)],
                    &xv[static_cast<size_t>(rows[k]) * stride],
                    static_cast<size_t>(stride) * sizeof(double));
    }
    Tensor result = make_tensor(std::move(dims), std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        std::vector<int> captured = rows;
        int id = tp->record(result.size(), {x.node()},
                            [x, captured, stride](Tape& t, const std::vector<double>& g) {
                                for (size_t k = 0; k < captured.size(); ++k) {
                                    t.accumulate_at(x.node(),
                                                    static_cast<int64_t>(captured[k]) * stride,
                                                    &g[k * static_cast<size_t>(stride)], stride);
                                }
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool train) {
    if (p < 0.0 || p >= 1.0) {
        throw ArgError("dropout: p must lie in [0, 1)");
    }
    if (!train || p == 0.0) {
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(static_cast<size_t>(x.size()));
    for (double& m : mask) {
        m = rng.uniform() < p ? 0.0 : keep_scale;
    }
    const std::vector<double>& xv = x.values();
    std::vector<double> out(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) {
        out[i] = xv[i] * mask[i];
    }
    Tensor result = make_tensor(x.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        auto mask_p = std::make_shared<std::vector<double>>(std::move(mask));
        int id = tp->record(result.size(), {x.node()},
                            [x, mask_p](Tape& t, const std::vector<double>& g) {
                                std::vector<double> dx(g.size());
                                for (size_t i = 0; i < g.size(); ++i) {
                                    dx[i] = g[i] * (*mask_p)[i];
                                }
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool train, double eps) {
    if (x.ndim() != 2) {
        throw ShapeError("batch_norm: expected [BxE]");
    }
    const int b = x.dim(0), e = x.dim(1);
    if (gamma.size() != e || beta.size() != e) {
        throw ShapeError("batch_norm: affine parameters must match the feature axis");
    }
    if (train && b < 2) {
        throw ArgError("batch_norm: train mode requires batch size >= 2");
    }
    const std::vector<double>& xv = x.values();
    const std::vector<double>& gv = gamma.values();
    const std::vector<double>& bv = beta.values();

    std::vector<double> mean(static_cast<size_t>(e), 0.0);
    std::vector<double> var(static_cast<size_t>(e), 0.0);
    if (train) {
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < e; ++j) {
                mean[static_cast<size_t>(j)] += xv[static_cast<size_t>(i) * e + j];
            }
        }
        for (double& v : mean) v /= b;
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < e; ++j) {
                const double c = xv[static_cast<size_t>(i) * e + j] - mean[static_cast<size_t>(j)];
                var[static_cast<size_t>(j)] += c * c;
            }
        }
        for (double& v : var) v /= b;
        // Refresh running stats outside the tape.
        std::vector<double> rm(static_cast<size_t>(e));
        std::vector<double> rv(static_cast<size_t>(e));
        const std::vector<double>& old_m = state.running_mean.values();
        const std::vector<double>& old_v = state.running_var.values();
        for (int j = 0; j < e; ++j) {
            rm[static_cast<size_t>(j)] = (1.0 - state.momentum) * old_m[static_cast<size_t>(j)] +
                                         state.momentum * mean[static_cast<size_t>(j)];
            rv[static_cast<size_t>(j)] = (1.0 - state.momentum) * old_v[static_cast<size_t>(j)] +
                                         state.momentum * var[static_cast<size_t>(j)];
        }
        state.running_mean = make_tensor({e}, std::move(rm));
        state.running_var = make_tensor({e}, std::move(rv));
    } else {
        mean = state.running_mean.values();
        var = state.running_var.values();
    }

    std::vector<double> inv(static_cast<size_t>(e));
    for (int j = 0; j < e; ++j) {
        inv[static_cast<size_t>(j)] = 1.0 / std::sqrt(var[static_cast<size_t>(j)] + eps);
    }
    std::vector<double> xhat(xv.size());
    std::vector<double> out(xv.size());
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < e; ++j) {
            const size_t idx = static_cast<size_t>(i) * e + j;
            xhat[idx] = (xv[idx] - mean[static_cast<size_t>(j)]) * inv[static_cast<size_t>(j)];
            out[idx] = gv[static_cast<size_t>(j)] * xhat[idx] + bv[static_cast<size_t>(j)];
        }
    }
    Tensor result = make_tensor(x.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(x, tp) || on(gamma, tp) || on(beta, tp))) {
        std::vector<int> ins;
        if (on(x, tp)) ins.push_back(x.node());
        if (on(gamma, tp)) ins.push_back(gamma.node());
        if (on(beta, tp)) ins.push_back(beta.node());
        auto xhat_p = std::make_shared<std::vector<double>>(std::move(xhat));
        auto inv_p = std::make_shared<std::vector<double>>(std::move(inv));
        int id = tp->record(
            result.size(), std::move(ins),
            [x, gamma, beta, b, e, train, xhat_p, inv_p, tp](Tape& t,
                                                             const std::vector<double>& g) {
                const std::vector<double>& gv2 = gamma.values();
                if (on(x, tp)) {
                    std::vector<double> dx(g.size());
                    if (train) {
                        for (int j = 0; j < e; ++j) {
                            double mean_h = 0.0, mean_hx = 0.0;
                            for (int i = 0; i < b; ++i) {
                                const size_t idx = static_cast<size_t>(i) * e + j;
                                const double h = g[idx] * gv2[static_cast<size_t>(j)];
                                mean_h += h;
                                mean_hx += h * (*xhat_p)[idx];
                            }
                            mean_h /= b;
                            mean_hx /= b;
                            for (int i = 0; i < b; ++i) {
                                const size_t idx = static_cast<size_t>(i) * e + j;
                                const double h = g[idx] * gv2[static_cast<size_t>(j)];
                                dx[idx] = (*inv_p)[static_cast<size_t>(j)] *
                                          (h - mean_h - (*xhat_p)[idx] * mean_hx);
                            }
                        }
                    } else {
                        for (int i = 0; i < b; ++i) {
                            for (int j = 0; j < e; ++j) {
                                const size_t idx = static_cast<size_t>(i) * e + j;
                                dx[idx] = g[idx] * gv2[static_cast<size_t>(j)] *
                                          (*inv_p)[static_cast<size_t>(j)];
                            }
                        }
                    }
                    t.accumulate(x.node(), dx);
                }
                if (on(gamma, tp)) {
                    std::vector<double> dg(static_cast<size_t>(e), 0.0);
                    for (int i = 0; i < b; ++i) {
                        for (int j = 0; j < e; ++j) {
                            const size_t idx = static_cast<size_t>(i) * e + j;
                            dg[static_cast<size_t>(j)] += g[idx] * (*xhat_p)[idx];
                        }
                    }
                    t.accumulate(gamma.node(), dg);
                }
                if (on(beta, tp)) {
                    std::vector<double> db(static_cast<size_t>(e), 0.0);
                    for (int i = 0; i < b; ++i) {
                        for (int j = 0; j < e; ++j) {
                            db[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * e + j];
                        }
                    }
                    t.accumulate(beta.node(), db);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    Tensor x = logits.ndim() == 1 ? logits.reshaped({1, logits.dim(0)}) : logits;
    if (x.ndim() != 2) {
        throw ShapeError("cross_entropy: expected [BxC] logits");
    }
    const int b = x.dim(0), c = x.dim(1);
    if (static_cast<int>(labels.size()) != b) {
        throw ShapeError("cross_entropy: one label per row required");
    }
    for (int label : labels) {
        if (label < 0 || label >= c) {
            throw ArgError("cross_entropy: label out of range");
        }
    }
    const std::vector<double>& xv = x.values();
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* row = &xv[static_cast<size_t>(i) * c];
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        loss += mx + std::log(sum) - row[labels[static_cast<size_t>(i)]];
    }
    loss /= b;
    Tensor result = make_tensor({1}, {loss});
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        std::vector<int> captured = labels;
        int id = tp->record(1, {x.node()},
                            [x, captured, b, c](Tape& t, const std::vector<double>& g) {
                                const std::vector<double>& xv2 = x.values();
                                std::vector<double> dx(xv2.size());
                                for (int i = 0; i < b; ++i) {
                                    const double* row = &xv2[static_cast<size_t>(i) * c];
                                    double mx = row[0];
                                    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
                                    double sum = 0.0;
                                    for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
                                    for (int j = 0; j < c; ++j) {
                                        double p = std::exp(row[j] - mx) / sum;
                                        if (j == captured[static_cast<size_t>(i)]) p -= 1.0;
                                        dx[static_cast<size_t>(i) * c + j] = g[0] * p / b;
                                    }
                                }
                                t.accumulate(x.node(), dx);
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: size mismatch");
    }
    const std::vector<double>& av = a.values();
    const std::vector<double>& bv = b.values();
    double s = 0.0;
    for (size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    Tensor result = make_tensor({1}, {s});
    Tape* tp = Tape::active();
    if (tp && (on(a, tp) || on(b, tp))) {
        std::vector<int> ins;
        if (on(a, tp)) ins.push_back(a.node());
        if (on(b, tp)) ins.push_back(b.node());
        int id = tp->record(1, std::move(ins),
                            [a, b, tp](Tape& t, const std::vector<double>& g) {
                                if (on(a, tp)) {
                                    std::vector<double> da(b.values());
                                    for (double& v : da) v *= g[0];
                                    t.accumulate(a.node(), da);
                                }
                                if (on(b, tp)) {
                                    std::vector<double> db(a.values());
                                    for (double& v : db) v *= g[0];
                                    t.accumulate(b.node(), db);
                                }
                            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw ShapeError("cosine_similarity: size mismatch");
    }
    const std::vector<double>& av = a.values();
    const std::vector<double>& bv = b.values();
    double d = 0.0, na2 = 0.0, nb2 = 0.0;
    for (size_t i = 0; i < av.size(); ++i) {
        d += av[i] * bv[i];
        na2 += av[i] * av[i];
        nb2 += bv[i] * bv[i];
    }
    const double na = std::sqrt(na2), nb = std::sqrt(nb2);
    if (na == 0.0 || nb == 0.0) {
        throw NumericalError("cosine_similarity: zero-norm input");
    }
    const double cos = d / (na * nb);
    Tensor result = make_tensor({1}, {cos});
    Tape* tp = Tape::active();
    if (tp && (on(a, tp) || on(b, tp))) {
        std::vector<int> ins;
        if (on(a, tp)) ins.push_back(a.node());
        if (on(b, tp)) ins.push_back(b.node());
        int id = tp->record(
            1, std::move(ins),
            [a, b, na, nb, cos, tp](Tape& t, const std::vector<double>& g) {
                const std::vector<double>& av2 = a.values();
                const std::vector<double>& bv2 = b.values();
                if (on(a, tp)) {
                    std::vector<double> da(av2.size());
                    for (size_t i = 0; i < av2.size(); ++i) {
                        da[i] = g[0] * (bv2[i] / (na * nb) - cos * av2[i] / (na * na));
                    }
                    t.accumulate(a.node(), da);
                }
                if (on(b, tp)) {
                    std::vector<double> db(bv2.size());
                    for (size_t i = 0; i < bv2.size(); ++i) {
                        db[i] = g[0] * (av2[i] / (na * nb) - cos * bv2[i] / (nb * nb));
                    }
                    t.accumulate(b.node(), db);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor pool(const Tensor& x, int stride) {
    if (stride < 1) {
        throw ArgError("pool: stride must be >= 1");
    }
    if (x.ndim() != 2) {
        throw ShapeError("pool: expected [LxD]");
    }
    const int l = x.dim(0), d = x.dim(1);
    const int groups = (l + stride - 1) / stride;
    const std::vector<double>& xv = x.values();
    std::vector<double> out(static_cast<size_t>(groups) * d, 0.0);
    for (int g = 0; g < groups; ++g) {
        const int begin = g * stride;
        const int end = std::min(l, begin + stride);
        for (int i = begin; i < end; ++i) {
            for (int j = 0; j < d; ++j) {
                out[static_cast<size_t>(g) * d + j] += xv[static_cast<size_t>(i) * d + j];
            }
        }
        const double n = end - begin;
        for (int j = 0; j < d; ++j) {
            out[static_cast<size_t>(g) * d + j] /= n;
        }
    }
    Tensor result = make_tensor({groups, d}, std::move(out));
    Tape* tp = Tape::active();
    if (tp && on(x, tp)) {
        int id = tp->record(
            result.size(), {x.node()},
            [x, l, d, stride, groups](Tape& t, const std::vector<double>& g) {
                std::vector<double> dx(static_cast<size_t>(l) * d);
                for (int grp = 0; grp < groups; ++grp) {
                    const int begin = grp * stride;
                    const int end = std::min(l, begin + stride);
                    const double n = end - begin;
                    for (int i = begin; i < end; ++i) {
                        for (int j = 0; j < d; ++j) {
                            dx[static_cast<size_t>(i) * d + j] =
                                g[static_cast<size_t>(grp) * d + j] / n;
                        }
                    }
                }
                t.accumulate(x.node(), dx);
            });
        result = with_node(result, tp, id);
    }
    return result;
}

namespace {

// In-place LU with partial pivoting; solves for all columns of rhs.
std::vector<double> lu_solve_raw(std::vector<double> m, std::vector<double> rhs, int n,
                                 int k, const char* context) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::fabs(m[static_cast<size_t>(col) * n + col]);
        for (int i = col + 1; i < n; ++i) {
            const double v = std::fabs(m[static_cast<size_t>(i) * n + col]);
            if (v > best) {
                best = v;
                pivot = i;
            }
        }
        if (best < 1e-12) {
            throw NumericalError(std::string("linear_solve: pivot below 1e-12 (") + context +
                                 ")");
        }
        if (pivot != col) {
            for (int j = 0; j < n; ++j) {
                std::swap(m[static_cast<size_t>(col) * n + j], m[static_cast<size_t>(pivot) * n + j]);
            }
            for (int j = 0; j < k; ++j) {
                std::swap(rhs[static_cast<size_t>(col) * k + j],
                          rhs[static_cast<size_t>(pivot) * k + j]);
            }
        }
        const double inv_p = 1.0 / m[static_cast<size_t>(col) * n + col];
        for (int i = col + 1; i < n; ++i) {
            const double f = m[static_cast<size_t>(i) * n + col] * inv_p;
            if (f == 0.0) continue;
            m[static_cast<size_t>(i) * n + col] = 0.0;
            for (int j = col + 1; j < n; ++j) {
                m[static_cast<size_t>(i) * n + j] -= f * m[static_cast<size_t>(col) * n + j];
            }
            for (int j = 0; j < k; ++j) {
                rhs[static_cast<size_t>(i) * k + j] -= f * rhs[static_cast<size_t>(col) * k + j];
            }
        }
    }
    for (int col = n - 1; col >= 0; --col) {
        const double inv_p = 1.0 / m[static_cast<size_t>(col) * n + col];
        for (int j = 0; j < k; ++j) {
            double v = rhs[static_cast<size_t>(col) * k + j];
            for (int i = col + 1; i < n; ++i) {
                v -= m[static_cast<size_t>(col) * n + i] * rhs[static_cast<size_t>(i) * k + j];
            }
            rhs[static_cast<size_t>(col) * k + j] = v * inv_p;
        }
    }
    return rhs;
}

std::vector<double> transpose_raw(const std::vector<double>& m, int rows, int cols) {
    std::vector<double> out(m.size());
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            out[static_cast<size_t>(j) * rows + i] = m[static_cast<size_t>(i) * cols + j];
        }
    }
    return out;
}

} // namespace

Tensor linear_solve(const Tensor& m, const Tensor& r) {
    if (m.ndim() != 2 || m.dim(0) != m.dim(1)) {
        throw ShapeError("linear_solve: m must be square");
    }
    const int n = m.dim(0);
    const bool vec = r.ndim() == 1;
    if ((vec && r.dim(0) != n) || (!vec && (r.ndim() != 2 || r.dim(0) != n))) {
        throw ShapeError("linear_solve: rhs rows must match m");
    }
    const int k = vec ? 1 : r.dim(1);
    std::vector<double> x =
        lu_solve_raw(m.values(), r.values(), n, k, "forward");
    Tensor result = make_tensor(r.dims(), std::move(x));
    Tape* tp = Tape::active();
    if (tp && (on(m, tp) || on(r, tp))) {
        std::vector<int> ins;
        if (on(m, tp)) ins.push_back(m.node());
        if (on(r, tp)) ins.push_back(r.node());
        Tensor xsol = result;
        int id = tp->record(
            result.size(), std::move(ins),
            [m, r, xsol, n, k, tp](Tape& t, const std::vector<double>& g) {
                // dR = M^-T G, dM = -dR X^T.
                std::vector<double> mt = transpose_raw(m.values(), n, n);
                std::vector<double> dr = lu_solve_raw(std::move(mt), g, n, k, "backward");
                if (on(r, tp)) {
                    t.accumulate(r.node(), dr);
                }
                if (on(m, tp)) {
                    const std::vector<double>& xv = xsol.values();
                    std::vector<double> dm(static_cast<size_t>(n) * n, 0.0);
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < n; ++j) {
                            double s = 0.0;
                            for (int c = 0; c < k; ++c) {
                                s += dr[static_cast<size_t>(i) * k + c] *
                                     xv[static_cast<size_t>(j) * k + c];
                            }
                            dm[static_cast<size_t>(i) * n + j] = -s;
                        }
                    }
                    t.accumulate(m.node(), dm);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

Tensor add_positional(const Tensor& tokens, const Tensor& e_s, const Tensor& e_t) {
    if (tokens.ndim() != 2 || e_s.ndim() != 2 || e_t.ndim() != 2) {
        throw ShapeError("add_positional: expected 2-D inputs");
    }
    const int s = e_s.dim(0), tt = e_t.dim(0), d = tokens.dim(1);
    if (e_s.dim(1) != d || e_t.dim(1) != d || tokens.dim(0) != s * tt) {
        throw ShapeError("add_positional: table extents must match the grid");
    }
    const std::vector<double>& xv = tokens.values();
    const std::vector<double>& sv = e_s.values();
    const std::vector<double>& tv = e_t.values();
    std::vector<double> out(xv.size());
    for (int r = 0; r < s * tt; ++r) {
        const int si = r % s, ti = r / s;
        for (int j = 0; j < d; ++j) {
            out[static_cast<size_t>(r) * d + j] = xv[static_cast<size_t>(r) * d + j] +
                                                  sv[static_cast<size_t>(si) * d + j] +
                                                  tv[static_cast<size_t>(ti) * d + j];
        }
    }
    Tensor result = make_tensor(tokens.dims(), std::move(out));
    Tape* tp = Tape::active();
    if (tp && (on(tokens, tp) || on(e_s, tp) || on(e_t, tp))) {
        std::vector<int> ins;
        if (on(tokens, tp)) ins.push_back(tokens.node());
        if (on(e_s, tp)) ins.push_back(e_s.node());
        if (on(e_t, tp)) ins.push_back(e_t.node());
        int id = tp->record(
            result.size(), std::move(ins),
            [tokens, e_s, e_t, s, tt, d, tp](Tape& t, const std::vector<double>& g) {
                if (on(tokens, tp)) {
                    t.accumulate(tokens.node(), g);
                }
                if (on(e_s, tp)) {
                    std::vector<double> ds(static_cast<size_t>(s) * d, 0.0);
                    for (int r = 0; r < s * tt; ++r) {
                        const int si = r % s;
                        for (int j = 0; j < d; ++j) {
                            ds[static_cast<size_t>(si) * d + j] += g[static_cast<size_t>(r) * d + j];
                        }
                    }
                    t.accumulate(e_s.node(), ds);
                }
                if (on(e_t, tp)) {
                    std::vector<double> dt(static_cast<size_t>(tt) * d, 0.0);
                    for (int r = 0; r < s * tt; ++r) {
                        const int ti = r / s;
                        for (int j = 0; j < d; ++j) {
                            dt[static_cast<size_t>(ti) * d + j] += g[static_cast<size_t>(r) * d + j];
                        }
                    }
                    t.accumulate(e_t.node(), dt);
                }
            });
        result = with_node(result, tp, id);
    }
    return result;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h) {
    if (h <= 0.0) {
        throw ArgError("finite_diff_check: h must be positive");
    }
    NoTapeScope outer_guard; // keep probe evaluations off any caller tape
    std::vector<double> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor xw = tape.watch(x.detached());
        Tensor y = f(xw);
        if (y.size() != 1) {
            throw ShapeError("finite_diff_check: f must return a scalar");
        }
        if (y.on(&tape)) {
            tape.backward(y);
            analytic = tape.grad(xw).values();
        } else {
            // f ignores x entirely; the analytic gradient is zero.
            analytic.assign(static_cast<size_t>(x.size()), 0.0);
        }
    }
    double max_err = 0.0;
    std::vector<double> base = x.values();
    for (size_t i = 0; i < base.size(); ++i) {
        std::vector<double> hi = base, lo = base;
        hi[i] += h;
        lo[i] -= h;
        const double yp = f(make_tensor(x.dims(), std::move(hi))).item();
        const double ym = f(make_tensor(x.dims(), std::move(lo))).item();
        const double numeric = (yp - ym) / (2.0 * h);
        const double err = std::fabs(analytic[i] - numeric) /
                           std::max(1.0, std::fabs(analytic[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace s5
