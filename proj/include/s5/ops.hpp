#pragma once

#include <functional>
#include <vector>

#include "s5/rng.hpp"
#include "s5/tensor.hpp"

namespace s5 {

// Elementwise binary ops accept equal shapes, plus two broadcast forms for the
// right operand: [1] (scalar) and [D] against a [...xD] left operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor relu(const Tensor& x);
// Exact Gaussian-CDF form x * Phi(x).
Tensor gelu(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);

// Normalizes the last axis to mean 0 / variance 1, then applies gamma, beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor concat(const std::vector<Tensor>& parts, int axis);

// Reductions along one axis of a 2-D tensor (axis removed from the shape).
Tensor mean_axis(const Tensor& x, int axis);
Tensor var_axis(const Tensor& x, int axis); // population variance (1/n)

Tensor sum(const Tensor& x);      // scalar
Tensor mean_all(const Tensor& x); // scalar

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);

// Inverted-scaling dropout; identity when !train or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool train);

// Running statistics for batch_norm; updated in train mode, used in eval.
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
};

// Normalizes each column of x[BxE] over the batch axis. Train mode requires
// B >= 2 and refreshes the running stats.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool train, double eps = 1e-5);

// Mean of per-row softmax cross-entropy; labels index the last axis.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor dot(const Tensor& a, const Tensor& b);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Non-overlapping mean pooling along axis 0 of x[LxD]; the final partial
// group is averaged over its actual size.
Tensor pool(const Tensor& x, int stride);

// Solves m * x = r by LU with partial pivoting (never an explicit inverse).
// Throws NumericalError when a pivot falls below 1e-12.
Tensor linear_solve(const Tensor& m, const Tensor& r);

// tokens[r] + e_s[r mod S] + e_t[r div S] for the (t-major, s-minor) layout.
Tensor add_positional(const Tensor& tokens, const Tensor& e_s, const Tensor& e_t);

// Max over coordinates of |analytic - numeric| / max(1, |analytic|), central
// differences with step h. f must map a tensor to a scalar.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double h = 1e-5);

} // namespace s5
