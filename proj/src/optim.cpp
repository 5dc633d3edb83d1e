#include "s5/optim.hpp"

#include <cmath>

namespace s5 {

void AdamW::update(const std::string& name, Tensor& param, const Tensor& grad) {
    if (param.dims() != grad.dims()) {
        throw UsageError("AdamW: gradient shape does not match parameter '" + name + "'");
    }
    if (step_ < 1) {
        throw UsageError("AdamW: begin_step() must be called before update()");
    }
    Moments& mom = state_[name];
    const size_t n = static_cast<size_t>(param.size());
    if (mom.m.empty()) {
        mom.m.assign(n, 0.0);
        mom.v.assign(n, 0.0);
    } else if (mom.m.size() != n) {
        throw UsageError("AdamW: stale state shape for parameter '" + name + "'");
    }
    const std::vector<double>& g = grad.values();
    const std::vector<double>& p = param.values();
    std::vector<double> next(n);
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t i = 0; i < n; ++i) {
        mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * g[i];
        mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = mom.m[i] / bc1;
        const double vhat = mom.v[i] / bc2;
        next[i] = p[i] - lr_ * mhat / (std::sqrt(vhat) + eps_) - lr_ * wd_ * p[i];
    }
    param = make_tensor(param.dims(), std::move(next));
}

double PlateauScheduler::observe(double epoch_loss, double current_lr) {
    if (epoch_loss < best_) {
        best_ = epoch_loss;
        bad_epochs_ = 0;
        return current_lr;
    }
    ++bad_epochs_;
    if (bad_epochs_ >= patience_) {
        bad_epochs_ = 0;
        return std::max(kMinLr, current_lr * factor_);
    }
    return current_lr;
}

} // namespace s5
