#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "s5/tensor.hpp"

namespace s5 {

// AdamW: bias-corrected Adam plus decoupled weight decay
// theta <- theta - lr*mhat/(sqrt(vhat)+eps) - lr*wd*theta.
class AdamW {
  public:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Advances the shared step counter; call once per optimizer step before
    // updating the parameters of that step.
    void begin_step() { ++step_; }

    void update(const std::string& name, Tensor& param, const Tensor& grad);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    int64_t step_count() const { return step_; }

    const std::map<std::string, Moments>& state() const { return state_; }
    std::map<std::string, Moments>& state() { return state_; }
    void set_step_count(int64_t step) { step_ = step; }

  private:
    double lr_;
    double wd_;
    double beta1_;
    double beta2_;
    double eps_;
    int64_t step_ = 0;
    std::map<std::string, Moments> state_;
};

// Multiplies lr by `factor` when the latest epoch loss failed to beat the best
// loss seen in the preceding `patience` epochs; lr floors at 1e-7.
class PlateauScheduler {
  public:
    PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {
        if (factor <= 0.0 || factor >= 1.0) {
            throw ArgError("plateau scheduler: factor must lie in (0, 1)");
        }
        if (patience < 1) {
            throw ArgError("plateau scheduler: patience must be >= 1");
        }
    }

    // Feeds one epoch loss; returns the (possibly reduced) learning rate.
    double observe(double epoch_loss, double current_lr);

    double best_loss() const { return best_; }
    int bad_epochs() const { return bad_epochs_; }
    void restore(double best, int bad_epochs) {
        best_ = best;
        bad_epochs_ = bad_epochs;
    }

    static constexpr double kMinLr = 1e-7;

  private:
    double factor_;
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

} // namespace s5
