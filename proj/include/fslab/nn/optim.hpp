#pragma once

#include "fslab/nn/layers.hpp"

namespace fslab::nn {

class Adam {
public:
    Adam(const ParamList& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long steps() const { return t_; }

private:
    std::vector<Var> params_;
    std::vector<Mat> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

/// Multiplies the base rate by `gamma` once every `step_size` epochs.
inline double step_decay(double base_lr, double gamma, int step_size, int epoch)
{
    double lr = base_lr;
    if (step_size > 0) {
        for (int e = step_size; e <= epoch; e += step_size) lr *= gamma;
    }
    return lr;
}

}  // namespace fslab::nn
