#pragma once

#include <memory>
#include <string>
#include <vector>

#include "safeaug/nn/layers.hpp"

namespace safeaug::nn {

struct OptimizerSpec {
    std::string kind = "sgd";  // "sgd" | "adam"
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerSpec sgd_classification() { return OptimizerSpec{}; }
    static OptimizerSpec adam_segmentation() {
        OptimizerSpec s;
        s.kind = "adam";
        s.lr = 1e-4;
        s.weight_decay = 0.0;
        return s;
    }
};

/// Owns the per-parameter state buffers; step order follows the parameter
/// list, which is stable for a given model descriptor.
class Optimizer {
public:
    explicit Optimizer(OptimizerSpec spec) : spec_(std::move(spec)) {}

    void step(const std::vector<Param*>& params);

    /// Allocate state buffers up front (idempotent); required before
    /// restore_state on a fresh optimizer.
    void allocate(const std::vector<Param*>& params) { ensure_buffers(params); }

    double lr() const { return spec_.lr; }
    void set_lr(double lr) { spec_.lr = lr; }
    const OptimizerSpec& spec() const { return spec_; }

    /// Full state (buffers + step counter) for checkpointing.
    std::vector<double> state_blob() const;
    void restore_state(const std::vector<double>& blob);

private:
    void ensure_buffers(const std::vector<Param*>& params);

    OptimizerSpec spec_;
    std::vector<std::vector<double>> buf_m_;  // momentum / first moment
    std::vector<std::vector<double>> buf_v_;  // second moment (adam only)
    long long step_count_ = 0;
};

}  // namespace safeaug::nn
