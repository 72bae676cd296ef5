#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "finsent/tensor.hpp"

namespace finsent {

struct AdamOptions {
    double learning_rate = 1e-5;
    double epsilon = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
};

/// Moment estimates for a fixed list of parameters.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::span<const Tensor> params, AdamOptions options = {});

    const AdamOptions& options() const { return options_; }
    std::uint64_t step_count() const { return step_count_; }
    std::span<const std::vector<double>> first_moments() const { return m_; }
    std::span<const std::vector<double>> second_moments() const { return v_; }

private:
    friend void adam_step(std::span<Tensor> params, AdamState& state, std::span<const std::string> names);

    AdamOptions options_;
    std::uint64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// One bias-corrected Adam update. Gradients are read, not cleared. `names`
// is optional and only used to label a parameter whose gradient is missing.
void adam_step(std::span<Tensor> params, AdamState& state, std::span<const std::string> names = {});

}  // namespace finsent
