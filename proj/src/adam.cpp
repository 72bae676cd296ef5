#include "finsent/adam.hpp"

#include <cmath>

#include "finsent/errors.hpp"

namespace finsent {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions options) : options_(options) {
    if (!(options.learning_rate > 0.0) || !(options.epsilon > 0.0)) {
        throw ConfigError("Adam learning rate and epsilon must be positive");
    }
    if (!(options.beta1 > 0.0 && options.beta1 < 1.0) || !(options.beta2 > 0.0 && options.beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in (0, 1)");
    }
    for (const Tensor& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void adam_step(std::span<Tensor> params, AdamState& state, std::span<const std::string> names) {
    if (params.size() != state.m_.size()) {
        throw ShapeError("adam_step: state tracks " + std::to_string(state.m_.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::string label = k < names.size() ? names[k] : "#" + std::to_string(k);
        if (!params[k].has_grad()) throw Error("adam_step: parameter " + label + " has no gradient");
        if (params[k].size() != state.m_[k].size()) {
            throw ShapeError("adam_step: parameter " + label + " changed size since the state was created");
        }
    }

    const auto& opt = state.options_;
    ++state.step_count_;
    const double t = static_cast<double>(state.step_count_);
    const double correction1 = 1.0 - std::pow(opt.beta1, t);
    const double correction2 = 1.0 - std::pow(opt.beta2, t);

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto values = params[k].mutable_data();
        auto grad = params[k].grad();
        auto& m = state.m_[k];
        auto& v = state.v_[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            values[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
        }
    }
}

}  // namespace finsent
