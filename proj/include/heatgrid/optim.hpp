#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "heatgrid/error.hpp"
#include "heatgrid/models.hpp"

namespace heatgrid {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment buffers, one pair per parameter tensor in list order.
template <typename S>
struct AdamState {
    std::vector<std::vector<S>> m;
    std::vector<std::vector<S>> v;
    std::int64_t step = 0;

    static AdamState init(const std::vector<NamedParam<S>>& params) {
        AdamState state;
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor.numel(), S{0});
            state.v.emplace_back(p.tensor.numel(), S{0});
        }
        return state;
    }
};

template <typename S>
void adam_step(std::vector<NamedParam<S>>& params, AdamState<S>& state, const AdamConfig& cfg) {
    if (state.m.size() != params.size()) {
        throw ContractError("adam state holds " + std::to_string(state.m.size()) +
                            " moment buffers for " + std::to_string(params.size()) +
                            " parameters");
    }
    state.step += 1;
    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const S b1 = static_cast<S>(cfg.beta1);
    const S b2 = static_cast<S>(cfg.beta2);
    const S one_minus_b1 = static_cast<S>(1.0 - cfg.beta1);
    const S one_minus_b2 = static_cast<S>(1.0 - cfg.beta2);
    const S lr = static_cast<S>(cfg.learning_rate);
    const S eps = static_cast<S>(cfg.epsilon);
    const S c1 = static_cast<S>(correction1);
    const S c2 = static_cast<S>(correction2);

    for (std::size_t t = 0; t < params.size(); ++t) {
        auto grad = params[t].tensor.grad();
        auto data = params[t].tensor.data();
        if (state.m[t].size() != data.size()) {
            throw ContractError("adam moment extent mismatch for parameter '" + params[t].name +
                                "'");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const S g = grad[i];
            if (!std::isfinite(static_cast<double>(g))) {
                throw ContractError("non-finite gradient in parameter '" + params[t].name +
                                    "' at element " + std::to_string(i));
            }
            state.m[t][i] = b1 * state.m[t][i] + one_minus_b1 * g;
            state.v[t][i] = b2 * state.v[t][i] + one_minus_b2 * g * g;
            const S m_hat = state.m[t][i] / c1;
            const S v_hat = state.v[t][i] / c2;
            data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

}  // namespace heatgrid
