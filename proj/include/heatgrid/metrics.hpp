#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "heatgrid/date.hpp"
#include "heatgrid/error.hpp"

namespace heatgrid {

struct MetricSet {
    double mae = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
};

enum class MetricUnits { normalized, kelvin };

struct EvalReport {
    MetricSet global;
    std::vector<double> per_sample_mae;
    std::vector<double> per_sample_rmse;
    std::vector<Date> target_dates;
    MetricUnits units = MetricUnits::normalized;
};

// Straight from the definitions, two passes: the reference mean first, then
// the absolute/squared residual sums. R^2 = 1 - SS_res / SS_tot over every
// pixel of the set.
template <typename S>
MetricSet compute_metrics(std::span<const S> pred, std::span<const S> ref) {
    if (pred.size() != ref.size() || ref.empty()) {
        throw ContractError("compute_metrics requires equally sized, nonempty value sets");
    }
    const std::size_t n = ref.size();
    double ref_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref_sum += static_cast<double>(ref[i]);
    const double ref_mean = ref_sum / static_cast<double>(n);

    double abs_sum = 0.0, sq_sum = 0.0, tot_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = static_cast<double>(pred[i]) - static_cast<double>(ref[i]);
        abs_sum += std::abs(r);
        sq_sum += r * r;
        const double d = static_cast<double>(ref[i]) - ref_mean;
        tot_sum += d * d;
    }

    MetricSet m;
    m.mae = abs_sum / static_cast<double>(n);
    m.rmse = std::sqrt(sq_sum / static_cast<double>(n));
    if (tot_sum == 0.0) {
        throw Error(ErrorCode::degenerate,
                    "zero-variance reference set: R^2 is undefined");
    }
    m.r2 = 1.0 - sq_sum / tot_sum;
    return m;
}

// MAE/RMSE of one sample (R^2 is a set-level quantity and is not reported
// per sample).
template <typename S>
std::pair<double, double> sample_errors(std::span<const S> pred, std::span<const S> ref) {
    if (pred.size() != ref.size() || ref.empty()) {
        throw ContractError("sample_errors requires equally sized, nonempty value sets");
    }
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = static_cast<double>(pred[i]) - static_cast<double>(ref[i]);
        abs_sum += std::abs(r);
        sq_sum += r * r;
    }
    const double n = static_cast<double>(pred.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

}  // namespace heatgrid
