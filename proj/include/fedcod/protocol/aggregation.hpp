#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fedcod/coding.hpp"
#include "fedcod/error.hpp"

namespace fedcod {

/// Per-client aggregation weights, nonnegative and summing to one.
struct AggregationPlan {
  std::vector<double> weights;

  static AggregationPlan uniform(std::size_t n) {
    if (n == 0) fail(Errc::invalid_parameter, "aggregation plan needs at least one client");
    return AggregationPlan{std::vector<double>(n, 1.0 / static_cast<double>(n))};
  }

  /// Weights proportional to local dataset sizes.
  static AggregationPlan proportional(std::span<const double> sizes) {
    const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
    if (sizes.empty() || !(total > 0.0)) fail(Errc::invalid_parameter, "dataset sizes must have a positive sum");
    AggregationPlan p;
    for (double s : sizes) p.weights.push_back(s / total);
    p.validate();
    return p;
  }

  void validate() const {
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) fail(Errc::invalid_parameter, "negative aggregation weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(Errc::invalid_parameter, "aggregation weights sum to " + std::to_string(sum));
  }

  std::size_t size() const noexcept { return weights.size(); }
};

/// Sum_i w_i * model_i in double precision.
inline std::vector<double> weighted_sum(std::span<const ModelVector> models, std::span<const double> weights) {
  if (models.size() != weights.size() || models.empty())
    fail(Errc::invalid_parameter, "weighted_sum: model/weight count mismatch");
  std::vector<double> out(models.front().size(), 0.0);
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].size() != out.size()) fail(Errc::invalid_parameter, "weighted_sum: model lengths differ");
    for (std::size_t m = 0; m < out.size(); ++m) out[m] += weights[i] * static_cast<double>(models[i].elements[m]);
  }
  return out;
}

inline ModelVector scaled(const ModelVector& model, double w) {
  ModelVector out;
  out.elements.resize(model.size());
  for (std::size_t m = 0; m < model.size(); ++m)
    out.elements[m] = static_cast<float>(w * static_cast<double>(model.elements[m]));
  return out;
}

}  // namespace fedcod
