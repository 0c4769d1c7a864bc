#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tailcal/dataset.hpp"

namespace fixtures {

using namespace tailcal;

/// Household holding `net` entirely as deposits.
inline Household deposit_household(const std::string& id, double weight, double net) {
  Household h;
  h.id = id;
  h.weight = weight;
  h.portfolio[index(Item::deposits)] = net;
  return h;
}

inline SurveyDataset deposits_only(const std::vector<double>& weights, const std::vector<double>& wealth) {
  SurveyDataset ds;
  for (std::size_t i = 0; i < weights.size(); ++i)
    ds.households.push_back(deposit_household("h" + std::to_string(i), weights[i], wealth[i]));
  return ds;
}

/// Survey of n unit-weight households with Pareto(alpha, w0) deposits on an
/// exact quantile grid, richest first.
inline SurveyDataset pareto_grid(std::size_t n, double alpha, double w0, double weight = 1.0) {
  SurveyDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    ds.households.push_back(deposit_household("g" + std::to_string(i), weight, w0 * std::pow(u, -1.0 / alpha)));
  }
  return ds;
}

}  // namespace fixtures
