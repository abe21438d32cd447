#include "loopbreak/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "loopbreak/error.hpp"

namespace loopbreak {

namespace {

bool open_unit(double x) { return x > 0.0 && x < 1.0; }

// Ratios that are integers in exact arithmetic can land a few ulps above.
std::size_t snapped_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9) return static_cast<std::size_t>(std::max(r, 0.0));
  return static_cast<std::size_t>(std::max(std::ceil(x), 0.0));
}

}  // namespace

std::vector<double> repetition_recurrence(double p0, std::span<const double> alpha_series) {
  if (!(p0 > 0.0 && p0 <= 1.0)) throw InvalidArgument("p0 must lie in (0, 1]");
  std::vector<double> out;
  out.reserve(alpha_series.size() + 1);
  out.push_back(p0);
  double p = p0;
  for (const double a : alpha_series) {
    if (!(a >= 1.0)) throw InvalidArgument("alpha values must be >= 1");
    p = std::min(1.0, p * a);
    out.push_back(p);
  }
  return out;
}

bool check_non_repetitive_bound(const EscapeBoundInputs& inputs,
                                std::span<const double> p_n_series,
                                std::span<const double> p_r_series) {
  if (p_n_series.size() != p_r_series.size()) {
    throw InvalidArgument("p_n and p_r series differ in length");
  }
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t j = 0; j < p_n_series.size(); ++j) {
    lhs += std::log(p_n_series[j]);
    rhs += std::log(p_r_series[j]);
  }
  return lhs > rhs - inputs.delta;
}

std::size_t beam_width_lower_bound(double epsilon, double p_n) {
  if (!open_unit(epsilon) || !open_unit(p_n)) {
    throw InvalidArgument("epsilon and p_n must lie in (0, 1)");
  }
  return snapped_ceil(std::log(1.0 / epsilon) / std::log(1.0 / p_n));
}

std::size_t min_beam_width(double p_r, double p_escape) {
  if (!open_unit(p_r) || !open_unit(p_escape)) {
    throw InvalidArgument("p_r and p_escape must lie in (0, 1)");
  }
  return snapped_ceil(std::log(1.0 - p_escape) / std::log(p_r));
}

Overheads predict_overheads(std::size_t beam_width) {
  const double scale = static_cast<double>(beam_width) / 5.0;
  return {static_cast<double>(beam_width), 0.15 * scale, 0.20 * scale};
}

double simulate_escape_probability(std::size_t beam_width, double p_n, std::size_t trials,
                                   std::uint64_t seed) {
  if (trials == 0) throw InvalidArgument("trials must be positive");
  if (!open_unit(p_n)) throw InvalidArgument("p_n must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution repeats(p_n);
  std::size_t escaped = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    bool any_clean = false;
    for (std::size_t b = 0; b < beam_width; ++b) any_clean = !repeats(rng) || any_clean;
    escaped += any_clean ? 1 : 0;
  }
  return static_cast<double>(escaped) / static_cast<double>(trials);
}

}  // namespace loopbreak
