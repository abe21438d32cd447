#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace loopbreak {

struct EscapeBoundInputs {
  double p_r = 0.5;
  double p_n = 0.5;
  double delta = 0.0;  ///< initial log-probability gap
  double epsilon = 0.01;
  double p_escape = 0.95;
  std::size_t horizon = 1;
};

/// p(t+1) = p(t) * alpha(t), clamped at 1. Returns p0 followed by one value
/// per alpha. Throws InvalidArgument when p0 is outside (0, 1] or an alpha
/// is below 1.
std::vector<double> repetition_recurrence(double p0, std::span<const double> alpha_series);

/// Whether the non-repetitive branch keeps a strictly higher cumulative log
/// score than the repetitive one after paying the gap `inputs.delta`.
/// Throws InvalidArgument when the series lengths differ.
bool check_non_repetitive_bound(const EscapeBoundInputs& inputs,
                                std::span<const double> p_n_series,
                                std::span<const double> p_r_series);

/// ceil(log(1/epsilon) / log(1/p_n)).
std::size_t beam_width_lower_bound(double epsilon, double p_n);

/// ceil(log(1 - p_escape) / log(p_r)).
std::size_t min_beam_width(double p_r, double p_escape);

struct Overheads {
  double memory_factor = 1.0;
  double time_low = 0.0;   ///< fractional slowdown, 0.15 means +15%
  double time_high = 0.0;
};

/// Memory grows with the beam width; the time band is 15-20% at width 5,
/// scaled linearly.
Overheads predict_overheads(std::size_t beam_width);

/// Monte Carlo check of the width bound on a two-branch kernel: each of
/// `beam_width` independently drawn candidates takes the repetitive branch
/// with probability `p_n`, and the search escapes when at least one does not.
double simulate_escape_probability(std::size_t beam_width, double p_n, std::size_t trials,
                                   std::uint64_t seed);

}  // namespace loopbreak
