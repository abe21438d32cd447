#include "loopbreak/repetition.hpp"

#include <algorithm>

namespace loopbreak {

std::size_t periodic_suffix_length(std::span<const TokenId> tokens, std::size_t period) {
  const std::size_t n = tokens.size();
  if (period == 0 || n <= period) return n;
  std::size_t len = period;
  while (len < n && tokens[n - 1 - len] == tokens[n - 1 - len + period]) ++len;
  return len;
}

RepetitionReport detect_repetition(std::span<const TokenId> tokens, const DetectorParams& params) {
  RepetitionReport best;
  const std::size_t n = tokens.size();
  const std::size_t min_repeats = std::max<std::size_t>(params.min_repeats, 1);
  const std::size_t min_period = std::max<std::size_t>(params.min_period, 1);
  const std::size_t max_period = std::min(params.max_period, n / min_repeats);

  std::size_t best_cover = 0;
  for (std::size_t p = min_period; p <= max_period; ++p) {
    const std::size_t len = periodic_suffix_length(tokens, p);
    const std::size_t repeats = len / p;
    if (repeats < min_repeats) continue;
    // strict > keeps the smallest period on equal coverage
    if (repeats * p > best_cover) {
      best_cover = repeats * p;
      best.detected = true;
      best.period = p;
      best.repeats = repeats;
      best.onset = n - len;
    }
  }
  if (best.detected) {
    best.unit.assign(tokens.begin() + static_cast<std::ptrdiff_t>(best.onset),
                     tokens.begin() + static_cast<std::ptrdiff_t>(best.onset + best.period));
  }
  return best;
}

}  // namespace loopbreak
