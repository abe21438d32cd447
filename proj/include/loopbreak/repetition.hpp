#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace loopbreak {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Knobs for trailing-loop detection. The headline metrics use
/// min_repeats = 4 and max_period = 64.
struct DetectorParams {
  std::size_t min_period = 1;
  std::size_t max_period = 64;
  std::size_t min_repeats = 4;
};

struct RepetitionReport {
  bool detected = false;
  std::size_t period = 0;
  TokenSeq unit;
  std::size_t repeats = 0;
  std::size_t onset = 0;
};

/// Finds the longest trailing block made of one unit repeated at least
/// `min_repeats` times back to back. The block is the maximal periodic
/// suffix for its period, so a trailing partial copy is allowed and
/// `onset + period * repeats <= tokens.size()`. Ties on covered length go to
/// the smaller period. A `max_period` larger than `size / min_repeats` is
/// clamped; periods that cannot fit `min_repeats` copies never match anyway.
RepetitionReport detect_repetition(std::span<const TokenId> tokens,
                                   const DetectorParams& params = {});

/// Length of the longest suffix of `tokens` with period `period`
/// (tokens[i] == tokens[i - period] throughout). Always >= min(period, size).
std::size_t periodic_suffix_length(std::span<const TokenId> tokens, std::size_t period);

}  // namespace loopbreak
