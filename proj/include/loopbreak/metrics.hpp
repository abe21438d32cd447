#pragma once

#include <optional>
#include <span>
#include <vector>

#include "loopbreak/decoders.hpp"
#include "loopbreak/repetition.hpp"

namespace loopbreak {

/// A run counts as repetitive when its tokens (terminal EOS aside) end in a
/// detected loop, or when it was cut off by max_tokens while its tail repeats
/// at least twice.
bool is_repetitive(const DecodeResult& result, const DetectorParams& params = {});

/// Fraction of repetitive runs. Throws InvalidArgument on empty input.
double repetition_rate(std::span<const DecodeResult> results, const DetectorParams& params = {});

/// Where a reference run entered its loop and what it repeats.
struct LoopReference {
  std::size_t onset = 0;
  TokenSeq unit;
};

/// Loop of a run judged repetitive by `is_repetitive`, if any.
std::optional<LoopReference> reference_loop(const DecodeResult& result,
                                            const DetectorParams& params = {});

/// Steps the emitted path keeps following `loop.unit` from `loop.onset`
/// onward. Returns nullopt ("never") when the run hit max_tokens still inside
/// the loop. A path that is not in the loop at the onset yields 0.
/// Throws InvalidArgument when the onset lies beyond the sequence.
std::optional<std::size_t> escape_time(const DecodeResult& result, const LoopReference& loop);

/// Probability of continuing `unit` after 1..n force-fed copies of it.
std::vector<double> self_reinforcement_curve(const ReinforcedMarkovModel& model,
                                             std::span<const TokenId> unit, std::size_t n);

}  // namespace loopbreak
