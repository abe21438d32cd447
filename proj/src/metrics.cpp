#include "loopbreak/metrics.hpp"

#include "loopbreak/error.hpp"

namespace loopbreak {

namespace {

RepetitionReport trailing_loop(const DecodeResult& result, const DetectorParams& params) {
  std::span<const TokenId> tokens = result.best.tokens;
  if (result.best.finished && !tokens.empty()) tokens = tokens.first(tokens.size() - 1);
  auto report = detect_repetition(tokens, params);
  if (report.detected) return report;
  if (result.termination != Termination::max_tokens || result.best.finished) return report;
  DetectorParams relaxed = params;
  relaxed.min_repeats = 2;
  return detect_repetition(tokens, relaxed);
}

}  // namespace

bool is_repetitive(const DecodeResult& result, const DetectorParams& params) {
  return trailing_loop(result, params).detected;
}

std::optional<LoopReference> reference_loop(const DecodeResult& result,
                                            const DetectorParams& params) {
  auto report = trailing_loop(result, params);
  if (!report.detected) return std::nullopt;
  return LoopReference{report.onset, std::move(report.unit)};
}

double repetition_rate(std::span<const DecodeResult> results, const DetectorParams& params) {
  if (results.empty()) throw InvalidArgument("repetition_rate needs at least one result");
  std::size_t hits = 0;
  for (const auto& r : results) hits += is_repetitive(r, params) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::optional<std::size_t> escape_time(const DecodeResult& result, const LoopReference& loop) {
  const auto& tokens = result.best.tokens;
  if (loop.onset > tokens.size()) throw InvalidArgument("loop onset lies beyond the sequence");
  if (loop.unit.empty()) return 0;
  std::size_t k = 0;
  while (loop.onset + k < tokens.size() &&
         tokens[loop.onset + k] == loop.unit[k % loop.unit.size()]) {
    ++k;
  }
  const bool ran_out = loop.onset + k == tokens.size();
  if (ran_out && k > 0 && !result.best.finished && result.termination == Termination::max_tokens) {
    return std::nullopt;
  }
  return k;
}

std::vector<double> self_reinforcement_curve(const ReinforcedMarkovModel& model,
                                             std::span<const TokenId> unit, std::size_t n) {
  if (unit.empty()) throw InvalidArgument("unit must not be empty");
  for (const TokenId t : unit) {
    if (t >= model.vocab_size()) throw InvalidArgument("unit token out of range");
  }
  std::vector<double> curve;
  curve.reserve(n);
  GenerationState state;
  for (std::size_t k = 0; k < n; ++k) {
    for (const TokenId t : unit) model.advance(state, t);
    curve.push_back(model.next_distribution(state)[unit.front()]);
  }
  return curve;
}

}  // namespace loopbreak
