#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "loopbreak/repetition.hpp"

namespace loopbreak {

/// Shape of the repetition amplification alpha(r).
enum class AlphaForm {
  linear,     ///< 1 + gamma * min(r, r_max)
  geometric,  ///< (1 + gamma) ^ min(r, r_max)
};

/// Longest repeating unit the model tracks when re-detecting a loop.
inline constexpr std::size_t kMaxTrackedPeriod = 64;

/// Token history plus the active repetition bookkeeping. Mutated by
/// `advance`; `step` is the value-returning form.
struct GenerationState {
  TokenSeq tokens;
  std::size_t rep_count = 0;
  TokenSeq rep_unit;
  std::vector<double> p_r_trace;
  /// Start of the periodic region backing `rep_unit` (valid iff rep_count > 0).
  std::size_t rep_onset = 0;
};

/// Markov language model whose next-token row is biased toward continuing
/// whatever unit the history is currently repeating. Immutable once built.
class ReinforcedMarkovModel {
 public:
  using Matrix = std::vector<std::vector<double>>;

  /// Validates and builds a model. `start_row` is the distribution of the
  /// first token of an empty history; when omitted it is uniform over the
  /// non-EOS tokens. Throws InvalidModel on any violated invariant.
  static ReinforcedMarkovModel create(std::size_t vocab_size, const Matrix& base_transitions,
                                      double gamma, std::size_t r_max, TokenId eos,
                                      std::optional<std::vector<double>> start_row = std::nullopt,
                                      AlphaForm form = AlphaForm::linear);

  std::size_t vocab_size() const noexcept { return vocab_; }
  TokenId eos() const noexcept { return eos_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t r_max() const noexcept { return r_max_; }
  AlphaForm alpha_form() const noexcept { return form_; }

  /// Base row for `token`.
  std::span<const double> row(TokenId token) const;
  std::span<const double> start_row() const;

  double alpha(std::size_t r) const;

  /// Next-token distribution for `state`: the base row of the last token
  /// (or the start row) with the continuing token scaled by alpha(rep_count)
  /// and renormalized.
  std::vector<double> next_distribution(const GenerationState& state) const;
  void next_distribution(const GenerationState& state, std::span<double> out) const;

  /// Token that would continue the active unit, if one is active.
  static std::optional<TokenId> continuing_token(const GenerationState& state);

  /// Appends `token` and updates the repetition bookkeeping in place.
  void advance(GenerationState& state, TokenId token) const;

 private:
  ReinforcedMarkovModel() = default;

  std::size_t vocab_ = 0;
  TokenId eos_ = 0;
  double gamma_ = 0.0;
  std::size_t r_max_ = 1;
  AlphaForm form_ = AlphaForm::linear;
  std::vector<double> rows_;  // (vocab_ + 1) x vocab_, last row is the start row
};

double alpha(const ReinforcedMarkovModel& model, std::size_t r);

GenerationState step(const GenerationState& state, TokenId token,
                     const ReinforcedMarkovModel& model);

/// Parameters of the reproducible random kernel generator. Each row is a
/// Dirichlet draw with `concentration` on every non-EOS token and
/// `eos_concentration` on EOS; the start row never puts mass on EOS.
struct KernelSpec {
  std::size_t vocab_size = 50;
  TokenId eos = 0;
  double concentration = 0.1;
  double eos_concentration = 0.1;
  std::uint64_t seed = 0;
};

struct GeneratedKernel {
  ReinforcedMarkovModel::Matrix transitions;
  std::vector<double> start_row;
};

GeneratedKernel generate_kernel(const KernelSpec& spec);

/// A random kernel with a planted answer: a chain of distinct tokens ending
/// in EOS that the start row and chain rows favor with weight `forward`.
/// With probability `trap_probability` one chain row splits its forward
/// weight between the next chain token and a loop-back target at most
/// `max_loop_span` tokens behind it, with log-odds drawn uniformly from
/// [log_odds_min, log_odds_max].
struct TrapSpec {
  KernelSpec kernel;
  std::size_t chain_min = 6;
  std::size_t chain_max = 10;
  double forward = 0.99;
  double trap_probability = 0.86;
  double log_odds_min = -1.0;
  double log_odds_max = 9.2;
  std::size_t max_loop_span = 3;
};

struct TrapKernel : GeneratedKernel {
  TokenSeq chain;  ///< answer tokens, EOS not included
  bool has_trap = false;
  std::size_t trap_index = 0;  ///< chain position of the trap row
  TokenId loop_target = 0;
  double loop_share = 0.0;  ///< fraction of `forward` sent to the loop target
};

TrapKernel generate_trap_kernel(const TrapSpec& spec);

}  // namespace loopbreak
