#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loopbreak/markov_lm.hpp"

namespace loopbreak {

/// Values of the serving-engine `early_stopping` flag.
enum class EarlyStopping {
  True,   ///< stop once `best_of` finished hypotheses are banked
  False,  ///< stop once no live hypothesis can beat the best banked one
  Never,  ///< run until every live hypothesis finishes or max_tokens
};

std::string_view to_string(EarlyStopping mode);
EarlyStopping parse_early_stopping(std::string_view text);

/// Flat decoding parameters, named after the serving-engine fields.
struct DecoderConfig {
  bool use_beam_search = false;
  std::size_t best_of = 1;
  double temperature = 0.0;
  double top_p = 1.0;
  std::int64_t top_k = -1;
  EarlyStopping early_stopping = EarlyStopping::True;
  double presence_penalty = 0.0;
  std::size_t max_tokens = 256;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig. Beam search requires temperature 0, top_p 1 and
  /// top_k -1.
  void validate() const;

  static DecoderConfig greedy(std::size_t max_tokens, double presence_penalty = 0.0);
  static DecoderConfig beam(std::size_t best_of, EarlyStopping mode, std::size_t max_tokens);
};

struct Hypothesis {
  TokenSeq tokens;  ///< generated tokens only, EOS included when finished
  double score = 0.0;
  bool finished = false;
};

enum class Termination { eos, max_tokens, early_stop };

std::string_view to_string(Termination t);

struct DecodeResult {
  Hypothesis best;
  std::vector<Hypothesis> all_finished;  ///< best first, at most best_of entries
  std::size_t steps_taken = 0;
  Termination termination = Termination::eos;
  std::vector<double> p_r_trace;  ///< one entry per generated token of `best`
  std::size_t expansions = 0;     ///< hypotheses expanded over the whole search
};

/// Log-probabilities with `penalty` subtracted from every token flagged in
/// `present`, renormalized. A zero penalty returns the input untouched.
std::vector<double> apply_presence_penalty(std::span<const double> log_probs,
                                           std::span<const std::uint8_t> present, double penalty);

DecodeResult greedy_decode(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
                           std::size_t max_tokens, double presence_penalty = 0.0);

DecodeResult beam_search_decode(const ReinforcedMarkovModel& model,
                                std::span<const TokenId> prompt, const DecoderConfig& config);

DecodeResult sample_decode(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
                           const DecoderConfig& config);

/// Dispatches on `config.use_beam_search`.
DecodeResult decode(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
                    const DecoderConfig& config);

/// Recomputes a hypothesis score from scratch by replaying its tokens.
double rescore(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
               std::span<const TokenId> generated, double presence_penalty = 0.0);

/// Total order used to rank hypotheses: higher score first, then shorter,
/// then lexicographically smaller.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);

}  // namespace loopbreak
