#include "loopbreak/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "loopbreak/error.hpp"

namespace loopbreak {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

GenerationState prime(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt) {
  GenerationState state;
  state.tokens.reserve(prompt.size() + 64);
  for (const TokenId t : prompt) {
    if (t >= model.vocab_size()) throw InvalidArgument("prompt token out of range");
    model.advance(state, t);
  }
  return state;
}

/// Log next-token distribution with the presence penalty folded in.
void decoding_log_probs(const ReinforcedMarkovModel& model, const GenerationState& state,
                        std::span<const std::uint8_t> present, double penalty,
                        std::vector<double>& scratch, std::vector<double>& out) {
  scratch.resize(model.vocab_size());
  model.next_distribution(state, scratch);
  out.resize(scratch.size());
  for (std::size_t j = 0; j < scratch.size(); ++j) {
    out[j] = scratch[j] > 0.0 ? std::log(scratch[j]) : kNegInf;
  }
  if (penalty != 0.0) out = apply_presence_penalty(out, present, penalty);
}

std::size_t argmax_lowest(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < xs.size(); ++j) {
    if (xs[j] > xs[best]) best = j;
  }
  return best;
}

std::vector<double> trace_tail(const GenerationState& state, std::size_t prompt_len) {
  return {state.p_r_trace.begin() + static_cast<std::ptrdiff_t>(prompt_len),
          state.p_r_trace.end()};
}

TokenSeq tokens_tail(const GenerationState& state, std::size_t prompt_len) {
  return {state.tokens.begin() + static_cast<std::ptrdiff_t>(prompt_len), state.tokens.end()};
}

}  // namespace

std::string_view to_string(EarlyStopping mode) {
  switch (mode) {
    case EarlyStopping::True:
      return "True";
    case EarlyStopping::False:
      return "False";
    case EarlyStopping::Never:
    default:
      return "Never";
  }
}

EarlyStopping parse_early_stopping(std::string_view text) {
  if (text == "True" || text == "true") return EarlyStopping::True;
  if (text == "False" || text == "false") return EarlyStopping::False;
  if (text == "Never" || text == "never") return EarlyStopping::Never;
  throw InvalidConfig("early_stopping must be True, False or Never, got '" + std::string(text) +
                      "'");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::eos:
      return "eos";
    case Termination::max_tokens:
      return "max_tokens";
    case Termination::early_stop:
    default:
      return "early_stop";
  }
}

void DecoderConfig::validate() const {
  if (best_of < 1) throw InvalidConfig("best_of must be >= 1");
  if (max_tokens < 1) throw InvalidConfig("max_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw InvalidConfig("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidConfig("top_p must lie in (0, 1]");
  if (top_k == 0 || top_k < -1) throw InvalidConfig("top_k must be positive or -1");
  if (!(presence_penalty >= 0.0)) throw InvalidConfig("presence_penalty must be >= 0");
  if (use_beam_search) {
    if (temperature != 0.0) throw InvalidConfig("beam search requires temperature = 0");
    if (top_p != 1.0) throw InvalidConfig("beam search requires top_p = 1");
    if (top_k != -1) throw InvalidConfig("beam search requires top_k = -1");
  }
}

DecoderConfig DecoderConfig::greedy(std::size_t max_tokens, double presence_penalty) {
  DecoderConfig c;
  c.max_tokens = max_tokens;
  c.presence_penalty = presence_penalty;
  return c;
}

DecoderConfig DecoderConfig::beam(std::size_t best_of, EarlyStopping mode,
                                  std::size_t max_tokens) {
  DecoderConfig c;
  c.use_beam_search = true;
  c.best_of = best_of;
  c.early_stopping = mode;
  c.max_tokens = max_tokens;
  return c;
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

std::vector<double> apply_presence_penalty(std::span<const double> log_probs,
                                           std::span<const std::uint8_t> present,
                                           double penalty) {
  std::vector<double> out(log_probs.begin(), log_probs.end());
  if (penalty == 0.0) return out;
  for (std::size_t j = 0; j < out.size() && j < present.size(); ++j) {
    if (present[j]) out[j] -= penalty;
  }
  double mx = kNegInf;
  for (const double x : out) mx = std::max(mx, x);
  if (mx == kNegInf) return out;
  double sum = 0.0;
  for (const double x : out) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  for (double& x : out) x -= lse;
  return out;
}

DecodeResult greedy_decode(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
                           std::size_t max_tokens, double presence_penalty) {
  if (max_tokens < 1) throw InvalidArgument("max_tokens must be >= 1");
  if (!(presence_penalty >= 0.0)) throw InvalidArgument("presence_penalty must be >= 0");
  GenerationState state = prime(model, prompt);
  std::vector<std::uint8_t> present(model.vocab_size(), 0);
  std::vector<double> scratch;
  std::vector<double> logp;

  DecodeResult result;
  result.termination = Termination::max_tokens;
  for (std::size_t t = 0; t < max_tokens; ++t) {
    decoding_log_probs(model, state, present, presence_penalty, scratch, logp);
    const auto tok = static_cast<TokenId>(argmax_lowest(logp));
    result.best.score += logp[tok];
    result.best.tokens.push_back(tok);
    model.advance(state, tok);
    present[tok] = 1;
    ++result.expansions;
    if (tok == model.eos()) {
      result.best.finished = true;
      result.termination = Termination::eos;
      break;
    }
  }
  result.steps_taken = result.best.tokens.size();
  result.p_r_trace = trace_tail(state, prompt.size());
  if (result.best.finished) result.all_finished.push_back(result.best);
  return result;
}

namespace {

struct LiveHyp {
  GenerationState state;
  double score = 0.0;
  std::vector<std::uint8_t> present;
};

struct FinishedHyp {
  Hypothesis hyp;
  std::vector<double> trace;
};

struct Candidate {
  double score;
  std::size_t parent_rank;  // lexicographic rank of the parent among live hypotheses
  std::size_t parent;
  TokenId token;
};

}  // namespace

DecodeResult beam_search_decode(const ReinforcedMarkovModel& model,
                                std::span<const TokenId> prompt, const DecoderConfig& config) {
  config.validate();
  if (!config.use_beam_search) throw InvalidConfig("beam_search_decode needs use_beam_search");

  const std::size_t width = config.best_of;
  const std::size_t plen = prompt.size();
  const TokenId eos = model.eos();

  std::vector<LiveHyp> live;
  live.push_back({prime(model, prompt), 0.0, std::vector<std::uint8_t>(model.vocab_size(), 0)});
  std::vector<FinishedHyp> finished;

  std::vector<double> scratch;
  std::vector<double> logp;
  std::vector<Candidate> cands;
  std::vector<std::size_t> order;

  DecodeResult result;
  result.termination = Termination::max_tokens;
  bool stopped_early = false;

  std::size_t t = 0;
  while (t < config.max_tokens) {
    ++t;
    // live hypotheses all share one length, so a parent's lexicographic rank
    // decides ties between equally scored children of different parents
    order.resize(live.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return live[a].state.tokens < live[b].state.tokens;
    });
    std::vector<std::size_t> lex_rank(live.size());
    for (std::size_t r = 0; r < order.size(); ++r) lex_rank[order[r]] = r;

    cands.clear();
    for (std::size_t i = 0; i < live.size(); ++i) {
      decoding_log_probs(model, live[i].state, live[i].present, config.presence_penalty, scratch,
                         logp);
      for (std::size_t j = 0; j < logp.size(); ++j) {
        if (logp[j] == kNegInf) continue;
        cands.push_back({live[i].score + logp[j], lex_rank[i], i, static_cast<TokenId>(j)});
      }
    }
    result.expansions += live.size();

    auto better = [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent_rank != b.parent_rank) return a.parent_rank < b.parent_rank;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(cands.size(), 2 * width);
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), better);

    std::vector<LiveHyp> next;
    next.reserve(width);
    for (std::size_t r = 0; r < keep; ++r) {
      const Candidate& c = cands[r];
      const LiveHyp& parent = live[c.parent];
      if (c.token == eos) {
        if (r >= width) continue;
        GenerationState done = parent.state;
        model.advance(done, c.token);
        finished.push_back(
            {Hypothesis{tokens_tail(done, plen), c.score, true}, trace_tail(done, plen)});
        continue;
      }
      if (next.size() < width) {
        LiveHyp child{parent.state, c.score, parent.present};
        model.advance(child.state, c.token);
        child.present[c.token] = 1;
        next.push_back(std::move(child));
      }
    }
    live = std::move(next);

    if (live.empty()) {
      result.termination = Termination::eos;
      break;
    }
    if (config.early_stopping == EarlyStopping::True && finished.size() >= width) {
      stopped_early = true;
      break;
    }
    if (config.early_stopping == EarlyStopping::False && !finished.empty()) {
      double best_banked = kNegInf;
      for (const auto& f : finished) best_banked = std::max(best_banked, f.hyp.score);
      const bool can_improve = std::any_of(live.begin(), live.end(), [&](const LiveHyp& h) {
        return h.score > best_banked;
      });
      if (!can_improve) {
        stopped_early = true;
        break;
      }
    }
  }
  result.steps_taken = t;
  if (stopped_early) result.termination = Termination::early_stop;

  std::sort(finished.begin(), finished.end(), [](const FinishedHyp& a, const FinishedHyp& b) {
    return ranks_before(a.hyp, b.hyp);
  });

  // True returns the best banked hypothesis; otherwise live ones compete too.
  const bool finished_only =
      stopped_early && config.early_stopping == EarlyStopping::True && !finished.empty();
  bool have_best = false;
  if (!finished.empty()) {
    result.best = finished.front().hyp;
    result.p_r_trace = finished.front().trace;
    have_best = true;
  }
  if (!finished_only) {
    for (const auto& h : live) {
      Hypothesis cand{tokens_tail(h.state, plen), h.score, false};
      if (!have_best || ranks_before(cand, result.best)) {
        result.best = std::move(cand);
        result.p_r_trace = trace_tail(h.state, plen);
        have_best = true;
      }
    }
  }

  for (std::size_t i = 0; i < finished.size() && i < width; ++i) {
    result.all_finished.push_back(finished[i].hyp);
  }
  return result;
}

DecodeResult sample_decode(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
                           const DecoderConfig& config) {
  config.validate();
  if (config.use_beam_search) throw InvalidConfig("sample_decode cannot run with beam search");

  GenerationState state = prime(model, prompt);
  std::vector<std::uint8_t> present(model.vocab_size(), 0);
  std::vector<double> scratch;
  std::vector<double> logp;
  std::vector<double> weights(model.vocab_size());
  std::vector<std::size_t> order(model.vocab_size());
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  DecodeResult result;
  result.termination = Termination::max_tokens;
  for (std::size_t t = 0; t < config.max_tokens; ++t) {
    decoding_log_probs(model, state, present, config.presence_penalty, scratch, logp);

    std::size_t tok = 0;
    if (config.temperature == 0.0) {
      tok = argmax_lowest(logp);
    } else {
      // candidates ordered by scaled log-prob, lowest id first on ties
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return logp[a] > logp[b]; });
      std::size_t kept = order.size();
      while (kept > 0 && logp[order[kept - 1]] == kNegInf) --kept;
      if (config.top_k != -1) kept = std::min(kept, static_cast<std::size_t>(config.top_k));

      const double mx = logp[order[0]] / config.temperature;
      double total = 0.0;
      for (std::size_t r = 0; r < kept; ++r) {
        weights[r] = std::exp(logp[order[r]] / config.temperature - mx);
        total += weights[r];
      }
      if (config.top_p < 1.0) {
        double cum = 0.0;
        std::size_t nucleus = 0;
        while (nucleus < kept) {
          cum += weights[nucleus] / total;
          ++nucleus;
          if (cum >= config.top_p) break;
        }
        kept = nucleus;
        total = std::accumulate(weights.begin(),
                                weights.begin() + static_cast<std::ptrdiff_t>(kept), 0.0);
      }
      // inverse-CDF draw; std::discrete_distribution is not portable across
      // standard libraries
      const double u = uniform(rng) * total;
      double cum = 0.0;
      std::size_t r = 0;
      for (; r + 1 < kept; ++r) {
        cum += weights[r];
        if (u < cum) break;
      }
      tok = order[r];
    }

    result.best.score += logp[tok];
    result.best.tokens.push_back(static_cast<TokenId>(tok));
    model.advance(state, static_cast<TokenId>(tok));
    present[tok] = 1;
    ++result.expansions;
    if (tok == model.eos()) {
      result.best.finished = true;
      result.termination = Termination::eos;
      break;
    }
  }
  result.steps_taken = result.best.tokens.size();
  result.p_r_trace = trace_tail(state, prompt.size());
  if (result.best.finished) result.all_finished.push_back(result.best);
  return result;
}

DecodeResult decode(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
                    const DecoderConfig& config) {
  if (config.use_beam_search) return beam_search_decode(model, prompt, config);
  return sample_decode(model, prompt, config);
}

double rescore(const ReinforcedMarkovModel& model, std::span<const TokenId> prompt,
               std::span<const TokenId> generated, double presence_penalty) {
  GenerationState state = prime(model, prompt);
  std::vector<std::uint8_t> present(model.vocab_size(), 0);
  std::vector<double> scratch;
  std::vector<double> logp;
  double score = 0.0;
  for (const TokenId t : generated) {
    decoding_log_probs(model, state, present, presence_penalty, scratch, logp);
    score += logp.at(t);
    model.advance(state, t);
    present[t] = 1;
  }
  return score;
}

}  // namespace loopbreak
