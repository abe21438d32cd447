#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "loopbreak/decoders.hpp"
#include "loopbreak/markov_lm.hpp"
#include "loopbreak/workflow_sim.hpp"

namespace testsupport {

using namespace loopbreak;

// Random model with V tokens, a random EOS id and random reinforcement.
inline ReinforcedMarkovModel random_model(std::mt19937_64& rng, std::size_t v) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KernelSpec spec;
  spec.vocab_size = v;
  spec.eos = static_cast<TokenId>(rng() % v);
  spec.concentration = 0.2 + 2.0 * u(rng);
  spec.eos_concentration = 0.2 + 2.0 * u(rng);
  spec.seed = rng();
  auto k = generate_kernel(spec);
  const double gamma = 0.5 * u(rng);
  const std::size_t r_max = 1 + rng() % 10;
  return ReinforcedMarkovModel::create(v, k.transitions, gamma, r_max, spec.eos, k.start_row);
}

// Log-probabilities with a binary presence penalty, computed without the
// decoder's helpers.
inline std::vector<double> oracle_log_probs(const ReinforcedMarkovModel& m,
                                            const GenerationState& s,
                                            const std::vector<bool>& present, double penalty) {
  const auto p = m.next_distribution(s);
  std::vector<double> lp(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    lp[j] = p[j] > 0.0 ? std::log(p[j]) : -INFINITY;
  }
  if (penalty == 0.0) return lp;
  double z = 0.0;
  for (std::size_t j = 0; j < lp.size(); ++j) {
    if (present[j]) lp[j] -= penalty;
    z += std::exp(lp[j]);
  }
  for (double& x : lp) x -= std::log(z);
  return lp;
}

// Best terminal sequence by brute force: every sequence that ends in EOS
// within the horizon or reaches the horizon, ranked like the decoders rank
// hypotheses (score, then shorter, then lexicographic).
inline Hypothesis exhaustive_best(const ReinforcedMarkovModel& m, std::size_t horizon) {
  Hypothesis best;
  bool have = false;
  auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  };
  std::function<void(const GenerationState&, TokenSeq&, double)> walk =
      [&](const GenerationState& s, TokenSeq& toks, double score) {
        const auto lp = oracle_log_probs(m, s, std::vector<bool>(m.vocab_size(), false), 0.0);
        for (TokenId j = 0; j < m.vocab_size(); ++j) {
          if (lp[j] == -INFINITY) continue;
          const double sc = score + lp[j];
          toks.push_back(j);
          const bool done = j == m.eos() || toks.size() == horizon;
          if (done) {
            Hypothesis h{toks, sc, j == m.eos()};
            if (!have || better(h, best)) {
              best = h;
              have = true;
            }
          } else {
            GenerationState next = s;
            m.advance(next, j);
            walk(next, toks, sc);
          }
          toks.pop_back();
        }
      };
  TokenSeq toks;
  walk(GenerationState{}, toks, 0.0);
  return best;
}

// Non-overlapping occurrences by a byte-by-byte scan.
inline std::size_t naive_count(const std::string& hay, const std::string& needle) {
  if (needle.empty() || needle.size() > hay.size()) return 0;
  std::size_t n = 0;
  std::size_t i = 0;
  while (i + needle.size() <= hay.size()) {
    if (std::memcmp(hay.data() + i, needle.data(), needle.size()) == 0) {
      ++n;
      i += needle.size();
    } else {
      ++i;
    }
  }
  return n;
}

// Walks the workflow: the transaction-level step, then for each method a
// drill that recurses one level at a time, rule extraction and diagram
// generation, counting every model touch.
inline std::size_t walk_llm_calls(const WorkflowSpec& spec) {
  std::size_t touches = 0;
  auto touch = [&] { ++touches; };
  std::function<void(std::size_t)> drill = [&](std::size_t remaining) {
    if (remaining == 0) return;
    touch();
    drill(remaining - 1);
  };
  touch();  // transaction code
  for (std::size_t i = 0; i < spec.k; ++i) {
    drill(spec.depths[i]);
    touch();  // rules
    touch();  // plantuml
  }
  return touches;
}

}  // namespace testsupport
