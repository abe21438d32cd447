#include <doctest.h>

#include <random>

#include "loopbreak/error.hpp"
#include "loopbreak/metrics.hpp"
#include "loopbreak/repetition.hpp"

using namespace loopbreak;

namespace {

DecodeResult run(TokenSeq tokens, bool finished, Termination term) {
  DecodeResult r;
  r.best.tokens = std::move(tokens);
  r.best.finished = finished;
  r.termination = term;
  return r;
}

bool is_primitive(const TokenSeq& unit) {
  const std::size_t n = unit.size();
  for (std::size_t p = 1; p < n; ++p) {
    if (n % p != 0) continue;
    bool periodic = true;
    for (std::size_t i = p; i < n && periodic; ++i) periodic = unit[i] == unit[i - p];
    if (periodic) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("detect_repetition examples") {
  DetectorParams three{1, 64, 3};
  auto r = detect_repetition(TokenSeq{1, 2, 1, 2, 1, 2}, three);
  CHECK(r.detected);
  CHECK(r.period == 2);
  CHECK(r.repeats == 3);
  CHECK(r.onset == 0);
  CHECK(r.unit == TokenSeq{1, 2});

  r = detect_repetition(TokenSeq{9, 5, 5, 5, 5});
  CHECK(r.detected);
  CHECK(r.period == 1);
  CHECK(r.unit == TokenSeq{5});
  CHECK(r.repeats == 4);
  CHECK(r.onset == 1);

  CHECK_FALSE(detect_repetition(TokenSeq{1, 2, 3, 4}, DetectorParams{1, 64, 2}).detected);
  CHECK_FALSE(detect_repetition(TokenSeq{}).detected);

  // smallest period wins: period 1 x 4, not period 2 x 2
  r = detect_repetition(TokenSeq{7, 7, 7, 7}, DetectorParams{1, 64, 2});
  CHECK(r.period == 1);
  CHECK(r.repeats == 4);
}

TEST_CASE("periodic_suffix_length") {
  CHECK(periodic_suffix_length(TokenSeq{3, 1, 2, 1, 2}, 2) == 4);
  CHECK(periodic_suffix_length(TokenSeq{1, 2, 3}, 1) == 1);
  CHECK(periodic_suffix_length(TokenSeq{1, 2}, 5) == 2);
}

TEST_CASE("detector soundness on random sequences") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t v = 1 + rng() % 3;
    TokenSeq s(rng() % 40);
    for (auto& t : s) t = static_cast<TokenId>(rng() % v);
    DetectorParams params{1, 1 + rng() % 10, 1 + rng() % 5};
    const auto r = detect_repetition(s, params);
    if (!r.detected) continue;
    REQUIRE(r.unit.size() == r.period);
    CHECK(r.repeats >= params.min_repeats);
    CHECK(r.onset + r.period * r.repeats <= s.size());
    for (std::size_t c = 0; c < r.repeats; ++c) {
      for (std::size_t i = 0; i < r.period; ++i) {
        CHECK(s[r.onset + c * r.period + i] == r.unit[i]);
      }
    }
  }
}

TEST_CASE("detector completeness on constructions") {
  std::mt19937_64 rng(22);
  int checked = 0;
  while (checked < 1000) {
    // unit tokens 0..3, prefix tokens distinct and >= 10 so the prefix cannot
    // extend the loop
    TokenSeq unit(1 + rng() % 6);
    for (auto& t : unit) t = static_cast<TokenId>(rng() % 4);
    if (!is_primitive(unit)) continue;
    const std::size_t n = 4 + rng() % 6;
    TokenSeq s;
    const std::size_t prefix = rng() % 8;
    for (std::size_t i = 0; i < prefix; ++i) s.push_back(static_cast<TokenId>(10 + i));
    for (std::size_t c = 0; c < n; ++c) s.insert(s.end(), unit.begin(), unit.end());

    const auto r = detect_repetition(s);
    CHECK(r.detected);
    CHECK(r.period == unit.size());
    CHECK(r.repeats == n);
    CHECK(r.onset == prefix);
    ++checked;
  }
}

TEST_CASE("is_repetitive and repetition_rate") {
  const auto clean = run({4, 5, 6, 0}, true, Termination::eos);
  const auto looped = run({4, 5, 5, 5, 5, 5}, false, Termination::max_tokens);
  // terminal EOS is ignored by the detector
  const auto looped_then_eos = run({4, 5, 5, 5, 5, 0}, true, Termination::eos);
  // cut off while repeating twice
  const auto cut = run({1, 2, 3, 2, 3}, false, Termination::max_tokens);

  CHECK_FALSE(is_repetitive(clean));
  CHECK(is_repetitive(looped));
  CHECK(is_repetitive(looped_then_eos));
  CHECK(is_repetitive(cut));

  std::vector<DecodeResult> all_clean(5, clean);
  std::vector<DecodeResult> all_looped(5, looped);
  CHECK(repetition_rate(all_clean) == 0.0);
  CHECK(repetition_rate(all_looped) == 1.0);
  std::vector<DecodeResult> mixed{clean, looped, clean, cut};
  CHECK(repetition_rate(mixed) == 0.5);
  CHECK_THROWS_AS(repetition_rate(std::vector<DecodeResult>{}), InvalidArgument);

  const auto ref = reference_loop(looped);
  REQUIRE(ref);
  CHECK(ref->onset == 1);
  CHECK(ref->unit == TokenSeq{5});
  CHECK_FALSE(reference_loop(clean));
}

TEST_CASE("escape_time") {
  const LoopReference loop{1, {5}};
  CHECK_FALSE(escape_time(run({4, 5, 5, 5, 5, 5}, false, Termination::max_tokens), loop));
  CHECK(escape_time(run({4, 5, 5, 7, 0}, true, Termination::eos), loop) == 2u);
  CHECK(escape_time(run({4, 6, 7, 0}, true, Termination::eos), loop) == 0u);
  CHECK_THROWS_AS(escape_time(run({4}, true, Termination::eos), LoopReference{3, {5}}),
                  InvalidArgument);
}

TEST_CASE("self_reinforcement_curve") {
  auto build = [](double self, double gamma) {
    ReinforcedMarkovModel::Matrix m(3, std::vector<double>(3, 1.0 / 3.0));
    m[0] = {self, (1.0 - self) / 2.0, (1.0 - self) / 2.0};
    return ReinforcedMarkovModel::create(3, m, gamma, 10, 2);
  };
  const TokenSeq unit{0};

  const auto flat = self_reinforcement_curve(build(0.5, 0.0), unit, 12);
  for (const double p : flat) CHECK(p == flat.front());

  const auto rising = self_reinforcement_curve(build(0.5, 0.15), unit, 20);
  for (std::size_t i = 1; i < rising.size(); ++i) {
    // strictly increasing until alpha saturates at r_max
    if (i < 10) {
      CHECK(rising[i] > rising[i - 1]);
    } else {
      CHECK(rising[i] >= rising[i - 1]);
    }
  }

  const auto lo = self_reinforcement_curve(build(0.3, 0.15), unit, 20);
  const auto hi = self_reinforcement_curve(build(0.6, 0.15), unit, 20);
  for (std::size_t i = 0; i < lo.size(); ++i) CHECK(hi[i] >= lo[i]);

  CHECK_THROWS_AS(self_reinforcement_curve(build(0.5, 0.1), TokenSeq{}, 3), InvalidArgument);
}

TEST_CASE("curve is non-decreasing on random models and units") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 3 + rng() % 5;
    KernelSpec spec;
    spec.vocab_size = v;
    spec.seed = rng();
    spec.concentration = 0.5;
    const auto k = generate_kernel(spec);
    const double gamma = 0.3 * static_cast<double>(rng() % 100) / 100.0;
    auto m = ReinforcedMarkovModel::create(v, k.transitions, gamma, 10, 0, k.start_row);
    TokenSeq unit(1 + rng() % 3);
    for (auto& t : unit) t = static_cast<TokenId>(1 + rng() % (v - 1));
    const auto curve = self_reinforcement_curve(m, unit, 15);
    // the first copy may be below its own period, so compare from the second on
    for (std::size_t i = 2; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1] - 1e-15);
  }
}
