#include "loopbreak/markov_lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "loopbreak/error.hpp"
#include "loopbreak/seeding.hpp"

namespace loopbreak {

namespace {

constexpr double kRowTolerance = 1e-9;

void check_row(std::span<const double> row, std::size_t vocab, const std::string& label) {
  if (row.size() != vocab) {
    std::ostringstream os;
    os << label << " has " << row.size() << " entries, expected " << vocab;
    throw InvalidModel(os.str());
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double p = row[j];
    if (!(p >= 0.0 && p <= 1.0)) {
      std::ostringstream os;
      os << label << " entry " << j << " = " << p << " is outside [0, 1]";
      throw InvalidModel(os.str());
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << label << " sums to " << sum << ", not 1";
    throw InvalidModel(os.str());
  }
}

}  // namespace

ReinforcedMarkovModel ReinforcedMarkovModel::create(std::size_t vocab_size,
                                                    const Matrix& base_transitions, double gamma,
                                                    std::size_t r_max, TokenId eos,
                                                    std::optional<std::vector<double>> start_row,
                                                    AlphaForm form) {
  if (vocab_size < 2) throw InvalidModel("vocab_size must be at least 2");
  if (eos >= vocab_size) throw InvalidModel("eos token id is out of range");
  if (base_transitions.size() != vocab_size) {
    std::ostringstream os;
    os << "transition matrix has " << base_transitions.size() << " rows, expected " << vocab_size;
    throw InvalidModel(os.str());
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidModel("gamma must be >= 0");
  if (r_max < 1) throw InvalidModel("r_max must be >= 1");

  ReinforcedMarkovModel m;
  m.vocab_ = vocab_size;
  m.eos_ = eos;
  m.gamma_ = gamma;
  m.r_max_ = r_max;
  m.form_ = form;
  m.rows_.reserve((vocab_size + 1) * vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    check_row(base_transitions[i], vocab_size, "row " + std::to_string(i));
    m.rows_.insert(m.rows_.end(), base_transitions[i].begin(), base_transitions[i].end());
  }

  std::vector<double> start;
  if (start_row) {
    start = std::move(*start_row);
  } else {
    start.assign(vocab_size, 1.0 / static_cast<double>(vocab_size - 1));
    start[eos] = 0.0;
  }
  check_row(start, vocab_size, "start row");
  m.rows_.insert(m.rows_.end(), start.begin(), start.end());
  return m;
}

std::span<const double> ReinforcedMarkovModel::row(TokenId token) const {
  if (token >= vocab_) throw InvalidArgument("token id out of range");
  return {rows_.data() + static_cast<std::size_t>(token) * vocab_, vocab_};
}

std::span<const double> ReinforcedMarkovModel::start_row() const {
  return {rows_.data() + vocab_ * vocab_, vocab_};
}

double ReinforcedMarkovModel::alpha(std::size_t r) const {
  const auto capped = static_cast<double>(std::min(r, r_max_));
  switch (form_) {
    case AlphaForm::geometric:
      return std::pow(1.0 + gamma_, capped);
    case AlphaForm::linear:
    default:
      return 1.0 + gamma_ * capped;
  }
}

std::optional<TokenId> ReinforcedMarkovModel::continuing_token(const GenerationState& state) {
  if (state.rep_count == 0 || state.rep_unit.empty()) return std::nullopt;
  return state.tokens[state.tokens.size() - state.rep_unit.size()];
}

void ReinforcedMarkovModel::next_distribution(const GenerationState& state,
                                              std::span<double> out) const {
  const auto base = state.tokens.empty() ? start_row() : row(state.tokens.back());
  std::copy(base.begin(), base.end(), out.begin());
  const auto cont = continuing_token(state);
  if (!cont) return;
  const double a = alpha(state.rep_count);
  if (a == 1.0) return;
  const double boosted = out[*cont] * a;
  const double norm = 1.0 + out[*cont] * (a - 1.0);
  for (double& p : out) p /= norm;
  out[*cont] = boosted / norm;
}

std::vector<double> ReinforcedMarkovModel::next_distribution(const GenerationState& state) const {
  std::vector<double> out(vocab_);
  next_distribution(state, out);
  return out;
}

void ReinforcedMarkovModel::advance(GenerationState& state, TokenId token) const {
  if (token >= vocab_) throw InvalidArgument("token id out of range");

  double realized = 0.0;
  if (const auto cont = continuing_token(state)) {
    const auto dist = next_distribution(state);
    realized = dist[*cont];
  }
  state.p_r_trace.push_back(realized);

  const auto cont = continuing_token(state);
  state.tokens.push_back(token);
  const std::size_t n = state.tokens.size();

  if (cont && *cont == token) {
    // still inside the active cycle
    state.rep_count = (n - state.rep_onset) / state.rep_unit.size();
    return;
  }

  const auto report = detect_repetition(
      state.tokens, DetectorParams{1, std::min(kMaxTrackedPeriod, n / 2), 2});
  if (report.detected) {
    state.rep_unit = report.unit;
    state.rep_count = report.repeats;
    state.rep_onset = report.onset;
  } else {
    state.rep_unit.clear();
    state.rep_count = 0;
    state.rep_onset = 0;
  }
}

double alpha(const ReinforcedMarkovModel& model, std::size_t r) { return model.alpha(r); }

GenerationState step(const GenerationState& state, TokenId token,
                     const ReinforcedMarkovModel& model) {
  GenerationState next = state;
  model.advance(next, token);
  return next;
}

GeneratedKernel generate_kernel(const KernelSpec& spec) {
  if (spec.vocab_size < 2) throw InvalidModel("vocab_size must be at least 2");
  if (spec.eos >= spec.vocab_size) throw InvalidModel("eos token id is out of range");
  if (!(spec.concentration > 0.0) || !(spec.eos_concentration > 0.0)) {
    throw InvalidModel("concentrations must be positive");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t v = spec.vocab_size;

  // Dirichlet via log-space gamma draws: log G(a) = log G(a + 1) + log(U) / a
  // keeps tiny concentrations from underflowing to an all-zero row.
  auto dirichlet_row = [&](bool allow_eos) {
    std::vector<double> logs(v, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < v; ++j) {
      const bool is_eos = j == spec.eos;
      if (is_eos && !allow_eos) continue;
      const double a = is_eos ? spec.eos_concentration : spec.concentration;
      std::gamma_distribution<double> g(a + 1.0, 1.0);
      double u = unit(rng);
      while (u <= 0.0) u = unit(rng);
      logs[j] = std::log(g(rng)) + std::log(u) / a;
    }
    const double mx = *std::max_element(logs.begin(), logs.end());
    std::vector<double> row(v, 0.0);
    double sum = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      row[j] = std::exp(logs[j] - mx);
      sum += row[j];
    }
    for (double& p : row) p /= sum;
    return row;
  };

  GeneratedKernel out;
  out.transitions.reserve(v);
  for (std::size_t i = 0; i < v; ++i) out.transitions.push_back(dirichlet_row(true));
  out.start_row = dirichlet_row(false);
  return out;
}

TrapKernel generate_trap_kernel(const TrapSpec& spec) {
  const std::size_t v = spec.kernel.vocab_size;
  if (spec.chain_min < 1 || spec.chain_min > spec.chain_max) {
    throw InvalidModel("chain length range is empty");
  }
  if (v < 2 || spec.chain_max > v - 1) throw InvalidModel("chain does not fit in the vocabulary");
  if (!(spec.forward >= 0.0 && spec.forward <= 1.0))
    throw InvalidModel("forward must lie in [0, 1]");
  if (!(spec.trap_probability >= 0.0 && spec.trap_probability <= 1.0)) {
    throw InvalidModel("trap_probability must lie in [0, 1]");
  }
  if (!(spec.log_odds_min <= spec.log_odds_max)) throw InvalidModel("log-odds range is empty");

  TrapKernel out;
  static_cast<GeneratedKernel&>(out) = generate_kernel(spec.kernel);

  std::mt19937_64 rng(splitmix64(spec.kernel.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto eos = spec.kernel.eos;

  std::uniform_int_distribution<std::size_t> len(spec.chain_min, spec.chain_max);
  const std::size_t m = len(rng);
  TokenSeq pool;
  for (TokenId t = 0; t < v; ++t) {
    if (t != eos) pool.push_back(t);
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  out.chain.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));

  out.has_trap = unit(rng) < spec.trap_probability;
  out.trap_index = std::min(static_cast<std::size_t>(unit(rng) * static_cast<double>(m)), m - 1);
  const double log_odds = spec.log_odds_min + (spec.log_odds_max - spec.log_odds_min) * unit(rng);
  std::uniform_int_distribution<std::size_t> span(0, std::min(spec.max_loop_span, out.trap_index));
  out.loop_target = out.chain[out.trap_index - span(rng)];
  out.loop_share = 1.0 / (1.0 + std::exp(-log_odds));
  if (!out.has_trap) {
    out.trap_index = 0;
    out.loop_target = 0;
    out.loop_share = 0.0;
  }

  auto plant = [&](std::vector<double>& row, TokenId next, std::optional<TokenId> loop) {
    for (double& p : row) p *= 1.0 - spec.forward;
    if (loop) {
      row[*loop] += spec.forward * out.loop_share;
      row[next] += spec.forward * (1.0 - out.loop_share);
    } else {
      row[next] += spec.forward;
    }
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& p : row) p /= sum;
  };

  plant(out.start_row, out.chain.front(), std::nullopt);
  for (std::size_t j = 0; j < m; ++j) {
    const TokenId next = j + 1 < m ? out.chain[j + 1] : eos;
    const bool trap_row = out.has_trap && j == out.trap_index;
    plant(out.transitions[out.chain[j]], next,
          trap_row ? std::optional<TokenId>(out.loop_target) : std::nullopt);
  }
  return out;
}

}  // namespace loopbreak
