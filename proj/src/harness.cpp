#include "loopbreak/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <thread>

#include "loopbreak/error.hpp"
#include "loopbreak/metrics.hpp"
#include "loopbreak/seeding.hpp"
#include "loopbreak/theory.hpp"

namespace loopbreak {

namespace {

struct TrialOutcome {
  bool repetitive = false;
  std::size_t steps = 0;
  std::size_t expansions = 0;
  bool has_reference = false;
  std::optional<std::size_t> escape;
};

// Runs fn(i) for every trial on a small worker pool. Each slot is written by
// exactly one worker, so reduction order is fixed by trial index.
template <typename Fn>
void for_each_trial(std::size_t trials, Fn fn) {
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  if (workers == 1 || trials < 2 * workers) {
    for (std::size_t i = 0; i < trials; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < trials; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TrialOutcome measure(const DecodeResult& r, const std::optional<LoopReference>& loop,
                     const DetectorParams& detector) {
  TrialOutcome o;
  o.repetitive = is_repetitive(r, detector);
  o.steps = r.steps_taken;
  o.expansions = r.expansions;
  if (loop && loop->onset <= r.best.tokens.size()) {
    o.has_reference = true;
    o.escape = escape_time(r, *loop);
  } else if (loop) {
    // the run stopped before reaching the reference onset
    o.has_reference = true;
    o.escape = 0;
  }
  return o;
}

ExperimentRow reduce(const std::string& label, const std::vector<TrialOutcome>& outcomes) {
  ExperimentRow row;
  row.label = label;
  row.trials = outcomes.size();
  std::size_t hits = 0;
  double steps = 0.0;
  double work = 0.0;
  double escape_sum = 0.0;
  for (const auto& o : outcomes) {
    hits += o.repetitive ? 1 : 0;
    steps += static_cast<double>(o.steps);
    work += static_cast<double>(o.expansions);
    if (!o.has_reference) continue;
    if (o.escape) {
      escape_sum += static_cast<double>(*o.escape);
      ++row.escape_samples;
    } else {
      ++row.escape_never;
    }
  }
  const auto n = static_cast<double>(outcomes.size());
  row.rep_rate = static_cast<double>(hits) / n;
  row.mean_steps = steps / n;
  row.mean_expansions = work / n;
  if (row.escape_samples > 0)
    row.mean_escape = escape_sum / static_cast<double>(row.escape_samples);
  return row;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string fixed4(double x) { return fixed(x, 4); }

}  // namespace

void ExperimentGrid::validate() const {
  if (trials < 1) throw InvalidConfig("trials must be >= 1");
  if (horizon < 1) throw InvalidConfig("horizon must be >= 1");
  if (configs.empty()) throw InvalidConfig("grid has no decoder configurations");
  for (const auto& c : configs) c.decoder.validate();
}

ExperimentGrid default_grid(std::size_t trials, std::size_t horizon, std::uint64_t base_seed) {
  ExperimentGrid g;
  g.trials = trials;
  g.horizon = horizon;
  g.base_seed = base_seed;
  g.configs.push_back({"greedy", DecoderConfig::greedy(horizon)});
  for (const std::size_t b : {3, 5, 10}) {
    for (const auto mode : {EarlyStopping::True, EarlyStopping::False}) {
      g.configs.push_back({"beam" + std::to_string(b) + "_" + std::string(to_string(mode)),
                           DecoderConfig::beam(b, mode, horizon)});
    }
  }
  return g;
}

std::vector<ExperimentRow> run_ablation(const ModelConfig& model, const ExperimentGrid& grid) {
  grid.validate();
  const std::size_t nc = grid.configs.size();
  std::vector<std::vector<TrialOutcome>> outcomes(nc, std::vector<TrialOutcome>(grid.trials));
  for_each_trial(grid.trials, [&](std::size_t i) {
    const auto m = build_model(model, derive_seed(grid.base_seed, i));
    const auto reference = reference_loop(greedy_decode(m, {}, grid.horizon), grid.detector);
    for (std::size_t j = 0; j < nc; ++j) {
      DecoderConfig cfg = grid.configs[j].decoder;
      cfg.max_tokens = grid.horizon;
      cfg.seed = derive_seed(grid.base_seed, i, j + 1);
      outcomes[j][i] = measure(decode(m, {}, cfg), reference, grid.detector);
    }
  });
  std::vector<ExperimentRow> rows;
  for (std::size_t j = 0; j < nc; ++j) rows.push_back(reduce(grid.configs[j].label, outcomes[j]));
  return rows;
}

std::vector<ExperimentRow> run_penalty_sweep(const ModelConfig& model,
                                             const std::vector<double>& penalties,
                                             std::size_t trials, std::size_t horizon,
                                             std::uint64_t base_seed,
                                             const DetectorParams& detector) {
  if (penalties.empty()) throw InvalidArgument("penalty list is empty");
  for (const double p : penalties) {
    if (!(p >= 0.0)) throw InvalidArgument("presence penalty must be >= 0");
  }
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  const std::size_t np = penalties.size();
  std::vector<std::vector<TrialOutcome>> outcomes(np, std::vector<TrialOutcome>(trials));
  for_each_trial(trials, [&](std::size_t i) {
    const auto m = build_model(model, derive_seed(base_seed, i));
    const auto reference = reference_loop(greedy_decode(m, {}, horizon), detector);
    for (std::size_t j = 0; j < np; ++j) {
      outcomes[j][i] = measure(greedy_decode(m, {}, horizon, penalties[j]), reference, detector);
    }
  });
  std::vector<ExperimentRow> rows;
  for (std::size_t j = 0; j < np; ++j) {
    rows.push_back(reduce("presence_" + fixed4(penalties[j]), outcomes[j]));
  }
  return rows;
}

void write_rows_csv(const std::vector<ExperimentRow>& rows, std::ostream& out) {
  out << "label,trials,rep_rate,mean_steps,mean_expansions,mean_escape,escape_samples,escape_"
         "never\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.trials << ',' << fixed4(r.rep_rate) << ',' << fixed4(r.mean_steps)
        << ',' << fixed4(r.mean_expansions) << ','
        << (r.mean_escape ? fixed4(*r.mean_escape) : std::string("na")) << ','
        << r.escape_samples << ',' << r.escape_never << '\n';
  }
}

TheoryReport run_theory_report(const TheoryReportInputs& in) {
  const std::size_t kmin = min_beam_width(in.p_r, in.p_escape);
  const std::size_t width = beam_width_lower_bound(in.epsilon, in.p_n);
  const double simulated_escape =
      simulate_escape_probability(width, in.p_n, in.bound_trials, derive_seed(in.seed, 0, 99));
  const Overheads over = predict_overheads(in.beam_width);

  ExperimentGrid grid;
  grid.trials = in.trials;
  grid.horizon = in.horizon;
  grid.base_seed = in.seed;
  grid.configs.push_back({"greedy", DecoderConfig::greedy(in.horizon)});
  grid.configs.push_back({"beam" + std::to_string(in.beam_width) + "_True",
                          DecoderConfig::beam(in.beam_width, EarlyStopping::True, in.horizon)});
  const auto rows = run_ablation(in.model, grid);
  const auto& greedy = rows[0];
  const auto& beam = rows[1];

  std::ostringstream text;
  text << "theory report (model " << in.model.name << ", " << in.trials << " trials, horizon "
       << in.horizon << ", seed " << in.seed << ")\n\n";
  text << "k_min = ceil(log(1 - P_escape) / log(p_r)) with p_r = " << in.p_r
       << ", P_escape = " << in.p_escape << "\n";
  text << "  computed: " << kmin << "\n";
  text << "  reference: 3.2\n";
  text << "  note: the formula as written gives " << kmin
       << " in any log base; the published figure of about 3.2 does not follow from these inputs, "
          "and width 5 falls below the computed value\n\n";
  text << "B >= ceil(log(1/epsilon) / log(1/p_n)) with epsilon = " << in.epsilon
       << ", p_n = " << in.p_n << "\n";
  text << "  computed: " << width << "\n";
  text << "  simulated escape probability at that width: " << fixed4(simulated_escape)
       << " (target >= " << fixed4(1.0 - in.epsilon) << ", " << in.bound_trials << " trials)\n\n";
  text << "overheads at beam width " << in.beam_width << "\n";
  text << "  memory: " << over.memory_factor << "x\n";
  text << "  time: +" << fixed(over.time_low * 100.0, 1) << "% to +"
       << fixed(over.time_high * 100.0, 1) << "%\n\n";
  text << "simulated\n";
  text << "  greedy repetition rate: " << fixed4(greedy.rep_rate) << " (reference 0.7730)\n";
  text << "  " << beam.label << " repetition rate: " << fixed4(beam.rep_rate)
       << " (reference 0.0000)\n";
  text << "  " << beam.label << " mean escape time: "
       << (beam.mean_escape ? fixed4(*beam.mean_escape) : std::string("na"))
       << " steps over " << beam.escape_samples << " looping trials, " << beam.escape_never
       << " never (reference <= 5)\n";

  std::ostringstream csv;
  csv << "quantity,computed,reference\n";
  csv << "k_min," << kmin << ",3.2\n";
  csv << "beam_width_bound," << width << ",\n";
  csv << "bound_escape_probability," << fixed4(simulated_escape) << ',' << fixed4(1.0 - in.epsilon)
      << '\n';
  csv << "memory_factor," << fixed4(over.memory_factor) << ",\n";
  csv << "time_overhead_low," << fixed4(over.time_low) << ",\n";
  csv << "time_overhead_high," << fixed4(over.time_high) << ",\n";
  csv << "greedy_rep_rate," << fixed4(greedy.rep_rate) << ",0.7730\n";
  csv << "beam_true_rep_rate," << fixed4(beam.rep_rate) << ",0.0000\n";
  csv << "beam_true_mean_escape,"
      << (beam.mean_escape ? fixed4(*beam.mean_escape) : std::string("na")) << ",5\n";
  return {text.str(), csv.str()};
}

}  // namespace loopbreak
