#include "loopbreak/workflow_sim.hpp"

#include <json.hpp>
#include <random>

#include "loopbreak/error.hpp"
#include "loopbreak/seeding.hpp"

namespace loopbreak {

namespace {

void check_range(const StageRange& r, const char* name) {
  if (!(r.min_seconds >= 0.0) || !(r.min_seconds <= r.max_seconds)) {
    throw InvalidConfig(std::string("stage ") + name + " needs 0 <= min <= max");
  }
}

const StageRange& range_of(const StageTimeModel& times, Stage s) {
  switch (s) {
    case Stage::drill:
      return times.drill;
    case Stage::rules:
      return times.rules;
    case Stage::plantuml_code:
      return times.plantuml_code;
    case Stage::transaction_code:
    default:
      return times.transaction_code;
  }
}

WorkflowSpec pattern_spec(std::size_t k, const std::vector<std::size_t>& pattern) {
  WorkflowSpec spec;
  spec.k = k;
  for (std::size_t i = 0; i < k; ++i) spec.depths.push_back(pattern[i % pattern.size()]);
  return spec;
}

}  // namespace

void WorkflowSpec::validate() const {
  if (depths.size() != k) {
    throw InvalidConfig("depths has " + std::to_string(depths.size()) + " entries, expected k = " +
                        std::to_string(k));
  }
}

void StageTimeModel::validate() const {
  check_range(drill, "drill");
  check_range(rules, "rules");
  check_range(plantuml_code, "plantuml_code");
  check_range(transaction_code, "transaction_code");
}

void StallModel::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw InvalidConfig("stall probability must lie in [0, 1]");
  }
  if (!(seconds >= 0.0)) throw InvalidConfig("stall duration must be >= 0");
}

std::size_t total_llm_calls(const WorkflowSpec& spec) {
  spec.validate();
  std::size_t calls = 1;
  for (const std::size_t d : spec.depths) calls += d + 1 + 1;
  return calls;
}

std::vector<Stage> call_sequence(const WorkflowSpec& spec) {
  spec.validate();
  std::vector<Stage> calls;
  for (const std::size_t d : spec.depths) {
    calls.insert(calls.end(), d, Stage::drill);
    calls.push_back(Stage::rules);
    calls.push_back(Stage::plantuml_code);
  }
  calls.push_back(Stage::transaction_code);
  return calls;
}

TransactionOutcome run_transaction(const WorkflowSpec& spec, const StageTimeModel& times,
                                   const StallModel& stall, std::uint64_t seed) {
  times.validate();
  stall.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TransactionOutcome out;
  double seconds = 0.0;
  for (const Stage s : call_sequence(spec)) {
    const auto& r = range_of(times, s);
    const double sampled = r.min_seconds + (r.max_seconds - r.min_seconds) * unit(rng);
    const bool stalled = unit(rng) < stall.probability;
    seconds += stalled ? stall.seconds : sampled;
    out.stalls += stalled ? 1 : 0;
  }
  out.minutes = seconds / 60.0;
  return out;
}

double simulate_transaction(const WorkflowSpec& spec, const StageTimeModel& times,
                            const StallModel& stall, std::uint64_t seed) {
  return run_transaction(spec, times, stall, seed).minutes;
}

BatchReport simulate_batch(std::size_t n_transactions, const WorkflowSpec& spec,
                           const StageTimeModel& times, const StallModel& stall,
                           std::uint64_t seed) {
  if (n_transactions == 0) throw InvalidArgument("a batch needs at least one transaction");
  BatchReport report;
  report.per_transaction.reserve(n_transactions);
  for (std::size_t t = 0; t < n_transactions; ++t) {
    const auto o = run_transaction(spec, times, stall, derive_seed(seed, t));
    report.per_transaction.push_back(o.minutes);
    report.total_minutes += o.minutes;
    report.stall_events += o.stalls;
  }
  report.any_stall = report.stall_events > 0;
  return report;
}

WorkflowConfig builtin_workflow(const std::string& name) {
  // 64 methods at depths 2,3,4,3 repeating: 321 calls and ~27.85 min per
  // transaction; stall rates solve 1 - (1 - q)^(20 * 321) = batch rate.
  WorkflowConfig c;
  c.name = name;
  c.spec = pattern_spec(64, {2, 3, 4, 3});
  if (name == "default") return c;
  if (name == "mode1") {
    c.stall = {0.0002506598431898377, 5400.0};
    return c;
  }
  if (name == "mode2") {
    c.stall = {0.0002159103891054004, 1500.0};
    return c;
  }
  throw InvalidConfig("unknown built-in workflow '" + name + "'");
}

WorkflowConfig parse_workflow_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(std::string("workflow config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidConfig("workflow config must be an object");
  try {
    WorkflowConfig c;
    c.name = doc.value("name", std::string("custom"));
    if (!doc.contains("k")) throw InvalidConfig("workflow config is missing 'k'");
    c.spec.k = doc.at("k").get<std::size_t>();
    if (doc.contains("depths")) {
      c.spec.depths = doc.at("depths").get<std::vector<std::size_t>>();
    } else if (doc.contains("depths_pattern")) {
      const auto pattern = doc.at("depths_pattern").get<std::vector<std::size_t>>();
      if (pattern.empty() && c.spec.k > 0) throw InvalidConfig("depths_pattern is empty");
      c.spec = pattern_spec(c.spec.k, pattern);
    } else {
      throw InvalidConfig("workflow config needs 'depths' or 'depths_pattern'");
    }
    c.spec.validate();
    if (doc.contains("stages")) {
      const auto& st = doc.at("stages");
      auto read = [&](const char* key, StageRange& r) {
        if (!st.contains(key)) return;
        const auto v = st.at(key).get<std::vector<double>>();
        if (v.size() != 2) throw InvalidConfig(std::string("stage ") + key + " needs [min, max]");
        r = {v[0], v[1]};
      };
      read("drill", c.times.drill);
      read("rules", c.times.rules);
      read("plantuml_code", c.times.plantuml_code);
      read("transaction_code", c.times.transaction_code);
    }
    c.times.validate();
    c.stall.probability = doc.value("stall_probability", 0.0);
    c.stall.seconds = doc.value("stall_seconds", 0.0);
    c.stall.validate();
    c.transactions_per_batch = doc.value("transactions_per_batch", std::size_t{20});
    if (c.transactions_per_batch == 0) throw InvalidConfig("transactions_per_batch must be >= 1");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("workflow config: ") + e.what());
  }
}

}  // namespace loopbreak
