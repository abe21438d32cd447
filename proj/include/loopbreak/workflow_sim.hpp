#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace loopbreak {

/// A transaction touching `k` service methods; method i is drilled to
/// depth depths[i].
struct WorkflowSpec {
  std::size_t k = 0;
  std::vector<std::size_t> depths;

  void validate() const;  ///< throws InvalidConfig
};

struct StageRange {
  double min_seconds = 0.0;
  double max_seconds = 0.0;
};

struct StageTimeModel {
  StageRange drill{2.0, 5.0};
  StageRange rules{3.0, 14.0};
  StageRange plantuml_code{5.0, 9.0};
  StageRange transaction_code{5.0, 9.0};

  void validate() const;
};

/// A stalled call runs to the token limit and costs `seconds` instead of its
/// sampled duration.
struct StallModel {
  double probability = 0.0;
  double seconds = 0.0;

  void validate() const;
};

/// One transaction-level call plus, per method, its drill calls, one rules
/// call and one diagram call.
std::size_t total_llm_calls(const WorkflowSpec& spec);

enum class Stage { drill, rules, plantuml_code, transaction_code };

/// The calls of one transaction in execution order.
std::vector<Stage> call_sequence(const WorkflowSpec& spec);

struct TransactionOutcome {
  double minutes = 0.0;
  std::size_t stalls = 0;
};

TransactionOutcome run_transaction(const WorkflowSpec& spec, const StageTimeModel& times,
                                   const StallModel& stall, std::uint64_t seed);

/// Minutes spent on one transaction. Every call draws its duration and its
/// stall decision from the seeded stream, so runs with the same seed are
/// coupled across stall settings.
double simulate_transaction(const WorkflowSpec& spec, const StageTimeModel& times,
                            const StallModel& stall, std::uint64_t seed);

struct BatchReport {
  double total_minutes = 0.0;
  std::vector<double> per_transaction;
  std::size_t stall_events = 0;
  bool any_stall = false;
};

/// Transactions run back to back; transaction t uses a seed derived from
/// (seed, t). Throws InvalidArgument when n_transactions is 0.
BatchReport simulate_batch(std::size_t n_transactions, const WorkflowSpec& spec,
                           const StageTimeModel& times, const StallModel& stall,
                           std::uint64_t seed);

struct WorkflowConfig {
  std::string name = "default";
  WorkflowSpec spec;
  StageTimeModel times;
  StallModel stall;
  std::size_t transactions_per_batch = 20;
};

/// "default" (no stalls), "mode1" and "mode2". Throws InvalidConfig for any
/// other name.
WorkflowConfig builtin_workflow(const std::string& name);

/// Fields: k, depths (or depths_pattern repeated to length k), optional
/// stages {drill, rules, plantuml_code, transaction_code} as [min, max]
/// pairs, stall_probability, stall_seconds, transactions_per_batch.
WorkflowConfig parse_workflow_config(const std::string& json_text);

}  // namespace loopbreak
