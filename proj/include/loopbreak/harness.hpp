#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "loopbreak/decoders.hpp"
#include "loopbreak/model_config.hpp"
#include "loopbreak/repetition.hpp"

namespace loopbreak {

struct LabeledConfig {
  std::string label;
  DecoderConfig decoder;
};

struct ExperimentGrid {
  std::vector<LabeledConfig> configs;
  std::size_t trials = 1000;
  std::size_t horizon = 256;
  DetectorParams detector;
  std::uint64_t base_seed = 0;

  void validate() const;  ///< throws InvalidConfig
};

/// Greedy plus beam widths 3, 5 and 10 under early stopping True and False.
ExperimentGrid default_grid(std::size_t trials, std::size_t horizon, std::uint64_t base_seed);

/// Escape times are measured against the loop the greedy run on the same
/// trial model falls into; trials where greedy does not loop are skipped.
struct ExperimentRow {
  std::string label;
  std::size_t trials = 0;
  double rep_rate = 0.0;
  double mean_steps = 0.0;
  double mean_expansions = 0.0;
  std::optional<double> mean_escape;
  std::size_t escape_samples = 0;  ///< trials with a finite escape time
  std::size_t escape_never = 0;

  bool operator==(const ExperimentRow&) const = default;
};

/// Trial i draws its model from derive_seed(base_seed, i) and configuration
/// j decodes with derive_seed(base_seed, i, j + 1), so every configuration
/// sees the same models.
std::vector<ExperimentRow> run_ablation(const ModelConfig& model, const ExperimentGrid& grid);

inline const std::vector<double> kPenaltyGrid = {0.0, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0};

/// Greedy decoding once per penalty on the same trial models. Throws
/// InvalidArgument on an empty list or a negative penalty.
std::vector<ExperimentRow> run_penalty_sweep(const ModelConfig& model,
                                             const std::vector<double>& penalties,
                                             std::size_t trials, std::size_t horizon = 256,
                                             std::uint64_t base_seed = 0,
                                             const DetectorParams& detector = {});

/// Fixed columns: label, trials, rep_rate, mean_steps, mean_expansions,
/// mean_escape, escape_samples, escape_never. Rates and means use 4
/// decimals; a missing mean prints as "na".
void write_rows_csv(const std::vector<ExperimentRow>& rows, std::ostream& out);

struct TheoryReportInputs {
  ModelConfig model;
  std::size_t trials = 1000;
  std::size_t horizon = 256;
  std::uint64_t seed = 0;
  double p_r = 0.77;
  double p_escape = 0.95;
  double epsilon = 0.01;
  double p_n = 0.5;
  std::size_t beam_width = 5;
  std::size_t bound_trials = 5000;
};

struct TheoryReport {
  std::string text;
  std::string csv;
};

/// Closed-form predictions next to simulated measurements and the published
/// reference values.
TheoryReport run_theory_report(const TheoryReportInputs& inputs);

}  // namespace loopbreak
