#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loopbreak/markov_lm.hpp"

namespace loopbreak {

/// Model file contents. Either `transitions` is given (one fixed model for
/// every trial) or a fresh kernel is drawn per trial from `concentration`,
/// `eos_concentration` and, when present, `trap`.
struct ModelConfig {
  std::string name = "custom";
  std::size_t vocab_size = 50;
  TokenId eos = 0;
  double gamma = 0.15;
  std::size_t r_max = 10;
  AlphaForm alpha_form = AlphaForm::linear;
  std::uint64_t seed = 0;
  double concentration = 0.1;
  double eos_concentration = 0.1;
  std::optional<ReinforcedMarkovModel::Matrix> transitions;
  std::optional<std::vector<double>> start_row;
  std::optional<TrapSpec> trap;
};

/// Greedy-trap calibration: sticky loops that survive unbounded search.
ModelConfig trap_calibration();
/// Loops whose odds over the forward token stay below e^1.15.
ModelConfig shallow_calibration();

/// "default" and "trap" name the trap calibration, "shallow" the one with weak loops.
std::optional<ModelConfig> builtin_model(const std::string& name);

/// Throws InvalidConfig on malformed or inconsistent fields.
ModelConfig parse_model_config(const std::string& json_text);

/// Built-in name or path to a JSON file. Throws InvalidConfig or IoError.
ModelConfig load_model_config(const std::string& name_or_path);

/// Model for one trial. Random kernels are drawn from `kernel_seed`; a fixed
/// matrix ignores it. Throws InvalidModel.
ReinforcedMarkovModel build_model(const ModelConfig& config, std::uint64_t kernel_seed);

/// Reads a whole file. Throws IoError.
std::string read_text_file(const std::string& path);

}  // namespace loopbreak
