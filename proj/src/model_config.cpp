#include "loopbreak/model_config.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "loopbreak/error.hpp"

namespace loopbreak {

ModelConfig trap_calibration() {
  ModelConfig c;
  c.name = "trap";
  c.seed = 7;
  c.concentration = 0.1;
  c.eos_concentration = 3.0;
  TrapSpec t;
  t.trap_probability = 0.86;
  t.log_odds_min = -1.0;
  t.log_odds_max = 9.2;
  t.max_loop_span = 3;
  c.trap = t;
  return c;
}

ModelConfig shallow_calibration() {
  ModelConfig c = trap_calibration();
  c.name = "shallow";
  c.trap->log_odds_min = -0.5;
  c.trap->log_odds_max = 1.15;
  return c;
}

std::optional<ModelConfig> builtin_model(const std::string& name) {
  if (name == "default" || name == "trap") return trap_calibration();
  if (name == "shallow") return shallow_calibration();
  return std::nullopt;
}

ModelConfig parse_model_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(std::string("model config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidConfig("model config must be an object");
  try {
    ModelConfig c;
    c.name = doc.value("name", c.name);
    for (const char* key : {"vocab_size", "eos", "gamma", "r_max"}) {
      if (!doc.contains(key))
        throw InvalidConfig(std::string("model config is missing '") + key + "'");
    }
    c.vocab_size = doc.at("vocab_size").get<std::size_t>();
    c.eos = doc.at("eos").get<TokenId>();
    c.gamma = doc.at("gamma").get<double>();
    c.r_max = doc.at("r_max").get<std::size_t>();
    const auto form = doc.value("alpha_form", std::string("linear"));
    if (form == "linear") {
      c.alpha_form = AlphaForm::linear;
    } else if (form == "geometric") {
      c.alpha_form = AlphaForm::geometric;
    } else {
      throw InvalidConfig("alpha_form must be \"linear\" or \"geometric\"");
    }

    if (doc.contains("transitions")) {
      c.transitions = doc.at("transitions").get<ReinforcedMarkovModel::Matrix>();
      if (doc.contains("start_row")) c.start_row = doc.at("start_row").get<std::vector<double>>();
      c.seed = doc.value("seed", std::uint64_t{0});
    } else {
      if (!doc.contains("seed") || !doc.contains("concentration")) {
        throw InvalidConfig("model config needs 'transitions' or both 'seed' and 'concentration'");
      }
      c.seed = doc.at("seed").get<std::uint64_t>();
      c.concentration = doc.at("concentration").get<double>();
      c.eos_concentration = doc.value("eos_concentration", c.concentration);
    }

    if (doc.contains("trap")) {
      if (c.transitions) throw InvalidConfig("'trap' cannot be combined with 'transitions'");
      const auto& t = doc.at("trap");
      TrapSpec s;
      s.chain_min = t.value("chain_min", s.chain_min);
      s.chain_max = t.value("chain_max", s.chain_max);
      s.forward = t.value("forward", s.forward);
      s.trap_probability = t.value("trap_probability", s.trap_probability);
      s.log_odds_min = t.value("log_odds_min", s.log_odds_min);
      s.log_odds_max = t.value("log_odds_max", s.log_odds_max);
      s.max_loop_span = t.value("max_loop_span", s.max_loop_span);
      c.trap = s;
    }
    // surface kernel errors at load time rather than on the first trial
    (void)build_model(c, c.seed);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("model config: ") + e.what());
  } catch (const InvalidModel& e) {
    throw InvalidConfig(std::string("model config: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig load_model_config(const std::string& name_or_path) {
  if (auto b = builtin_model(name_or_path)) return *b;
  if (!std::filesystem::exists(name_or_path)) {
    throw IoError("no built-in model or file named '" + name_or_path + "'");
  }
  return parse_model_config(read_text_file(name_or_path));
}

ReinforcedMarkovModel build_model(const ModelConfig& c, std::uint64_t kernel_seed) {
  if (c.transitions) {
    return ReinforcedMarkovModel::create(c.vocab_size, *c.transitions, c.gamma, c.r_max, c.eos,
                                         c.start_row, c.alpha_form);
  }
  KernelSpec k{c.vocab_size, c.eos, c.concentration, c.eos_concentration, kernel_seed};
  if (c.trap) {
    TrapSpec t = *c.trap;
    t.kernel = k;
    auto g = generate_trap_kernel(t);
    return ReinforcedMarkovModel::create(c.vocab_size, g.transitions, c.gamma, c.r_max, c.eos,
                                         std::move(g.start_row), c.alpha_form);
  }
  auto g = generate_kernel(k);
  return ReinforcedMarkovModel::create(c.vocab_size, g.transitions, c.gamma, c.r_max, c.eos,
                                       std::move(g.start_row), c.alpha_form);
}

}  // namespace loopbreak
