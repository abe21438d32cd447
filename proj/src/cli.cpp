#include "loopbreak/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loopbreak/dpo_dataset.hpp"
#include "loopbreak/error.hpp"
#include "loopbreak/harness.hpp"
#include "loopbreak/metrics.hpp"
#include "loopbreak/seeding.hpp"
#include "loopbreak/theory.hpp"
#include "loopbreak/workflow_sim.hpp"

namespace loopbreak {

namespace {

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t trials = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* trials_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOptions& o, const std::string& config_default,
                std::size_t trials_default) {
  o.config = config_default;
  o.trials = trials_default;
  sub->add_option("--config", o.config, "built-in name or JSON file")->capture_default_str();
  o.seed_opt = sub->add_option("--seed", o.seed, "base seed (overrides the config seed)");
  sub->add_option("--out", o.out, "output path (stdout when omitted)");
  o.trials_opt = sub->add_option("--trials", o.trials, "trial count")->capture_default_str();
}

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

// Writes `content` to `path`, or to `out` when no path is given.
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  f.flush();
  if (!f) throw IoError("write to " + path + " failed");
}

ModelConfig model_for(const CommonOptions& o) {
  ModelConfig m = load_model_config(o.config);
  if (o.seed_opt->count() > 0) m.seed = o.seed;
  return m;
}

std::vector<TokenSeq> read_token_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<TokenSeq> seqs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    TokenSeq seq;
    std::string word;
    while (ls >> word) {
      try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(word, &used);
        if (used != word.size()) throw std::invalid_argument(word);
        seq.push_back(static_cast<TokenId>(v));
      } catch (const std::logic_error&) {
        throw FormatError("line " + std::to_string(line_no) + ": '" + word + "' is not a token id");
      }
    }
    if (!seq.empty()) seqs.push_back(std::move(seq));
  }
  return seqs;
}

std::string report_row(std::size_t index, const RepetitionReport& r, std::string_view termination,
                       bool repetitive) {
  std::ostringstream os;
  os << index << ',' << (r.detected ? 1 : 0) << ',' << r.period << ',' << r.repeats << ','
     << r.onset << ',' << termination << ',' << (repetitive ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Repetition-loop laboratory on a self-reinforcing Markov model", "loopbreak"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  std::size_t horizon = 256;
  DetectorParams detector;
  auto add_detector = [&](CLI::App* sub) {
    sub->add_option("--horizon", horizon, "max_tokens per decode")->capture_default_str();
    sub->add_option("--min-repeats", detector.min_repeats)->capture_default_str();
    sub->add_option("--max-period", detector.max_period)->capture_default_str();
  };

  CommonOptions ablate_o;
  auto* ablate = app.add_subcommand("ablate", "greedy and beam grid on a model");
  add_common(ablate, ablate_o, "default", 1000);
  add_detector(ablate);

  CommonOptions sweep_o;
  std::vector<double> penalties = kPenaltyGrid;
  auto* sweep = app.add_subcommand("sweep-penalty", "greedy decoding across presence penalties");
  add_common(sweep, sweep_o, "shallow", 1000);
  add_detector(sweep);
  sweep->add_option("--penalties", penalties, "penalty list")->delimiter(',');

  CommonOptions theory_o;
  TheoryReportInputs ti;
  auto* theory = app.add_subcommand("theory", "closed-form predictions beside simulation");
  add_common(theory, theory_o, "default", 1000);
  theory->add_option("--horizon", ti.horizon)->capture_default_str();
  theory->add_option("--p-r", ti.p_r)->capture_default_str();
  theory->add_option("--p-escape", ti.p_escape)->capture_default_str();
  theory->add_option("--epsilon", ti.epsilon)->capture_default_str();
  theory->add_option("--p-n", ti.p_n)->capture_default_str();
  theory->add_option("--beam-width", ti.beam_width)->capture_default_str();

  CommonOptions kmin_o;
  double kmin_p_r = 0.77;
  double kmin_p_escape = 0.95;
  auto* kmin = app.add_subcommand("kmin", "minimum beam width to escape a loop");
  add_common(kmin, kmin_o, "none", 1);
  kmin->add_option("--p-r", kmin_p_r)->capture_default_str();
  kmin->add_option("--p-escape", kmin_p_escape)->capture_default_str();

  CommonOptions bounds_o;
  double b_eps = 0.01;
  double b_pn = 0.5;
  auto* bounds = app.add_subcommand("bounds", "beam width bound with a Monte Carlo check");
  add_common(bounds, bounds_o, "none", 5000);
  bounds->add_option("--epsilon", b_eps)->capture_default_str();
  bounds->add_option("--p-n", b_pn)->capture_default_str();

  CommonOptions dpo_o;
  std::vector<std::size_t> degrees = kDefaultDegrees;
  auto* dpo = app.add_subcommand("dpo-gen", "preference pairs with repeated units");
  add_common(dpo, dpo_o, "seeds", 1);
  dpo->add_option("--degrees", degrees, "repetition degrees")->delimiter(',');

  CommonOptions wf_o;
  auto* wf = app.add_subcommand("workflow", "batch workflow timing with stalls");
  add_common(wf, wf_o, "default", 500);

  CommonOptions detect_o;
  std::string tokens_path;
  auto* detect = app.add_subcommand("detect", "per-run loop reports");
  add_common(detect, detect_o, "default", 100);
  add_detector(detect);
  detect->add_option("--tokens", tokens_path, "file of token sequences, one per line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (msg.empty()) msg = e.get_name();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: usage: " << msg << '\n' << app.help();
    return 2;
  }

  try {
    if (*ablate) {
      const auto model = model_for(ablate_o);
      auto grid = default_grid(ablate_o.trials, horizon, model.seed);
      grid.detector = detector;
      std::ostringstream csv;
      write_rows_csv(run_ablation(model, grid), csv);
      emit(ablate_o.out, csv.str(), out);
    } else if (*sweep) {
      const auto model = model_for(sweep_o);
      std::ostringstream csv;
      write_rows_csv(
          run_penalty_sweep(model, penalties, sweep_o.trials, horizon, model.seed, detector), csv);
      emit(sweep_o.out, csv.str(), out);
    } else if (*theory) {
      ti.model = model_for(theory_o);
      ti.seed = ti.model.seed;
      ti.trials = theory_o.trials;
      const auto report = run_theory_report(ti);
      out << report.text;
      if (!theory_o.out.empty()) emit(theory_o.out, report.csv, out);
    } else if (*kmin) {
      const std::size_t k = min_beam_width(kmin_p_r, kmin_p_escape);
      out << "k_min = ceil(log(1 - P_escape) / log(p_r))\n"
          << "p_r = " << kmin_p_r << ", P_escape = " << kmin_p_escape << "\n"
          << "k_min = " << k << "\n";
      if (kmin_p_r == 0.77 && kmin_p_escape == 0.95) {
        out << "reference value 3.2 disagrees with the formula as written\n";
      }
      std::ostringstream csv;
      csv << "p_r,p_escape,k_min\n" << kmin_p_r << ',' << kmin_p_escape << ',' << k << '\n';
      if (!kmin_o.out.empty()) emit(kmin_o.out, csv.str(), out);
    } else if (*bounds) {
      const std::size_t b = beam_width_lower_bound(b_eps, b_pn);
      const std::uint64_t seed = bounds_o.seed_opt->count() > 0 ? bounds_o.seed : 0;
      const double sim = simulate_escape_probability(b, b_pn, bounds_o.trials, seed);
      out << "B >= ceil(log(1/epsilon) / log(1/p_n))\n"
          << "epsilon = " << b_eps << ", p_n = " << b_pn << "\n"
          << "B = " << b << "\n"
          << "simulated escape probability = " << fixed4(sim) << " over " << bounds_o.trials
          << " trials\n";
      std::ostringstream csv;
      csv << "epsilon,p_n,beam_width,simulated_escape,trials\n"
          << b_eps << ',' << b_pn << ',' << b << ',' << fixed4(sim) << ',' << bounds_o.trials
          << '\n';
      if (!bounds_o.out.empty()) emit(bounds_o.out, csv.str(), out);
    } else if (*dpo) {
      const auto seeds = (dpo_o.config == "seeds" || dpo_o.config == "default")
                             ? builtin_seeds()
                             : parse_seeds(read_text_file(dpo_o.config));
      std::vector<PreferencePair> all;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        for (auto& p : generate_pairs(seeds[s], degrees)) {
          const auto problems = validate_pair(p, seeds[s]);
          if (!problems.empty()) {
            throw InvalidConfig("seed " + std::to_string(s) + " degree " +
                                std::to_string(p.degree) + ": " + problems.front());
          }
          all.push_back(std::move(p));
        }
      }
      if (dpo_o.out.empty()) {
        throw InvalidArgument("dpo-gen needs --out (a file or an existing directory)");
      }
      std::filesystem::path target = dpo_o.out;
      if (std::filesystem::is_directory(target)) target /= "dpo_pairs.jsonl";
      write_dataset(all, target);
      out << "wrote " << all.size() << " pairs from " << seeds.size() << " seeds to "
          << target.string() << '\n';
    } else if (*wf) {
      WorkflowConfig c;
      if (wf_o.config == "default" || wf_o.config == "mode1" || wf_o.config == "mode2") {
        c = builtin_workflow(wf_o.config);
      } else {
        c = parse_workflow_config(read_text_file(wf_o.config));
      }
      const std::uint64_t seed = wf_o.seed_opt->count() > 0 ? wf_o.seed : 0;
      std::ostringstream csv;
      csv << "replication,total_minutes,mean_transaction_minutes,stall_events,any_stall\n";
      std::size_t stalled_batches = 0;
      double minutes = 0.0;
      for (std::size_t r = 0; r < wf_o.trials; ++r) {
        const auto b = simulate_batch(c.transactions_per_batch, c.spec, c.times, c.stall,
                                      derive_seed(seed, r));
        stalled_batches += b.any_stall ? 1 : 0;
        minutes += b.total_minutes;
        csv << r << ',' << fixed4(b.total_minutes) << ','
            << fixed4(b.total_minutes / static_cast<double>(c.transactions_per_batch)) << ','
            << b.stall_events << ',' << (b.any_stall ? 1 : 0) << '\n';
      }
      emit(wf_o.out, csv.str(), out);
      if (!wf_o.out.empty() && wf_o.trials > 0) {
        const auto n = static_cast<double>(wf_o.trials);
        out << "workflow " << c.name << ": " << total_llm_calls(c.spec)
            << " calls per transaction, mean transaction "
            << fixed4(minutes / n / static_cast<double>(c.transactions_per_batch))
            << " min, batches with a stall " << fixed4(static_cast<double>(stalled_batches) / n)
            << '\n';
      }
    } else if (*detect) {
      std::ostringstream csv;
      csv << "index,detected,period,repeats,onset,termination,repetitive\n";
      if (!tokens_path.empty()) {
        const auto seqs = read_token_file(tokens_path);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
          const auto r = detect_repetition(seqs[i], detector);
          csv << report_row(i, r, "input", r.detected);
        }
      } else {
        const auto model = model_for(detect_o);
        for (std::size_t i = 0; i < detect_o.trials; ++i) {
          const auto m = build_model(model, derive_seed(model.seed, i));
          const auto g = greedy_decode(m, {}, horizon);
          std::span<const TokenId> toks = g.best.tokens;
          if (g.best.finished && !toks.empty()) toks = toks.first(toks.size() - 1);
          csv << report_row(i, detect_repetition(toks, detector), to_string(g.termination),
                            is_repetitive(g, detector));
        }
      }
      emit(detect_o.out, csv.str(), out);
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << e.kind() << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: internal: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace loopbreak
