// Command-line front end: ingestion, forecasting, and coverage studies as
// reproducible batch runs. Every command records a manifest sufficient to
// replay it byte-for-byte via `rerun`.

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "markovcp/csv.hpp"
#include "markovcp/errors.hpp"
#include "markovcp/evalsim.hpp"
#include "markovcp/version.hpp"

namespace fs = std::filesystem;
using namespace markovcp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitResource = 2;
constexpr int kExitIo = 3;

// Ordered key-value record. One Manifest is both a command's argument list
// and the file written next to its outputs, so a rerun sees exactly the
// arguments of the original invocation.
class Manifest {
 public:
  void set(const std::string& key, std::string value) {
    for (auto& [k, v] : items_) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    items_.emplace_back(key, std::move(value));
  }
  void set_u64(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
  void set_int(const std::string& key, int v) { set(key, std::to_string(v)); }
  void set_double(const std::string& key, double v) { set(key, format_double(v)); }
  void set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : items_) {
      if (k == key) return true;
    }
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : items_) {
      if (k == key) return v;
    }
    throw ValidationError("manifest is missing key '" + key + "'");
  }

  std::uint64_t get_u64(const std::string& key) const {
    return parse_integral<std::uint64_t>(key, get(key));
  }
  int get_int(const std::string& key) const { return parse_integral<int>(key, get(key)); }
  double get_double(const std::string& key) const {
    const std::string& text = get(key);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
      throw ValidationError("manifest key '" + key + "' is not a number: " + text);
    }
    return v;
  }
  bool get_bool(const std::string& key) const {
    const std::string& text = get(key);
    if (text == "true") return true;
    if (text == "false") return false;
    throw ValidationError("manifest key '" + key + "' is not a boolean: " + text);
  }

  std::vector<int> get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& tok : split_list(get(key))) out.push_back(parse_integral<int>(key, tok));
    return out;
  }
  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_list(get(key))) {
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw ValidationError("manifest key '" + key + "' holds a bad number: " + tok);
      }
      out.push_back(v);
    }
    return out;
  }

  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& [k, v] : items_) {
      if (needs_quotes(v)) {
        out << k << " = \"" << v << "\"\n";
      } else {
        out << k << " = " << v << "\n";
      }
    }
    if (!out) throw IoError("failed writing " + path.string());
  }

  static Manifest read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    Manifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ParseError(path.string(), line_no, 1, "expected 'key = value'");
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        value = value.substr(1, value.size() - 2);
      }
      m.set(key, std::move(value));
    }
    return m;
  }

 private:
  template <typename T>
  static T parse_integral(const std::string& key, const std::string& text) {
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
      throw ValidationError("manifest key '" + key + "' is not an integer: " + text);
    }
    return v;
  }

  static std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
      if (c == ',') {
        out.push_back(current);
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    out.push_back(current);
    return out;
  }

  static std::string trim(std::string s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    return s;
  }

  static bool is_number(const std::string& v) {
    if (v.empty()) return false;
    double d = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), d);
    return res.ec == std::errc{} && res.ptr == v.data() + v.size();
  }

  static bool needs_quotes(const std::string& v) {
    if (v == "true" || v == "false") return false;
    if (is_number(v)) return false;
    // bare comma lists of numbers stay unquoted
    std::string token;
    bool all_numbers = !v.empty() && v.find(',') != std::string::npos;
    if (all_numbers) {
      std::istringstream in(v);
      while (std::getline(in, token, ',')) {
        if (!is_number(token)) {
          all_numbers = false;
          break;
        }
      }
    }
    return !all_numbers;
  }

  std::vector<std::pair<std::string, std::string>> items_;
};

std::uint64_t draw_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

fs::path prepare_out_dir(const Manifest& args) {
  const fs::path out(args.get("out"));
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string());
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  if (text == "all") {
    return {Method::Conformal, Method::Likelihood, Method::LikelihoodRandomized};
  }
  std::vector<Method> methods;
  std::string current;
  std::istringstream in(text);
  while (std::getline(in, current, ',')) {
    const auto m = method_from_name(current);
    if (!m) throw ValidationError("unknown method '" + current + "' (use cp, like, like-rand, all)");
    methods.push_back(*m);
  }
  if (methods.empty()) throw ValidationError("no methods given");
  return methods;
}

ScoreMode parse_score_mode(const std::string& text) {
  if (text == "one-step") return ScoreMode::OneStep;
  if (text == "j-step") return ScoreMode::JStep;
  throw ValidationError("score mode must be one-step or j-step, got '" + text + "'");
}

YearMonth parse_cutoff(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos) throw ValidationError("cutoff must be YYYY-MM, got '" + text + "'");
  YearMonth ym;
  auto parse = [&](const std::string& s, int& v) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw ValidationError("cutoff must be YYYY-MM, got '" + text + "'");
    }
  };
  parse(text.substr(0, dash), ym.year);
  parse(text.substr(dash + 1), ym.month);
  if (ym.month < 1 || ym.month > 12) throw ValidationError("cutoff month must be in 1..12");
  return ym;
}

PredictorOptions predictor_options(const Manifest& args) {
  PredictorOptions options;
  options.max_permutations = args.get_int("max_perms");
  options.score_mode = parse_score_mode(args.get("score_mode"));
  options.plus_one = args.get_bool("plus_one");
  options.plus_one_state = args.get_int("plus_one_state");
  options.threads = args.get_int("threads");
  return options;
}

void finish(const fs::path& out_dir, const Manifest& args) {
  args.write(out_dir / "manifest.toml");
  std::cout << "wrote " << (out_dir / "manifest.toml").string() << "\n";
}

int run_ingest(const Manifest& args) {
  const fs::path out_dir = prepare_out_dir(args);
  const auto raw = read_fatalities_csv(args.get("input"));

  std::vector<LabeledSeries> labeled;
  labeled.reserve(raw.size());
  for (const auto& series : raw) labeled.push_back(label_states(series));

  CleaningThresholds thresholds;
  thresholds.min_nonpeace = args.get_int("min_nonpeace");
  thresholds.max_peace_proportion = args.get_double("max_peace_proportion");
  const auto cleaned = clean_corpus(std::move(labeled), thresholds);

  write_state_series_csv(out_dir / "states.csv", cleaned.retained);
  write_exclusions_csv(out_dir / "exclusions.csv", cleaned.excluded);
  std::cout << "retained " << cleaned.retained.size() << " countries, excluded "
            << cleaned.excluded.size() << "\n";
  finish(out_dir, args);
  return kExitOk;
}

int run_forecast(const Manifest& args) {
  const fs::path out_dir = prepare_out_dir(args);
  const auto corpus = read_state_series_csv(args.get("states"));
  const std::string country = args.get("country");
  const LabeledSeries* series = nullptr;
  for (const auto& s : corpus) {
    if (s.country_id == country) series = &s;
  }
  if (!series) {
    throw ValidationError("country '" + country + "' not present in " + args.get("states"));
  }

  ConformalConfig cfg;
  cfg.alpha = args.get_double("alpha");
  if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) throw ValidationError("alpha must lie in (0, 1)");
  cfg.horizon = args.get_int("horizon");
  cfg.max_permutations = args.get_int("max_perms");
  cfg.score_mode = parse_score_mode(args.get("score_mode"));
  cfg.plus_one = args.get_bool("plus_one");
  cfg.plus_one_state = args.get_int("plus_one_state");
  cfg.seed = args.get_u64("seed");
  cfg.threads = args.get_int("threads");

  const auto methods = parse_methods(args.get("method"));
  const auto forecasts = forward_forecast(*series, cfg, methods);
  for (const auto& forecast : forecasts) {
    const std::string name(method_name(forecast.method));
    write_forecast_set_csv(out_dir / (name + "_set.csv"), forecast);
    std::cout << name << ": " << forecast.entries.size() << " sequences in the level-"
              << format_double(forecast.level) << " set\n";
  }
  write_composition_csv(out_dir / "composition.csv", forecasts);
  finish(out_dir, args);
  return kExitOk;
}

int run_study(const Manifest& args) {
  const fs::path out_dir = prepare_out_dir(args);

  Manifest manifest = args;  // the derived matrix is echoed below
  TransitionMatrix matrix = [&] {
    if (args.has("true_matrix")) return read_matrix_csv(args.get("true_matrix"));
    const auto corpus = read_state_series_csv(args.get("derive_from"));
    return derive_population_matrix(corpus).matrix;
  }();
  for (int i = 1; i <= matrix.size(); ++i) {
    std::string row;
    for (int j = 1; j <= matrix.size(); ++j) {
      if (j > 1) row += ',';
      row += format_double(matrix.prob(i, j));
    }
    manifest.set("matrix_row_" + std::to_string(i), row);
  }

  ExperimentGrid grid;
  grid.target_levels = args.get_double_list("levels");
  grid.horizons = args.get_int_list("horizons");
  grid.replications = args.get_int("replications");
  grid.calibration_length = args.get_int("calibration_length");
  grid.seed = args.get_u64("seed");

  const auto report =
      run_simulation_study(matrix, InitialDistribution::uniform(matrix.size()), grid,
                           parse_methods(args.get("method")), predictor_options(args));
  write_reliability_csv(out_dir / "reliability.csv", report);
  std::cout << "wrote " << (out_dir / "reliability.csv").string() << " (" << report.cells.size()
            << " cells)\n";
  finish(out_dir, manifest);
  return kExitOk;
}

int run_backtest_cmd(const Manifest& args) {
  const fs::path out_dir = prepare_out_dir(args);
  const auto corpus = read_state_series_csv(args.get("states"));
  const auto report = run_backtest(corpus, parse_cutoff(args.get("cutoff")),
                                   args.get_double_list("levels"), args.get_int_list("horizons"),
                                   args.get_u64("seed"), parse_methods(args.get("method")),
                                   predictor_options(args));
  write_reliability_csv(out_dir / "reliability.csv", report.coverage);
  write_dropped_csv(out_dir / "dropped.csv", report.dropped);
  std::cout << "evaluated "
            << (report.coverage.cells.empty() ? 0 : report.coverage.cells.front().replications)
            << " countries, dropped " << report.dropped.size() << "\n";
  finish(out_dir, args);
  return kExitOk;
}

int dispatch(const std::string& command, const Manifest& args) {
  if (command == "ingest") return run_ingest(args);
  if (command == "forecast") return run_forecast(args);
  if (command == "simulate" || command == "reliability") return run_study(args);
  if (command == "backtest") return run_backtest_cmd(args);
  throw ValidationError("manifest names unknown command '" + command + "'");
}

struct CommonFlags {
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--out", flags.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Master RNG seed (drawn and recorded when omitted)")
      ->each([&flags](const std::string&) { flags.seed_given = true; });
  cmd->add_option("--threads", flags.threads,
                  "Worker threads (0 = hardware concurrency); never changes results")
      ->capture_default_str();
}

void stamp_common(Manifest& args, const std::string& command, const CommonFlags& flags) {
  args.set("command", command);
  args.set("tool_version", kVersion);
  args.set_u64("seed", flags.seed_given ? flags.seed : draw_seed());
  args.set_int("threads", flags.threads);
  args.set("out", flags.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction sets for discrete-state Markov chains: i-block conformal prediction, "
               "likelihood baselines, and a coverage-evaluation harness"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Manifest args;
  std::string command;

  auto* ingest = app.add_subcommand("ingest", "Label fatality counts and clean the corpus");
  CommonFlags ingest_common;
  std::string ingest_input;
  int min_nonpeace = 5;
  double max_peace = 0.99;
  ingest->add_option("--input", ingest_input, "Fatality CSV (country_id,year,month,fatalities)")
      ->required();
  ingest->add_option("--min-nonpeace", min_nonpeace, "Minimum non-peacetime observations")
      ->capture_default_str();
  ingest->add_option("--max-peace-prop", max_peace, "Maximum peacetime proportion")
      ->capture_default_str();
  add_common(ingest, ingest_common);
  ingest->callback([&] {
    command = "ingest";
    stamp_common(args, command, ingest_common);
    args.set("input", ingest_input);
    args.set_int("min_nonpeace", min_nonpeace);
    args.set_double("max_peace_proportion", max_peace);
  });

  auto* forecast = app.add_subcommand("forecast", "Prediction sets for one country");
  CommonFlags forecast_common;
  std::string f_states, f_country, f_method = "all", f_score_mode = "one-step";
  double f_alpha = 0.2;
  int f_horizon = 6, f_max_perms = 5000, f_plus_one_state = 1;
  bool f_plus_one = false;
  forecast->add_option("--states", f_states, "State-series CSV (from ingest)")->required();
  forecast->add_option("--country", f_country, "Country id to forecast")->required();
  forecast->add_option("--alpha", f_alpha, "Miscoverage level in (0,1)")->capture_default_str();
  forecast->add_option("--horizon", f_horizon, "Forecast length T1")->capture_default_str();
  forecast->add_option("--method", f_method, "cp, like, like-rand, or all")->capture_default_str();
  forecast->add_option("--max-perms", f_max_perms, "Permutation sample size per candidate")
      ->capture_default_str();
  forecast->add_option("--score-mode", f_score_mode, "one-step or j-step")->capture_default_str();
  forecast->add_flag("--plus-one", f_plus_one, "Append the artificial post-horizon anchor state");
  forecast->add_option("--plus-one-state", f_plus_one_state, "Anchor state appended by --plus-one")
      ->capture_default_str();
  add_common(forecast, forecast_common);
  forecast->callback([&] {
    command = "forecast";
    stamp_common(args, command, forecast_common);
    args.set("states", f_states);
    args.set("country", f_country);
    args.set_double("alpha", f_alpha);
    args.set_int("horizon", f_horizon);
    args.set("method", f_method);
    args.set_int("max_perms", f_max_perms);
    args.set("score_mode", f_score_mode);
    args.set_bool("plus_one", f_plus_one);
    args.set_int("plus_one_state", f_plus_one_state);
  });

  CommonFlags study_common;
  std::string s_matrix, s_derive, s_method = "all", s_score_mode = "one-step";
  std::string s_levels = "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1";
  std::string s_horizons = "1,2,3";
  int s_T = 200, s_R = 500, s_max_perms = 2000, s_plus_one_state = 1;
  bool s_plus_one = false;
  auto add_study = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    auto* matrix_opt =
        cmd->add_option("--true-matrix", s_matrix, "CSV file with the generating matrix");
    cmd->add_option("--derive-from", s_derive,
                    "State-series CSV; the generator is the population-averaged estimate")
        ->excludes(matrix_opt);
    cmd->add_option("--T", s_T, "Calibration length")->capture_default_str();
    cmd->add_option("--R", s_R, "Replications per cell")->capture_default_str();
    cmd->add_option("--horizons", s_horizons, "Comma list of forecast lengths")
        ->capture_default_str();
    cmd->add_option("--levels", s_levels, "Comma list of target coverage levels")
        ->capture_default_str();
    cmd->add_option("--method", s_method, "cp, like, like-rand, or all")->capture_default_str();
    cmd->add_option("--max-perms", s_max_perms, "Permutation sample size per candidate")
        ->capture_default_str();
    cmd->add_option("--score-mode", s_score_mode, "one-step or j-step")->capture_default_str();
    cmd->add_flag("--plus-one", s_plus_one, "Append the artificial post-horizon anchor state");
    cmd->add_option("--plus-one-state", s_plus_one_state, "Anchor state appended by --plus-one")
        ->capture_default_str();
    add_common(cmd, study_common);
    cmd->callback([&, name] {
      command = name;
      stamp_common(args, command, study_common);
      if (!s_matrix.empty()) {
        args.set("true_matrix", s_matrix);
      } else if (!s_derive.empty()) {
        args.set("derive_from", s_derive);
      } else {
        throw CLI::ValidationError("simulate", "--true-matrix or --derive-from is required");
      }
      args.set_int("calibration_length", s_T);
      args.set_int("replications", s_R);
      args.set("horizons", s_horizons);
      args.set("levels", s_levels);
      args.set("method", s_method);
      args.set_int("max_perms", s_max_perms);
      args.set("score_mode", s_score_mode);
      args.set_bool("plus_one", s_plus_one);
      args.set_int("plus_one_state", s_plus_one_state);
    });
    return cmd;
  };
  add_study("simulate", "Monte Carlo coverage study against a known generator");
  add_study("reliability", "Alias of simulate: reliability-curve data for both predictors");

  auto* backtest = app.add_subcommand("backtest", "Per-country holdout coverage after a cutoff");
  CommonFlags backtest_common;
  std::string b_states, b_cutoff, b_method = "all", b_score_mode = "one-step";
  std::string b_levels = "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1";
  std::string b_horizons = "1,2,3";
  int b_max_perms = 2000, b_plus_one_state = 1;
  bool b_plus_one = false;
  backtest->add_option("--states", b_states, "State-series CSV (from ingest)")->required();
  backtest->add_option("--cutoff", b_cutoff, "Last calibration month, YYYY-MM")->required();
  backtest->add_option("--horizons", b_horizons, "Comma list of forecast lengths")
      ->capture_default_str();
  backtest->add_option("--levels", b_levels, "Comma list of target coverage levels")
      ->capture_default_str();
  backtest->add_option("--method", b_method, "cp, like, like-rand, or all")->capture_default_str();
  backtest->add_option("--max-perms", b_max_perms, "Permutation sample size per candidate")
      ->capture_default_str();
  backtest->add_option("--score-mode", b_score_mode, "one-step or j-step")->capture_default_str();
  backtest->add_flag("--plus-one", b_plus_one, "Append the artificial post-horizon anchor state");
  backtest->add_option("--plus-one-state", b_plus_one_state, "Anchor state appended by --plus-one")
      ->capture_default_str();
  add_common(backtest, backtest_common);
  backtest->callback([&] {
    command = "backtest";
    stamp_common(args, command, backtest_common);
    args.set("states", b_states);
    args.set("cutoff", b_cutoff);
    args.set("horizons", b_horizons);
    args.set("levels", b_levels);
    args.set("method", b_method);
    args.set_int("max_perms", b_max_perms);
    args.set("score_mode", b_score_mode);
    args.set_bool("plus_one", b_plus_one);
    args.set_int("plus_one_state", b_plus_one_state);
  });

  auto* rerun = app.add_subcommand("rerun", "Replay a recorded manifest");
  std::string r_manifest, r_out;
  rerun->add_option("manifest", r_manifest, "Path to a manifest.toml")->required();
  rerun->add_option("--out", r_out, "Override the recorded output directory");
  rerun->callback([&] { command = "rerun"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (command == "rerun") {
      Manifest recorded = Manifest::read(r_manifest);
      if (!r_out.empty()) recorded.set("out", r_out);
      return dispatch(recorded.get("command"), recorded);
    }
    return dispatch(command, args);
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResource;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
