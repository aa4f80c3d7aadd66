#include "markovcp/evalsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "markovcp/csv.hpp"
#include "markovcp/errors.hpp"
#include "markovcp/parallel.hpp"

namespace markovcp {

namespace {

constexpr std::uint64_t kStreamSimulate = 0xE5A1'0001;
constexpr std::uint64_t kStreamConformal = 0xE5A1'0002;
constexpr std::uint64_t kStreamLikelihood = 0xE5A1'0003;
constexpr std::uint64_t kStreamRandomized = 0xE5A1'0004;

struct MethodOutcome {
  bool failed = false;
  std::vector<char> covered;
  std::vector<double> cardinality;
};

ConformalConfig make_config(const PredictorOptions& options, int horizon, std::uint64_t seed) {
  ConformalConfig cfg;
  cfg.horizon = horizon;
  cfg.max_permutations = options.max_permutations;
  cfg.score_mode = options.score_mode;
  cfg.plus_one = options.plus_one;
  cfg.plus_one_state = options.plus_one_state;
  cfg.enumeration_cap = options.enumeration_cap;
  cfg.seed = seed;
  cfg.threads = 1;  // callers parallelize over replications
  return cfg;
}

MethodOutcome evaluate_conformal(const StateSequence& calibration, const StateSequence& truth,
                                 const std::vector<double>& levels, const StateSpace& space,
                                 const ConformalConfig& cfg) {
  MethodOutcome out;
  out.covered.assign(levels.size(), 0);
  out.cardinality.assign(levels.size(), 0.0);
  const std::uint64_t universe =
      candidate_universe_size(space, cfg.horizon, cfg.enumeration_cap);
  std::vector<double> qhat(static_cast<std::size_t>(universe), 0.0);
  scan_conformal_candidates(calibration, cfg, space,
                            [&](std::uint64_t idx, const ScoredCandidate& scored) {
                              qhat[static_cast<std::size_t>(idx)] = scored.p_value;
                            });
  const double q_truth = qhat[static_cast<std::size_t>(candidate_index(truth, space))];
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double alpha = 1.0 - levels[i];
    out.covered[i] = q_truth > alpha ? 1 : 0;
    std::int64_t size = 0;
    for (double q : qhat) {
      if (q > alpha) ++size;
    }
    out.cardinality[i] = static_cast<double>(size);
  }
  return out;
}

MethodOutcome evaluate_likelihood(const StateSequence& calibration, const StateSequence& truth,
                                  const std::vector<double>& levels, int horizon,
                                  const StateSpace& space, std::uint64_t seed, bool randomized,
                                  double u_star) {
  MethodOutcome out;
  out.covered.assign(levels.size(), 0);
  out.cardinality.assign(levels.size(), 0.0);
  try {
    const RankedCandidates ranked = rank_candidates(calibration, horizon, space, seed);
    const std::optional<std::size_t> truth_rank = rank_of(ranked, truth);
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const double alpha = 1.0 - levels[i];
      const std::size_t k = randomized ? randomized_prefix_size(ranked, alpha, u_star)
                                       : hdr_prefix_size(ranked, alpha);
      out.covered[i] = truth_rank.has_value() && *truth_rank < k ? 1 : 0;
      out.cardinality[i] = static_cast<double>(k);
    }
  } catch (const ValidationError&) {
    out.failed = true;
  }
  return out;
}

MethodOutcome evaluate_method(Method method, const StateSequence& calibration,
                              const StateSequence& truth, const std::vector<double>& levels,
                              int horizon, const StateSpace& space,
                              const PredictorOptions& options, std::uint64_t master,
                              std::uint64_t id_a, std::uint64_t id_b) {
  switch (method) {
    case Method::Conformal: {
      const ConformalConfig cfg = make_config(
          options, horizon, derive_seed(master, {kStreamConformal, id_a, id_b}));
      return evaluate_conformal(calibration, truth, levels, space, cfg);
    }
    case Method::Likelihood:
      return evaluate_likelihood(calibration, truth, levels, horizon, space,
                                 derive_seed(master, {kStreamLikelihood, id_a, id_b}), false, 0.0);
    case Method::LikelihoodRandomized: {
      const double u_star =
          Rng::from_stream(master, {kStreamRandomized, id_a, id_b}).uniform();
      return evaluate_likelihood(calibration, truth, levels, horizon, space,
                                 derive_seed(master, {kStreamLikelihood, id_a, id_b}), true,
                                 u_star);
    }
  }
  throw ValidationError("unknown method");
}

void validate_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw ValidationError("target level grid is empty");
  for (double level : levels) {
    if (level <= 0.0 || level > 1.0) {
      throw ValidationError("target level " + format_double(level) + " outside (0, 1]");
    }
  }
}

void validate_horizons(const std::vector<int>& horizons) {
  if (horizons.empty()) throw ValidationError("horizon grid is empty");
  for (int h : horizons) {
    if (h < 1) throw ValidationError("horizons must be positive");
  }
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::Conformal:
      return "cp";
    case Method::Likelihood:
      return "like";
    case Method::LikelihoodRandomized:
      return "like-rand";
  }
  return "?";
}

std::optional<Method> method_from_name(std::string_view name) {
  if (name == "cp") return Method::Conformal;
  if (name == "like") return Method::Likelihood;
  if (name == "like-rand") return Method::LikelihoodRandomized;
  return std::nullopt;
}

double CoverageCell::mc_stderr() const noexcept {
  if (replications == 0) return 0.0;
  const double p = empirical_coverage();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(replications));
}

double CoverageCell::mean_cardinality() const noexcept {
  const std::int64_t produced = replications - failures;
  return produced > 0 ? cardinality_sum / static_cast<double>(produced) : 0.0;
}

const CoverageCell& CoverageReport::cell(Method method, int horizon, double target_level) const {
  for (const CoverageCell& c : cells) {
    if (c.method == method && c.horizon == horizon &&
        std::abs(c.target_level - target_level) < 1e-12) {
      return c;
    }
  }
  throw ValidationError("no such report cell");
}

CoverageReport run_simulation_study(const TransitionMatrix& true_matrix,
                                    const InitialDistribution& true_init,
                                    const ExperimentGrid& grid, const std::vector<Method>& methods,
                                    const PredictorOptions& options) {
  validate_levels(grid.target_levels);
  validate_horizons(grid.horizons);
  if (grid.replications < 1) throw ValidationError("replications must be positive");
  if (grid.calibration_length < 2) throw ValidationError("calibration length must be at least 2");
  if (methods.empty()) throw ValidationError("no methods requested");

  const StateSpace space(true_matrix.size());
  const std::size_t reps = static_cast<std::size_t>(grid.replications);
  const std::size_t tasks = grid.horizons.size() * reps;
  std::vector<std::vector<MethodOutcome>> outcomes(tasks);

  parallel_for(tasks, options.threads, [&](std::size_t task) {
    const std::size_t h_idx = task / reps;
    const std::size_t rep = task % reps;
    const int horizon = grid.horizons[h_idx];
    const int total_length = grid.calibration_length + horizon;

    Rng sim_rng = Rng::from_stream(grid.seed, {kStreamSimulate, h_idx, rep});
    const StateSequence chain = simulate_chain(true_init, true_matrix, total_length, sim_rng);
    const StateSequence calibration(chain.begin(),
                                    chain.begin() + grid.calibration_length);
    const StateSequence truth(chain.begin() + grid.calibration_length, chain.end());

    std::vector<MethodOutcome>& row = outcomes[task];
    row.reserve(methods.size());
    for (Method method : methods) {
      row.push_back(evaluate_method(method, calibration, truth, grid.target_levels, horizon,
                                    space, options, grid.seed, h_idx, rep));
    }
  });

  CoverageReport report;
  for (std::size_t m_idx = 0; m_idx < methods.size(); ++m_idx) {
    for (std::size_t h_idx = 0; h_idx < grid.horizons.size(); ++h_idx) {
      for (std::size_t l_idx = 0; l_idx < grid.target_levels.size(); ++l_idx) {
        CoverageCell cell;
        cell.method = methods[m_idx];
        cell.horizon = grid.horizons[h_idx];
        cell.target_level = grid.target_levels[l_idx];
        cell.replications = grid.replications;
        for (std::size_t rep = 0; rep < reps; ++rep) {
          const MethodOutcome& outcome = outcomes[h_idx * reps + rep][m_idx];
          if (outcome.failed) {
            ++cell.failures;
            continue;
          }
          cell.covered += outcome.covered[l_idx];
          cell.cardinality_sum += outcome.cardinality[l_idx];
        }
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

double expected_coverage_analytic(const TransitionMatrix& true_matrix,
                                  const InitialDistribution& true_init, int calibration_length) {
  if (calibration_length < 1) throw ValidationError("calibration length must be positive");
  const InitialDistribution marginal =
      matrix_power_distribution(true_init, true_matrix, calibration_length - 1);
  double total = 0.0;
  for (int s = 1; s <= true_matrix.size(); ++s) {
    double row_max = 0.0;
    for (int j = 1; j <= true_matrix.size(); ++j) {
      row_max = std::max(row_max, true_matrix.prob(s, j));
    }
    total += row_max * marginal.prob(s);
  }
  return total;
}

BacktestReport run_backtest(const std::vector<LabeledSeries>& corpus, YearMonth cutoff,
                            const std::vector<double>& target_levels,
                            const std::vector<int>& horizons, std::uint64_t seed,
                            const std::vector<Method>& methods,
                            const PredictorOptions& options) {
  validate_levels(target_levels);
  validate_horizons(horizons);
  if (methods.empty()) throw ValidationError("no methods requested");
  if (corpus.empty()) throw ValidationError("corpus is empty");

  const int max_horizon = *std::max_element(horizons.begin(), horizons.end());
  const StateSpace space(kNumConflictStates);

  BacktestReport report;
  struct Task {
    const LabeledSeries* series;
    int calibration_length;
  };
  std::vector<Task> tasks;
  for (const LabeledSeries& series : corpus) {
    const int calibration_length = cutoff.index() - series.start.index() + 1;
    if (calibration_length < 2) {
      report.dropped.push_back({series.country_id, "fewer than 2 observations at the cutoff"});
      continue;
    }
    const int post = static_cast<int>(series.states.size()) - calibration_length;
    if (post < max_horizon) {
      report.dropped.push_back({series.country_id, "fewer than " + std::to_string(max_horizon) +
                                                       " post-cutoff observations"});
      continue;
    }
    tasks.push_back({&series, calibration_length});
  }
  if (tasks.empty()) throw ValidationError("no country has enough data around the cutoff");

  // outcomes[country][horizon][method]
  std::vector<std::vector<std::vector<MethodOutcome>>> outcomes(tasks.size());
  parallel_for(tasks.size(), options.threads, [&](std::size_t c_idx) {
    const Task& task = tasks[c_idx];
    const StateSequence& states = task.series->states;
    const StateSequence calibration(states.begin(), states.begin() + task.calibration_length);
    auto& per_horizon = outcomes[c_idx];
    per_horizon.resize(horizons.size());
    for (std::size_t h_idx = 0; h_idx < horizons.size(); ++h_idx) {
      const int horizon = horizons[h_idx];
      const StateSequence truth(states.begin() + task.calibration_length,
                                states.begin() + task.calibration_length + horizon);
      for (Method method : methods) {
        per_horizon[h_idx].push_back(evaluate_method(method, calibration, truth, target_levels,
                                                     horizon, space, options, seed, c_idx, h_idx));
      }
    }
  });

  for (std::size_t m_idx = 0; m_idx < methods.size(); ++m_idx) {
    for (std::size_t h_idx = 0; h_idx < horizons.size(); ++h_idx) {
      for (std::size_t l_idx = 0; l_idx < target_levels.size(); ++l_idx) {
        CoverageCell cell;
        cell.method = methods[m_idx];
        cell.horizon = horizons[h_idx];
        cell.target_level = target_levels[l_idx];
        cell.replications = static_cast<std::int64_t>(tasks.size());
        for (std::size_t c_idx = 0; c_idx < tasks.size(); ++c_idx) {
          const MethodOutcome& outcome = outcomes[c_idx][h_idx][m_idx];
          if (outcome.failed) {
            ++cell.failures;
            continue;
          }
          cell.covered += outcome.covered[l_idx];
          cell.cardinality_sum += outcome.cardinality[l_idx];
        }
        report.coverage.cells.push_back(cell);
      }
    }
  }
  return report;
}

std::vector<MethodForecast> forward_forecast(const LabeledSeries& series,
                                             const ConformalConfig& config,
                                             const std::vector<Method>& methods) {
  if (methods.empty()) throw ValidationError("no methods requested");
  const StateSpace space(kNumConflictStates);
  std::vector<MethodForecast> out;
  out.reserve(methods.size());

  for (Method method : methods) {
    MethodForecast forecast;
    forecast.method = method;
    forecast.level = 1.0 - config.alpha;
    switch (method) {
      case Method::Conformal: {
        const ConformalPredictionSet set =
            conformal_prediction_set(series.states, config, space);
        std::vector<const ScoredCandidate*> ordered;
        ordered.reserve(set.members.size());
        for (const ScoredCandidate& c : set.members) ordered.push_back(&c);
        std::stable_sort(ordered.begin(), ordered.end(),
                         [](const ScoredCandidate* a, const ScoredCandidate* b) {
                           return a->p_value > b->p_value;
                         });
        for (std::size_t r = 0; r < ordered.size(); ++r) {
          forecast.entries.push_back({r + 1, ordered[r]->forecast, ordered[r]->p_value});
        }
        forecast.composition = set_composition(set, space);
        break;
      }
      case Method::Likelihood:
      case Method::LikelihoodRandomized: {
        const RankedCandidates ranked =
            rank_candidates(series.states, config.horizon, space,
                            derive_seed(config.seed, {kStreamLikelihood}));
        LikelihoodPredictionSet set;
        if (method == Method::Likelihood) {
          set = hdr_set(ranked, config.alpha);
        } else {
          const double u_star = Rng::from_stream(config.seed, {kStreamRandomized}).uniform();
          set = randomized_hdr_set(ranked, config.alpha, u_star);
        }
        forecast.mass_deficit = set.mass_deficit;
        forecast.emptied = set.emptied;
        std::vector<StateSequence> members;
        members.reserve(set.members.size());
        for (std::size_t r = 0; r < set.members.size(); ++r) {
          forecast.entries.push_back({r + 1, set.members[r].forecast, set.members[r].mass});
          members.push_back(set.members[r].forecast);
        }
        forecast.composition = composition_of(members, config.horizon, space);
        break;
      }
    }
    out.push_back(std::move(forecast));
  }
  return out;
}

void write_reliability_csv(const std::filesystem::path& path, const CoverageReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "method,horizon,target_coverage,empirical_coverage,mc_stderr,mean_cardinality,failures\n";
  for (const CoverageCell& cell : report.cells) {
    out << method_name(cell.method) << ',' << cell.horizon << ','
        << format_double(cell.target_level) << ',' << format_double(cell.empirical_coverage())
        << ',' << format_double(cell.mc_stderr()) << ',' << format_double(cell.mean_cardinality())
        << ',' << cell.failures << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_composition_csv(const std::filesystem::path& path,
                           const std::vector<MethodForecast>& forecasts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "method,step,state,proportion\n";
  for (const MethodForecast& forecast : forecasts) {
    if (forecast.composition.empty_set) continue;
    for (int step = 1; step <= forecast.composition.horizon; ++step) {
      for (int state = 1; state <= forecast.composition.num_states; ++state) {
        out << method_name(forecast.method) << ',' << step << ',' << state << ','
            << format_double(forecast.composition.at(step, state)) << '\n';
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_forecast_set_csv(const std::filesystem::path& path, const MethodForecast& forecast) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "rank,sequence,p_value_or_mass\n";
  for (const ForecastEntry& entry : forecast.entries) {
    out << entry.rank << ",\"";
    for (std::size_t t = 0; t < entry.forecast.size(); ++t) {
      if (t > 0) out << ',';
      out << entry.forecast[t];
    }
    out << "\"," << format_double(entry.value) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_dropped_csv(const std::filesystem::path& path,
                       const std::vector<DroppedCountry>& dropped) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "country_id,reason\n";
  for (const DroppedCountry& d : dropped) out << d.country_id << ',' << d.reason << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace markovcp
