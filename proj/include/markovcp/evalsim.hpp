#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "markovcp/composition.hpp"
#include "markovcp/conformal.hpp"
#include "markovcp/ingest.hpp"
#include "markovcp/likelihood.hpp"
#include "markovcp/markov.hpp"

namespace markovcp {

enum class Method { Conformal, Likelihood, LikelihoodRandomized };

std::string_view method_name(Method method);
std::optional<Method> method_from_name(std::string_view name);

/// Grid of a Monte Carlo coverage study: one cell per
/// (target level, horizon, method).
struct ExperimentGrid {
  std::vector<double> target_levels;  // 1 - alpha values in (0, 1]
  std::vector<int> horizons;
  int replications = 500;
  int calibration_length = 200;
  std::uint64_t seed = 0;
};

/// Predictor knobs shared across grid cells.
struct PredictorOptions {
  int max_permutations = 2000;
  ScoreMode score_mode = ScoreMode::OneStep;
  bool plus_one = false;
  int plus_one_state = 1;
  std::uint64_t enumeration_cap = 1'000'000;
  int threads = 1;
};

struct CoverageCell {
  Method method = Method::Conformal;
  int horizon = 0;
  double target_level = 0.0;
  std::int64_t covered = 0;
  std::int64_t replications = 0;
  std::int64_t failures = 0;
  double cardinality_sum = 0.0;

  /// covered / replications, with no smoothing.
  double empirical_coverage() const noexcept {
    return replications > 0 ? static_cast<double>(covered) / static_cast<double>(replications)
                            : 0.0;
  }
  double mc_stderr() const noexcept;
  /// Mean set size over the replications that produced a set.
  double mean_cardinality() const noexcept;
};

struct CoverageReport {
  std::vector<CoverageCell> cells;

  const CoverageCell& cell(Method method, int horizon, double target_level) const;
};

/// Simulates `replications` chains of length T + T1 per horizon, builds each
/// requested method's prediction set from the first T states, and records
/// containment of the true tail plus the set cardinality. All target levels
/// share one scored enumeration per replication, so sets are nested across
/// the level grid by construction. Replication r of horizon index h draws
/// from substream (seed, h, r); reports are bit-identical for any thread
/// count. Predictor errors are counted per cell, not propagated.
CoverageReport run_simulation_study(const TransitionMatrix& true_matrix,
                                    const InitialDistribution& true_init,
                                    const ExperimentGrid& grid, const std::vector<Method>& methods,
                                    const PredictorOptions& options = {});

/// Analytic coverage of the single-step likelihood set at target level 0.50
/// under a near-exact estimate: sum over states of the row maximum weighted
/// by the marginal distribution of the state at time T.
double expected_coverage_analytic(const TransitionMatrix& true_matrix,
                                  const InitialDistribution& true_init, int calibration_length);

struct DroppedCountry {
  std::string country_id;
  std::string reason;
};

struct BacktestReport {
  CoverageReport coverage;
  std::vector<DroppedCountry> dropped;
};

/// Per-country backtest: calibration is every observation up to and including
/// the cutoff month, truth is the next T1 states. Countries lacking
/// max(horizons) post-cutoff observations (or 2 calibration observations) are
/// dropped before coverage denominators are formed.
BacktestReport run_backtest(const std::vector<LabeledSeries>& corpus, YearMonth cutoff,
                            const std::vector<double>& target_levels,
                            const std::vector<int>& horizons, std::uint64_t seed,
                            const std::vector<Method>& methods,
                            const PredictorOptions& options = {});

struct ForecastEntry {
  std::size_t rank = 0;
  StateSequence forecast;
  double value = 0.0;  // p-value (conformal) or probability mass (likelihood)
};

struct MethodForecast {
  Method method = Method::Conformal;
  double level = 0.0;
  std::vector<ForecastEntry> entries;
  CompositionTable composition;
  bool mass_deficit = false;
  bool emptied = false;
};

/// Forward forecast: the whole series is the calibration data. Conformal
/// entries are ordered by descending p-value, likelihood entries by rank.
std::vector<MethodForecast> forward_forecast(const LabeledSeries& series,
                                             const ConformalConfig& config,
                                             const std::vector<Method>& methods);

/// Reliability output:
/// `method,horizon,target_coverage,empirical_coverage,mc_stderr,mean_cardinality,failures`.
void write_reliability_csv(const std::filesystem::path& path, const CoverageReport& report);

/// Composition output: `method,step,state,proportion`.
void write_composition_csv(const std::filesystem::path& path,
                           const std::vector<MethodForecast>& forecasts);

/// Set membership output: `rank,sequence,p_value_or_mass`.
void write_forecast_set_csv(const std::filesystem::path& path, const MethodForecast& forecast);

/// Dropped-country output: `country_id,reason`.
void write_dropped_csv(const std::filesystem::path& path,
                       const std::vector<DroppedCountry>& dropped);

}  // namespace markovcp
