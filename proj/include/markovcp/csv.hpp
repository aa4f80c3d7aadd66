#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "markovcp/ingest.hpp"
#include "markovcp/markov.hpp"

namespace markovcp {

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Fatality input: header `country_id,year,month,fatalities`, one row per
/// country-month. Rows may arrive unsorted; each country's months must be
/// contiguous once sorted.
std::vector<CountrySeries> read_fatalities_csv(const std::filesystem::path& path);

/// State-series files: header `country_id,year,month,state`, state in 1..4.
void write_state_series_csv(const std::filesystem::path& path,
                            const std::vector<LabeledSeries>& corpus);
std::vector<LabeledSeries> read_state_series_csv(const std::filesystem::path& path);

/// Exclusion report: header `country_id,rule_failed`.
void write_exclusions_csv(const std::filesystem::path& path,
                          const std::vector<ExclusionRecord>& excluded);

/// Transition-matrix files: `#` comment lines, then one comma-separated row
/// of probabilities per state. Rows must sum to 1 within 1e-6 and are
/// renormalized exactly on load.
TransitionMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const TransitionMatrix& matrix);

}  // namespace markovcp
