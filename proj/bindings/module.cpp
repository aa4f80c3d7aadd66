#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "markovcp/composition.hpp"
#include "markovcp/conformal.hpp"
#include "markovcp/csv.hpp"
#include "markovcp/errors.hpp"
#include "markovcp/evalsim.hpp"
#include "markovcp/ingest.hpp"
#include "markovcp/likelihood.hpp"
#include "markovcp/markov.hpp"
#include "markovcp/version.hpp"

namespace py = pybind11;
using namespace markovcp;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prediction sets for discrete-state Markov chains: i-block conformal "
            "prediction, likelihood baselines, and coverage evaluation";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ResourceError>(m, "ResourceError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // -- state space and chains ------------------------------------------------
  py::class_<StateSpace>(m, "StateSpace")
      .def(py::init<int>(), py::arg("size"))
      .def_readonly("size", &StateSpace::size)
      .def("contains", &StateSpace::contains, py::arg("label"))
      .def("__repr__",
           [](const StateSpace& s) { return "StateSpace(" + std::to_string(s.size) + ")"; });

  py::class_<InitialDistribution>(m, "InitialDistribution")
      .def(py::init<std::vector<double>>(), py::arg("probs"))
      .def_static("uniform", &InitialDistribution::uniform, py::arg("m"))
      .def_static("point_mass", &InitialDistribution::point_mass, py::arg("state"), py::arg("m"))
      .def_property_readonly("probs", &InitialDistribution::probs)
      .def("prob", &InitialDistribution::prob, py::arg("state"));

  py::class_<TransitionMatrix>(m, "TransitionMatrix")
      .def_static("from_rows", &TransitionMatrix::from_rows, py::arg("rows"))
      .def_property_readonly("size", &TransitionMatrix::size)
      .def("prob", &TransitionMatrix::prob, py::arg("from_state"), py::arg("to_state"))
      .def("row_visits", &TransitionMatrix::row_visits, py::arg("from_state"))
      .def("row_unvisited", &TransitionMatrix::row_unvisited, py::arg("from_state"))
      .def("rows", [](const TransitionMatrix& t) {
        std::vector<std::vector<double>> rows;
        for (int i = 1; i <= t.size(); ++i) {
          std::vector<double> row;
          for (int j = 1; j <= t.size(); ++j) row.push_back(t.prob(i, j));
          rows.push_back(std::move(row));
        }
        return rows;
      });

  m.def("estimate_transition_matrix", &estimate_transition_matrix, py::arg("sequence"),
        py::arg("space"));
  m.def("sequence_log_probability", &sequence_log_probability, py::arg("forecast"),
        py::arg("last_state"), py::arg("matrix"));
  m.def("path_log_probability", &path_log_probability, py::arg("path"), py::arg("matrix"));
  m.def("matrix_power_distribution", &matrix_power_distribution, py::arg("init"),
        py::arg("matrix"), py::arg("steps"));
  m.def(
      "simulate_chain",
      [](const InitialDistribution& init, const TransitionMatrix& matrix, int length,
         std::uint64_t seed) { return simulate_chain(init, matrix, length, seed); },
      py::arg("init"), py::arg("matrix"), py::arg("length"), py::arg("seed"));

  // -- i-block decomposition ---------------------------------------------------
  py::class_<IBlockDecomposition>(m, "IBlockDecomposition")
      .def_readonly("anchor", &IBlockDecomposition::anchor)
      .def_readonly("sequence", &IBlockDecomposition::sequence)
      .def_property_readonly("block_count", &IBlockDecomposition::block_count)
      .def_property_readonly("head",
                             [](const IBlockDecomposition& d) {
                               return StateSequence(d.head().begin(), d.head().end());
                             })
      .def("block",
           [](const IBlockDecomposition& d, int i) {
             if (i < 0 || i >= d.block_count()) throw py::index_error();
             return StateSequence(d.block(i).begin(), d.block(i).end());
           })
      .def_property_readonly("tail", [](const IBlockDecomposition& d) {
        return StateSequence(d.tail().begin(), d.tail().end());
      });

  py::class_<BlockPermutation>(m, "BlockPermutation")
      .def(py::init([](std::vector<std::uint32_t> order) {
             return BlockPermutation{std::move(order)};
           }),
           py::arg("order"))
      .def_readonly("order", &BlockPermutation::order)
      .def("is_identity", &BlockPermutation::is_identity);

  m.def("decompose", &decompose, py::arg("sequence"), py::arg("anchor"));
  m.def("apply_permutation", &apply_permutation, py::arg("decomposition"), py::arg("permutation"));
  m.def(
      "sample_permutations",
      [](const IBlockDecomposition& dec, std::uint64_t max_n, std::uint64_t seed) {
        return sample_permutations(dec, max_n, seed);
      },
      py::arg("decomposition"), py::arg("max_n"), py::arg("seed"));

  // -- conformal prediction ------------------------------------------------------
  py::enum_<ScoreMode>(m, "ScoreMode")
      .value("ONE_STEP", ScoreMode::OneStep)
      .value("J_STEP", ScoreMode::JStep);

  py::class_<ConformalConfig>(m, "ConformalConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &ConformalConfig::alpha)
      .def_readwrite("horizon", &ConformalConfig::horizon)
      .def_readwrite("max_permutations", &ConformalConfig::max_permutations)
      .def_readwrite("score_mode", &ConformalConfig::score_mode)
      .def_readwrite("plus_one", &ConformalConfig::plus_one)
      .def_readwrite("plus_one_state", &ConformalConfig::plus_one_state)
      .def_readwrite("seed", &ConformalConfig::seed)
      .def_readwrite("enumeration_cap", &ConformalConfig::enumeration_cap)
      .def_readwrite("threads", &ConformalConfig::threads);

  py::class_<ScoredCandidate>(m, "ScoredCandidate")
      .def_readonly("forecast", &ScoredCandidate::forecast)
      .def_readonly("p_value", &ScoredCandidate::p_value)
      .def_readonly("identity_score", &ScoredCandidate::identity_score)
      .def_readonly("num_permutations", &ScoredCandidate::num_permutations)
      .def_readonly("tie_count", &ScoredCandidate::tie_count);

  py::class_<ConformalPredictionSet>(m, "ConformalPredictionSet")
      .def_readonly("level", &ConformalPredictionSet::level)
      .def_readonly("universe_size", &ConformalPredictionSet::universe_size)
      .def_readonly("members", &ConformalPredictionSet::members)
      .def_readonly("scored", &ConformalPredictionSet::scored);

  m.def("nonconformity_score", &nonconformity_score, py::arg("permuted"),
        py::arg("calibration_length"), py::arg("horizon"), py::arg("matrix"), py::arg("mode"));
  m.def("p_value", &p_value, py::arg("candidate"), py::arg("calibration"), py::arg("config"),
        py::arg("space"));
  m.def("conformal_prediction_set", &conformal_prediction_set, py::arg("calibration"),
        py::arg("config"), py::arg("space"),
        py::call_guard<py::gil_scoped_release>());
  m.def("candidate_at", &candidate_at, py::arg("index"), py::arg("horizon"), py::arg("space"));
  m.def("candidate_index", &candidate_index, py::arg("forecast"), py::arg("space"));

  py::class_<CompositionTable>(m, "CompositionTable")
      .def_readonly("horizon", &CompositionTable::horizon)
      .def_readonly("num_states", &CompositionTable::num_states)
      .def_readonly("empty_set", &CompositionTable::empty_set)
      .def("at", &CompositionTable::at, py::arg("step"), py::arg("state"));

  m.def("set_composition", &set_composition, py::arg("prediction_set"), py::arg("space"));
  m.def("composition_of", &composition_of, py::arg("members"), py::arg("horizon"),
        py::arg("space"));
  m.def("composition_entropy", &composition_entropy, py::arg("table"), py::arg("step"));

  // -- likelihood baseline -----------------------------------------------------
  py::class_<RankedCandidate>(m, "RankedCandidate")
      .def_readonly("forecast", &RankedCandidate::forecast)
      .def_readonly("mass", &RankedCandidate::mass);

  py::class_<RankedCandidates>(m, "RankedCandidates")
      .def_readonly("entries", &RankedCandidates::entries)
      .def_readonly("cumulative", &RankedCandidates::cumulative)
      .def_property_readonly("total_mass", &RankedCandidates::total_mass);

  py::class_<LikelihoodPredictionSet>(m, "LikelihoodPredictionSet")
      .def_readonly("members", &LikelihoodPredictionSet::members)
      .def_readonly("attained_mass", &LikelihoodPredictionSet::attained_mass)
      .def_readonly("k", &LikelihoodPredictionSet::k)
      .def_readonly("mass_deficit", &LikelihoodPredictionSet::mass_deficit)
      .def_readonly("emptied", &LikelihoodPredictionSet::emptied);

  m.def("rank_candidates", &rank_candidates, py::arg("calibration"), py::arg("horizon"),
        py::arg("space"), py::arg("seed"), py::arg("support_cap") = 1'048'576ULL);
  m.def("hdr_set", &hdr_set, py::arg("ranked"), py::arg("alpha"));
  m.def("randomized_hdr_set", &randomized_hdr_set, py::arg("ranked"), py::arg("alpha"),
        py::arg("u_star"));

  // -- ingestion ---------------------------------------------------------------
  py::class_<YearMonth>(m, "YearMonth")
      .def(py::init([](int year, int month) {
             return YearMonth{year, month};
           }),
           py::arg("year"), py::arg("month"))
      .def_readwrite("year", &YearMonth::year)
      .def_readwrite("month", &YearMonth::month)
      .def("__eq__", [](const YearMonth& a, const YearMonth& b) { return a == b; })
      .def("__repr__", [](const YearMonth& ym) {
        return std::to_string(ym.year) + "-" + std::to_string(ym.month);
      });

  py::class_<CountrySeries>(m, "CountrySeries")
      .def(py::init([](std::string id, YearMonth start, std::vector<std::int64_t> fatalities) {
             return CountrySeries{std::move(id), start, std::move(fatalities)};
           }),
           py::arg("country_id"), py::arg("start"), py::arg("fatalities"))
      .def_readwrite("country_id", &CountrySeries::country_id)
      .def_readwrite("start", &CountrySeries::start)
      .def_readwrite("fatalities", &CountrySeries::fatalities);

  py::class_<LabeledSeries>(m, "LabeledSeries")
      .def(py::init([](std::string id, YearMonth start, StateSequence states) {
             return LabeledSeries{std::move(id), start, std::move(states)};
           }),
           py::arg("country_id"), py::arg("start"), py::arg("states"))
      .def_readwrite("country_id", &LabeledSeries::country_id)
      .def_readwrite("start", &LabeledSeries::start)
      .def_readwrite("states", &LabeledSeries::states);

  py::class_<CleaningThresholds>(m, "CleaningThresholds")
      .def(py::init<>())
      .def_readwrite("min_nonpeace", &CleaningThresholds::min_nonpeace)
      .def_readwrite("max_peace_proportion", &CleaningThresholds::max_peace_proportion);

  py::class_<ExclusionRecord>(m, "ExclusionRecord")
      .def_readonly("country_id", &ExclusionRecord::country_id)
      .def_readonly("rule_failed", &ExclusionRecord::rule_failed);

  py::class_<CleaningResult>(m, "CleaningResult")
      .def_readonly("retained", &CleaningResult::retained)
      .def_readonly("excluded", &CleaningResult::excluded);

  py::class_<PopulationEstimate>(m, "PopulationEstimate")
      .def_readonly("matrix", &PopulationEstimate::matrix)
      .def_readonly("init", &PopulationEstimate::init);

  m.def("label_states", &label_states, py::arg("series"));
  m.def("clean_corpus", &clean_corpus, py::arg("corpus"),
        py::arg("thresholds") = CleaningThresholds{});
  m.def("derive_population_matrix", &derive_population_matrix, py::arg("retained"));
  m.def("read_fatalities_csv", &read_fatalities_csv, py::arg("path"));
  m.def("read_state_series_csv", &read_state_series_csv, py::arg("path"));
  m.def("write_state_series_csv", &write_state_series_csv, py::arg("path"), py::arg("corpus"));
  m.def("read_matrix_csv", &read_matrix_csv, py::arg("path"));

  // -- evaluation harness --------------------------------------------------------
  py::enum_<Method>(m, "Method")
      .value("CONFORMAL", Method::Conformal)
      .value("LIKELIHOOD", Method::Likelihood)
      .value("LIKELIHOOD_RANDOMIZED", Method::LikelihoodRandomized);

  py::class_<ExperimentGrid>(m, "ExperimentGrid")
      .def(py::init<>())
      .def_readwrite("target_levels", &ExperimentGrid::target_levels)
      .def_readwrite("horizons", &ExperimentGrid::horizons)
      .def_readwrite("replications", &ExperimentGrid::replications)
      .def_readwrite("calibration_length", &ExperimentGrid::calibration_length)
      .def_readwrite("seed", &ExperimentGrid::seed);

  py::class_<PredictorOptions>(m, "PredictorOptions")
      .def(py::init<>())
      .def_readwrite("max_permutations", &PredictorOptions::max_permutations)
      .def_readwrite("score_mode", &PredictorOptions::score_mode)
      .def_readwrite("plus_one", &PredictorOptions::plus_one)
      .def_readwrite("plus_one_state", &PredictorOptions::plus_one_state)
      .def_readwrite("enumeration_cap", &PredictorOptions::enumeration_cap)
      .def_readwrite("threads", &PredictorOptions::threads);

  py::class_<CoverageCell>(m, "CoverageCell")
      .def_readonly("method", &CoverageCell::method)
      .def_readonly("horizon", &CoverageCell::horizon)
      .def_readonly("target_level", &CoverageCell::target_level)
      .def_readonly("covered", &CoverageCell::covered)
      .def_readonly("replications", &CoverageCell::replications)
      .def_readonly("failures", &CoverageCell::failures)
      .def_property_readonly("empirical_coverage", &CoverageCell::empirical_coverage)
      .def_property_readonly("mc_stderr", &CoverageCell::mc_stderr)
      .def_property_readonly("mean_cardinality", &CoverageCell::mean_cardinality);

  py::class_<CoverageReport>(m, "CoverageReport")
      .def_readonly("cells", &CoverageReport::cells)
      .def("cell", &CoverageReport::cell, py::arg("method"), py::arg("horizon"),
           py::arg("target_level"), py::return_value_policy::reference_internal);

  py::class_<DroppedCountry>(m, "DroppedCountry")
      .def_readonly("country_id", &DroppedCountry::country_id)
      .def_readonly("reason", &DroppedCountry::reason);

  py::class_<BacktestReport>(m, "BacktestReport")
      .def_readonly("coverage", &BacktestReport::coverage)
      .def_readonly("dropped", &BacktestReport::dropped);

  py::class_<ForecastEntry>(m, "ForecastEntry")
      .def_readonly("rank", &ForecastEntry::rank)
      .def_readonly("forecast", &ForecastEntry::forecast)
      .def_readonly("value", &ForecastEntry::value);

  py::class_<MethodForecast>(m, "MethodForecast")
      .def_readonly("method", &MethodForecast::method)
      .def_readonly("level", &MethodForecast::level)
      .def_readonly("entries", &MethodForecast::entries)
      .def_readonly("composition", &MethodForecast::composition)
      .def_readonly("mass_deficit", &MethodForecast::mass_deficit)
      .def_readonly("emptied", &MethodForecast::emptied);

  m.def("run_simulation_study", &run_simulation_study, py::arg("true_matrix"),
        py::arg("true_init"), py::arg("grid"), py::arg("methods"),
        py::arg("options") = PredictorOptions{}, py::call_guard<py::gil_scoped_release>());
  m.def("expected_coverage_analytic", &expected_coverage_analytic, py::arg("true_matrix"),
        py::arg("true_init"), py::arg("calibration_length"));
  m.def("run_backtest", &run_backtest, py::arg("corpus"), py::arg("cutoff"),
        py::arg("target_levels"), py::arg("horizons"), py::arg("seed"), py::arg("methods"),
        py::arg("options") = PredictorOptions{}, py::call_guard<py::gil_scoped_release>());
  m.def("forward_forecast", &forward_forecast, py::arg("series"), py::arg("config"),
        py::arg("methods"), py::call_guard<py::gil_scoped_release>());
}
