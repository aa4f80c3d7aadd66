#include "markovcp/markov.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "markovcp/errors.hpp"

namespace markovcp {

namespace {
constexpr double kRowSumTolerance = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

InitialDistribution::InitialDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ValidationError("initial distribution must be nonempty");
  double sum = 0.0;
  for (double p : probs_) {
    if (p < 0.0) throw ValidationError("initial distribution has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance) {
    throw ValidationError("initial distribution sums to " + std::to_string(sum) + ", expected 1");
  }
}

InitialDistribution InitialDistribution::uniform(int m) {
  return InitialDistribution(std::vector<double>(static_cast<std::size_t>(m), 1.0 / m));
}

InitialDistribution InitialDistribution::point_mass(int state, int m) {
  std::vector<double> p(static_cast<std::size_t>(m), 0.0);
  p.at(static_cast<std::size_t>(state - 1)) = 1.0;
  return InitialDistribution(std::move(p));
}

TransitionMatrix::TransitionMatrix(int m, std::vector<double> probs,
                                   std::vector<std::int64_t> row_visits)
    : m_(m), probs_(std::move(probs)), visits_(std::move(row_visits)) {
  if (m_ < 1 || probs_.size() != static_cast<std::size_t>(m_) * m_ ||
      visits_.size() != static_cast<std::size_t>(m_)) {
    throw ValidationError("transition matrix dimensions are inconsistent");
  }
  for (int i = 0; i < m_; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m_; ++j) {
      const double p = probs_[static_cast<std::size_t>(i) * m_ + j];
      if (p < 0.0 || p > 1.0) {
        throw ValidationError("transition probability out of [0,1] in row " + std::to_string(i + 1));
      }
      sum += p;
    }
    if (visits_[static_cast<std::size_t>(i)] < 0) {
      throw ValidationError("negative visit count in row " + std::to_string(i + 1));
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw ValidationError("row " + std::to_string(i + 1) + " sums to " + std::to_string(sum) +
                            ", expected 1");
    }
  }
}

TransitionMatrix TransitionMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const int m = static_cast<int>(rows.size());
  if (m < 1) throw ValidationError("transition matrix must have at least one row");
  std::vector<double> probs;
  probs.reserve(static_cast<std::size_t>(m) * m);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != m) {
      throw ValidationError("transition matrix must be square");
    }
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return TransitionMatrix(m, std::move(probs), std::vector<std::int64_t>(m, 1));
}

bool TransitionMatrix::any_row_unvisited() const noexcept {
  for (std::int64_t v : visits_) {
    if (v == 0) return true;
  }
  return false;
}

TransitionMatrix estimate_transition_matrix(const StateSequence& seq, const StateSpace& space) {
  validate_sequence(seq, space);
  if (seq.size() < 2) {
    throw ValidationError("need at least 2 observations to estimate transitions, got " +
                          std::to_string(seq.size()));
  }
  const int m = space.size;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(m) * m, 0);
  std::vector<std::int64_t> visits(static_cast<std::size_t>(m), 0);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    const int from = seq[t] - 1;
    const int to = seq[t + 1] - 1;
    ++counts[static_cast<std::size_t>(from) * m + to];
    ++visits[static_cast<std::size_t>(from)];
  }
  std::vector<double> probs(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) {
    if (visits[static_cast<std::size_t>(i)] == 0) {
      for (int j = 0; j < m; ++j) probs[static_cast<std::size_t>(i) * m + j] = 1.0 / m;
    } else {
      const double denom = static_cast<double>(visits[static_cast<std::size_t>(i)]);
      for (int j = 0; j < m; ++j) {
        probs[static_cast<std::size_t>(i) * m + j] =
            static_cast<double>(counts[static_cast<std::size_t>(i) * m + j]) / denom;
      }
    }
  }
  return TransitionMatrix(m, std::move(probs), std::move(visits));
}

double sequence_log_probability(const StateSequence& forecast, int last_state,
                                const TransitionMatrix& matrix) {
  if (forecast.empty()) throw ValidationError("forecast must be nonempty");
  double total = 0.0;
  int from = last_state;
  for (int to : forecast) {
    const double p = matrix.prob(from, to);
    if (p == 0.0) return kNegInf;
    total += std::log(p);
    from = to;
  }
  return total;
}

double path_log_probability(const StateSequence& path, const TransitionMatrix& matrix) {
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const double p = matrix.prob(path[t], path[t + 1]);
    if (p == 0.0) return kNegInf;
    total += std::log(p);
  }
  return total;
}

InitialDistribution matrix_power_distribution(const InitialDistribution& init,
                                              const TransitionMatrix& matrix, int steps) {
  if (steps < 0) throw ValidationError("steps must be nonnegative");
  if (init.size() != matrix.size()) {
    throw ValidationError("initial distribution size does not match matrix size");
  }
  const int m = matrix.size();
  std::vector<double> current = init.probs();
  std::vector<double> next(static_cast<std::size_t>(m), 0.0);
  for (int step = 0; step < steps; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      const double w = current[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      for (int j = 0; j < m; ++j) {
        next[static_cast<std::size_t>(j)] += w * matrix.prob(i + 1, j + 1);
      }
    }
    current.swap(next);
  }
  const double sum = std::accumulate(current.begin(), current.end(), 0.0);
  for (double& p : current) p /= sum;
  return InitialDistribution(std::move(current));
}

std::vector<std::vector<double>> transition_powers(const TransitionMatrix& matrix, int max_power) {
  if (max_power < 0) throw ValidationError("max_power must be nonnegative");
  const int m = matrix.size();
  const std::size_t n = static_cast<std::size_t>(m) * m;
  std::vector<std::vector<double>> powers;
  powers.reserve(static_cast<std::size_t>(max_power) + 1);
  std::vector<double> identity(n, 0.0);
  for (int i = 0; i < m; ++i) identity[static_cast<std::size_t>(i) * m + i] = 1.0;
  powers.push_back(std::move(identity));
  for (int k = 1; k <= max_power; ++k) {
    const std::vector<double>& prev = powers.back();
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < m; ++i) {
      for (int l = 0; l < m; ++l) {
        const double w = prev[static_cast<std::size_t>(i) * m + l];
        if (w == 0.0) continue;
        for (int j = 0; j < m; ++j) {
          out[static_cast<std::size_t>(i) * m + j] += w * matrix.prob(l + 1, j + 1);
        }
      }
    }
    powers.push_back(std::move(out));
  }
  return powers;
}

StateSequence simulate_chain(const InitialDistribution& init, const TransitionMatrix& matrix,
                             int length, Rng& rng) {
  if (length < 1) throw ValidationError("chain length must be positive");
  if (init.size() != matrix.size()) {
    throw ValidationError("initial distribution size does not match matrix size");
  }
  const int m = matrix.size();
  const auto draw = [&](auto prob_of) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (int j = 1; j <= m; ++j) {
      cum += prob_of(j);
      if (u < cum) return j;
    }
    return m;  // guard against accumulated rounding
  };

  StateSequence seq;
  seq.reserve(static_cast<std::size_t>(length));
  int state = draw([&](int j) { return init.prob(j); });
  seq.push_back(state);
  for (int t = 1; t < length; ++t) {
    if (matrix.row_unvisited(state)) {
      throw ValidationError("cannot simulate from state " + std::to_string(state) +
                            ": row was never observed");
    }
    state = draw([&](int j) { return matrix.prob(state, j); });
    seq.push_back(state);
  }
  return seq;
}

StateSequence simulate_chain(const InitialDistribution& init, const TransitionMatrix& matrix,
                             int length, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_chain(init, matrix, length, rng);
}

}  // namespace markovcp
