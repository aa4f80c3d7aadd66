#include "markovcp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "markovcp/errors.hpp"

namespace markovcp {

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

template <typename T>
T parse_number(const std::string& file, std::size_t line, std::size_t column,
               const std::string& text, const char* what) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    throw ParseError(file, line, column, std::string("expected ") + what + ", got '" + text + "'");
  }
  return value;
}

double parse_probability(const std::string& file, std::size_t line, std::size_t column,
                         const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    throw ParseError(file, line, column, "expected a probability, got '" + text + "'");
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void expect_header(const std::string& file, const std::string& line, const char* expected) {
  if (strip_cr(line) != expected) {
    throw ParseError(file, 1, 1, std::string("expected header '") + expected + "'");
  }
}

struct MonthRow {
  YearMonth month;
  std::int64_t value;
};

// Sorts one country's rows and checks month contiguity.
std::pair<YearMonth, std::vector<std::int64_t>> assemble_months(const std::string& file,
                                                                const std::string& country,
                                                                std::vector<MonthRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const MonthRow& a, const MonthRow& b) { return a.month < b.month; });
  std::vector<std::int64_t> values;
  values.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      if (rows[i].month == rows[i - 1].month) {
        throw ValidationError(file + ": country " + country + " repeats month " +
                              std::to_string(rows[i].month.year) + "-" +
                              std::to_string(rows[i].month.month));
      }
      if (rows[i].month != rows[i - 1].month.next()) {
        throw ValidationError(file + ": country " + country + " has a gap between " +
                              std::to_string(rows[i - 1].month.year) + "-" +
                              std::to_string(rows[i - 1].month.month) + " and " +
                              std::to_string(rows[i].month.year) + "-" +
                              std::to_string(rows[i].month.month));
      }
    }
    values.push_back(rows[i].value);
  }
  return {rows.front().month, std::move(values)};
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::vector<CountrySeries> read_fatalities_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(file, 1, 1, "empty file");
  expect_header(file, line, "country_id,year,month,fatalities");

  std::map<std::string, std::size_t> index;
  std::vector<std::string> order;
  std::vector<std::vector<MonthRow>> rows;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw ParseError(file, line_no, 1, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(file, line_no, 1, "empty country_id");
    const int year = parse_number<int>(file, line_no, 2, fields[1], "a year");
    const int month = parse_number<int>(file, line_no, 3, fields[2], "a month");
    if (month < 1 || month > 12) throw ParseError(file, line_no, 3, "month must be in 1..12");
    const auto fatalities =
        parse_number<std::int64_t>(file, line_no, 4, fields[3], "a fatality count");
    if (fatalities < 0) throw ParseError(file, line_no, 4, "fatalities must be nonnegative");

    auto [it, inserted] = index.try_emplace(fields[0], rows.size());
    if (inserted) {
      order.push_back(fields[0]);
      rows.emplace_back();
    }
    rows[it->second].push_back({YearMonth{year, month}, fatalities});
  }
  if (order.empty()) throw ValidationError(file + ": no rows");

  std::vector<CountrySeries> out;
  out.reserve(order.size());
  for (std::size_t c = 0; c < order.size(); ++c) {
    auto [start, values] = assemble_months(file, order[c], std::move(rows[c]));
    out.push_back({order[c], start, std::move(values)});
  }
  return out;
}

void write_state_series_csv(const std::filesystem::path& path,
                            const std::vector<LabeledSeries>& corpus) {
  std::ofstream out = open_output(path);
  out << "country_id,year,month,state\n";
  for (const LabeledSeries& series : corpus) {
    for (std::size_t t = 0; t < series.states.size(); ++t) {
      const YearMonth ym = series.month_at(t);
      out << series.country_id << ',' << ym.year << ',' << ym.month << ',' << series.states[t]
          << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<LabeledSeries> read_state_series_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(file, 1, 1, "empty file");
  expect_header(file, line, "country_id,year,month,state");

  std::map<std::string, std::size_t> index;
  std::vector<std::string> order;
  std::vector<std::vector<MonthRow>> rows;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw ParseError(file, line_no, 1, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(file, line_no, 1, "empty country_id");
    const int year = parse_number<int>(file, line_no, 2, fields[1], "a year");
    const int month = parse_number<int>(file, line_no, 3, fields[2], "a month");
    if (month < 1 || month > 12) throw ParseError(file, line_no, 3, "month must be in 1..12");
    const int state = parse_number<int>(file, line_no, 4, fields[3], "a state label");
    if (state < 1 || state > kNumConflictStates) {
      throw ParseError(file, line_no, 4, "state must be in 1..4");
    }

    auto [it, inserted] = index.try_emplace(fields[0], rows.size());
    if (inserted) {
      order.push_back(fields[0]);
      rows.emplace_back();
    }
    rows[it->second].push_back({YearMonth{year, month}, state});
  }
  if (order.empty()) throw ValidationError(file + ": no rows");

  std::vector<LabeledSeries> out;
  out.reserve(order.size());
  for (std::size_t c = 0; c < order.size(); ++c) {
    auto [start, values] = assemble_months(file, order[c], std::move(rows[c]));
    LabeledSeries series;
    series.country_id = order[c];
    series.start = start;
    series.states.assign(values.begin(), values.end());
    out.push_back(std::move(series));
  }
  return out;
}

void write_exclusions_csv(const std::filesystem::path& path,
                          const std::vector<ExclusionRecord>& excluded) {
  std::ofstream out = open_output(path);
  out << "country_id,rule_failed\n";
  for (const ExclusionRecord& record : excluded) {
    out << record.country_id << ',' << record.rule_failed << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

TransitionMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string file = path.string();
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t f = 0; f < fields.size(); ++f) {
      row.push_back(parse_probability(file, line_no, f + 1, fields[f]));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(file + ": no matrix rows");
  const std::size_t m = rows.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (rows[i].size() != m) {
      throw ValidationError(file + ": row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " entries, expected " +
                            std::to_string(m));
    }
    double sum = 0.0;
    for (double p : rows[i]) {
      if (p < 0.0) {
        throw ValidationError(file + ": row " + std::to_string(i + 1) +
                              " contains a negative probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError(file + ": row " + std::to_string(i + 1) + " sums to " +
                            format_double(sum) + ", expected 1");
    }
    for (double& p : rows[i]) p /= sum;
  }
  return TransitionMatrix::from_rows(rows);
}

void write_matrix_csv(const std::filesystem::path& path, const TransitionMatrix& matrix) {
  std::ofstream out = open_output(path);
  for (int i = 1; i <= matrix.size(); ++i) {
    for (int j = 1; j <= matrix.size(); ++j) {
      if (j > 1) out << ',';
      out << format_double(matrix.prob(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace markovcp
