#include "pppv/data.hpp"

#include "pppv/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pppv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::singular_design: return "singular_design";
    case ErrorKind::separation: return "separation";
    case ErrorKind::degenerate_variance: return "degenerate_variance";
    case ErrorKind::initialization: return "initialization";
    case ErrorKind::unstable_bootstrap: return "unstable_bootstrap";
    case ErrorKind::design: return "design";
    case ErrorKind::undefined_statistic: return "undefined_statistic";
    case ErrorKind::unreliable_study: return "unreliable_study";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Index ObservedSample::n_treated() const {
  return static_cast<Index>((z.array() == 1.0).count());
}

ObservedSample ObservedSample::with_assignment(const Vector& assignment) const {
  if (assignment.size() != n()) {
    throw Error(ErrorKind::dimension, "assignment length does not match sample size");
  }
  ObservedSample out = *this;
  out.z = assignment;
  return out;
}

ObservedSample ObservedSample::take_rows(const std::vector<Index>& rows) const {
  ObservedSample out;
  const auto m = static_cast<Index>(rows.size());
  out.z.resize(m);
  out.y.resize(m);
  out.x.resize(m, d());
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    out.z(i) = z(r);
    out.y(i) = y(r);
    out.x.row(i) = x.row(r);
  }
  out.labels = labels;
  return out;
}

std::vector<std::string> validate(const ObservedSample& sample) {
  std::vector<std::string> violations;
  const Index n = sample.z.size();
  if (sample.y.size() != n || sample.x.rows() != n) {
    violations.emplace_back("dimension mismatch");
    return violations;
  }
  if (!sample.labels.empty() &&
      static_cast<Index>(sample.labels.size()) != sample.x.cols()) {
    violations.emplace_back("label count mismatch");
  }
  bool binary = true;
  Index treated = 0;
  for (Index i = 0; i < n; ++i) {
    if (sample.z(i) == 1.0) {
      ++treated;
    } else if (sample.z(i) != 0.0) {
      binary = false;
    }
  }
  if (!binary) violations.emplace_back("non-binary treatment");
  if (treated == 0) violations.emplace_back("no treated units");
  if (binary && treated == n) violations.emplace_back("no control units");
  if (!sample.y.allFinite()) violations.emplace_back("non-finite outcome");
  if (!sample.x.allFinite()) violations.emplace_back("non-finite covariate");
  return violations;
}

ObservedSample make_sample(Vector z, Vector y, Matrix x,
                           std::vector<std::string> labels) {
  if (labels.empty()) {
    for (Index j = 0; j < x.cols(); ++j) labels.push_back("x" + std::to_string(j + 1));
  }
  ObservedSample sample{std::move(z), std::move(y), std::move(x), std::move(labels)};
  const auto violations = validate(sample);
  if (!violations.empty()) {
    std::string message = "invalid sample:";
    for (const auto& v : violations) message += " " + v + ";";
    throw Error(ErrorKind::validation, message);
  }
  return sample;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

double parse_number(std::string_view cell, Index row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::parse, "non-numeric cell at row " + std::to_string(row) +
                                      ", column " + std::to_string(col + 1) + ": '" +
                                      std::string(cell) + "'");
  }
  return value;
}

}  // namespace

ObservedSample read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "empty file: missing header row");
  const auto header = split(line);
  std::ptrdiff_t z_col = -1;
  std::ptrdiff_t y_col = -1;
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "z") {
      if (z_col >= 0) throw Error(ErrorKind::format, "duplicate column 'z'");
      z_col = static_cast<std::ptrdiff_t>(j);
    } else if (header[j] == "y") {
      if (y_col >= 0) throw Error(ErrorKind::format, "duplicate column 'y'");
      y_col = static_cast<std::ptrdiff_t>(j);
    } else {
      cov_cols.push_back(j);
      labels.emplace_back(header[j]);
    }
  }
  if (z_col < 0) throw Error(ErrorKind::format, "missing column 'z'");
  if (y_col < 0) throw Error(ErrorKind::format, "missing column 'y'");

  std::vector<double> z;
  std::vector<double> y;
  std::vector<double> x;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::format, "row " + std::to_string(row) + " has " +
                                         std::to_string(cells.size()) + " cells, expected " +
                                         std::to_string(header.size()));
    }
    const auto zc = cells[static_cast<std::size_t>(z_col)];
    if (zc == "0") {
      z.push_back(0.0);
    } else if (zc == "1") {
      z.push_back(1.0);
    } else {
      throw Error(ErrorKind::validation, "non-binary treatment at row " + std::to_string(row) +
                                             ": '" + std::string(zc) + "'");
    }
    y.push_back(parse_number(cells[static_cast<std::size_t>(y_col)], row,
                             static_cast<std::size_t>(y_col)));
    for (const auto j : cov_cols) x.push_back(parse_number(cells[j], row, j));
  }

  const auto n = static_cast<Index>(z.size());
  const auto d = static_cast<Index>(cov_cols.size());
  Matrix xm(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) xm(i, j) = x[static_cast<std::size_t>(i * d + j)];
  }
  return make_sample(Eigen::Map<Vector>(z.data(), n), Eigen::Map<Vector>(y.data(), n),
                     std::move(xm), std::move(labels));
}

ObservedSample load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_csv(in);
}

void write_csv(const ObservedSample& sample, std::ostream& out) {
  out << "z,y";
  for (Index j = 0; j < sample.d(); ++j) {
    out << ',' << (j < static_cast<Index>(sample.labels.size())
                       ? sample.labels[static_cast<std::size_t>(j)]
                       : "x" + std::to_string(j + 1));
  }
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < sample.n(); ++i) {
    out << static_cast<int>(sample.z(i)) << ',' << sample.y(i);
    for (Index j = 0; j < sample.d(); ++j) out << ',' << sample.x(i, j);
    out << '\n';
  }
}

void write_csv(const ObservedSample& sample, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  write_csv(sample, out);
}

Columns all_columns(Index d) {
  Columns cols(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) cols[static_cast<std::size_t>(j)] = j;
  return cols;
}

Columns resolve_columns(const ObservedSample& sample, const std::string& names) {
  if (names.empty() || names == "all") return all_columns(sample.d());
  if (names == "none") return {};
  Columns cols;
  for (const auto name : split(names)) {
    bool found = false;
    for (std::size_t j = 0; j < sample.labels.size(); ++j) {
      if (sample.labels[j] == name) {
        cols.push_back(static_cast<Index>(j));
        found = true;
        break;
      }
    }
    if (!found) throw Error(ErrorKind::config, "unknown covariate '" + std::string(name) + "'");
  }
  return cols;
}

Matrix select_columns(const Matrix& x, const Columns& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= x.cols()) {
      throw Error(ErrorKind::dimension, "column index " + std::to_string(cols[k]) +
                                            " out of range");
    }
    out.col(static_cast<Index>(k)) = x.col(cols[k]);
  }
  return out;
}

}  // namespace pppv
