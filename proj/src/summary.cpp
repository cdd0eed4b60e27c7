#include "pppv/error.hpp"
#include "pppv/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace pppv {

double ks_uniform(std::vector<double> p_values) {
  if (p_values.empty()) return 0.0;
  std::sort(p_values.begin(), p_values.end());
  const auto m = static_cast<double>(p_values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    const double u = std::clamp(p_values[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / m - u, u - static_cast<double>(i) / m});
  }
  return d;
}

VariantSummary summarize_pvalues(std::string label, const std::vector<double>& p_values) {
  VariantSummary s;
  s.label = std::move(label);
  s.count = static_cast<int>(p_values.size());
  if (p_values.empty()) return s;
  const auto m = static_cast<double>(p_values.size());
  for (std::size_t a = 0; a < kAlphaLevels.size(); ++a) {
    const auto hits = std::count_if(p_values.begin(), p_values.end(),
                                    [&](double p) { return p <= kAlphaLevels[a]; });
    s.rejection[a] = static_cast<double>(hits) / m;
    s.rejection_se[a] = std::sqrt(s.rejection[a] * (1.0 - s.rejection[a]) / m);
  }
  s.ks = ks_uniform(p_values);
  const double width = 1.0 / kHistogramBins;
  for (const double p : p_values) {
    const auto bin = std::min(kHistogramBins - 1,
                              static_cast<int>(std::floor(std::clamp(p, 0.0, 1.0) / width)));
    s.density[static_cast<std::size_t>(bin)] += 1.0;
  }
  for (auto& d : s.density) d /= m * width;
  return s;
}

std::vector<VariantSummary> summarize(const StudyResult& result) {
  std::vector<VariantSummary> out;
  for (Index v = 0; v < result.p_values.cols(); ++v) {
    std::vector<double> p(static_cast<std::size_t>(result.p_values.rows()));
    for (Index r = 0; r < result.p_values.rows(); ++r) {
      p[static_cast<std::size_t>(r)] = result.p_values(r, v);
    }
    out.push_back(summarize_pvalues(result.labels[static_cast<std::size_t>(v)], p));
  }
  return out;
}

void write_pvalues_csv(const StudyResult& result, std::ostream& out) {
  out << "replication,method,p_value,t_observed\n" << std::setprecision(17);
  for (Index r = 0; r < result.p_values.rows(); ++r) {
    for (Index v = 0; v < result.p_values.cols(); ++v) {
      out << result.replication_index[static_cast<std::size_t>(r)] << ','
          << result.labels[static_cast<std::size_t>(v)] << ',' << result.p_values(r, v) << ','
          << result.t_observed(r, v) << '\n';
    }
  }
}

StudyResult read_pvalues_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("replication,method,p_value", 0) != 0) {
    throw Error(ErrorKind::format, "expected header 'replication,method,p_value,t_observed'");
  }
  std::vector<std::string> labels;
  std::map<int, std::map<std::string, std::pair<double, double>>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string rep;
    std::string label;
    std::string p;
    std::string t;
    if (!std::getline(ss, rep, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, p, ',')) {
      throw Error(ErrorKind::format, "line " + std::to_string(line_no) + ": too few fields");
    }
    std::getline(ss, t, ',');
    try {
      const int r = std::stoi(rep);
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
      rows[r][label] = {std::stod(p), t.empty() ? 0.0 : std::stod(t)};
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": non-numeric field");
    }
  }
  StudyResult result;
  result.labels = labels;
  result.p_values.resize(static_cast<Index>(rows.size()), static_cast<Index>(labels.size()));
  result.t_observed.resizeLike(result.p_values);
  Index k = 0;
  for (const auto& [r, values] : rows) {
    for (std::size_t v = 0; v < labels.size(); ++v) {
      const auto it = values.find(labels[v]);
      if (it == values.end()) {
        throw Error(ErrorKind::format, "replication " + std::to_string(r) + " lacks method " +
                                           labels[v]);
      }
      result.p_values(k, static_cast<Index>(v)) = it->second.first;
      result.t_observed(k, static_cast<Index>(v)) = it->second.second;
    }
    result.replication_index.push_back(r);
    ++k;
  }
  result.replications = static_cast<int>(rows.size());
  return result;
}

void write_summary_csv(const std::vector<VariantSummary>& summary, std::ostream& out) {
  out << "method,count,reject_0.01,se_0.01,reject_0.05,se_0.05,reject_0.1,se_0.1,ks\n"
      << std::setprecision(17);
  for (const auto& s : summary) {
    out << s.label << ',' << s.count;
    for (std::size_t a = 0; a < kAlphaLevels.size(); ++a) {
      out << ',' << s.rejection[a] << ',' << s.rejection_se[a];
    }
    out << ',' << s.ks << '\n';
  }
}

std::string histogram_svg(const VariantSummary& summary) {
  constexpr double kWidth = 360.0;
  constexpr double kHeight = 240.0;
  constexpr double kLeft = 40.0;
  constexpr double kBottom = 30.0;
  constexpr double kTop = 30.0;
  const double plot_w = kWidth - kLeft - 10.0;
  const double plot_h = kHeight - kBottom - kTop;
  const auto y_of = [&](double density) {
    return kTop + plot_h * (1.0 - density / kDensityCap);
  };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\" "
     << "font-family=\"sans-serif\">" << summary.label << " (n=" << summary.count << ")</text>\n";
  const double bar_w = plot_w / kHistogramBins;
  for (int b = 0; b < kHistogramBins; ++b) {
    const double d = std::min(summary.density[static_cast<std::size_t>(b)], kDensityCap);
    const double top = y_of(d);
    os << "<rect x=\"" << kLeft + b * bar_w << "\" y=\"" << top << "\" width=\"" << bar_w
       << "\" height=\"" << kTop + plot_h - top
       << "\" fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"0.5\"/>\n";
  }
  // Axes.
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
     << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kTop + plot_h << "\" stroke=\"black\"/>\n";
  for (const double tick : {0.0, 0.5, 1.0}) {
    const double x = kLeft + tick * plot_w;
    os << "<text x=\"" << x << "\" y=\"" << kTop + plot_h + 16
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
       << std::setprecision(1) << tick << std::setprecision(2) << "</text>\n";
  }
  for (const double tick : {0.0, 1.0, 2.0}) {
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y_of(tick) + 4
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
       << std::setprecision(0) << tick << std::setprecision(2) << "</text>\n";
  }
  // Uniform reference and truncation cap.
  os << "<line x1=\"" << kLeft << "\" y1=\"" << y_of(1.0) << "\" x2=\"" << kLeft + plot_w
     << "\" y2=\"" << y_of(1.0) << "\" stroke=\"#636363\" stroke-dasharray=\"2,2\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << y_of(kDensityCap) << "\" x2=\""
     << kLeft + plot_w << "\" y2=\"" << y_of(kDensityCap)
     << "\" stroke=\"#de2d26\" stroke-dasharray=\"6,3\"/>\n";
  os << "</svg>\n";
  return os.str();
}

void write_study_outputs(const StudyResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const std::filesystem::path& name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorKind::io, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("pvalues.csv");
    write_pvalues_csv(result, out);
  }
  const auto summary = summarize(result);
  {
    auto out = open("summary.csv");
    write_summary_csv(summary, out);
  }
  for (const auto& s : summary) {
    auto out = open("hist_" + s.label + ".svg");
    out << histogram_svg(s);
  }
}

}  // namespace pppv
