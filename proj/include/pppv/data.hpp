#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pppv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Column selection over a covariate matrix.
using Columns = std::vector<Index>;

/// Observational dataset: binary treatment `z`, outcome `y`, raw covariates
/// `x` (no intercept column). Immutable once validated.
struct ObservedSample {
  Vector z;
  Vector y;
  Matrix x;
  std::vector<std::string> labels;

  Index n() const { return z.size(); }
  Index d() const { return x.cols(); }
  Index n_treated() const;

  /// Same covariates and outcomes under a different assignment vector.
  ObservedSample with_assignment(const Vector& assignment) const;
  /// Rows selected by index, repeats allowed.
  ObservedSample take_rows(const std::vector<Index>& rows) const;
};

/// Simulated sample that also keeps the latent generators and both potential
/// outcomes.
struct SimSample {
  ObservedSample observed;
  Matrix w;
  Vector y1;
  Vector y0;
  double true_tau = 0.0;
  Vector propensity;  // generating P(Z=1|X)
};

/// One entry per violated invariant; empty when the sample is usable.
std::vector<std::string> validate(const ObservedSample& sample);

/// Builds a sample and throws a validation error if it violates an invariant.
ObservedSample make_sample(Vector z, Vector y, Matrix x,
                           std::vector<std::string> labels = {});

ObservedSample load_csv(const std::filesystem::path& path);
ObservedSample read_csv(std::istream& in);

/// Writes `z,y,<labels...>` with 17 significant digits.
void write_csv(const ObservedSample& sample, std::ostream& out);
void write_csv(const ObservedSample& sample, const std::filesystem::path& path);

Columns all_columns(Index d);
/// Resolves comma-separated covariate names (or empty for all columns).
Columns resolve_columns(const ObservedSample& sample, const std::string& names);
/// Selected columns of `x`.
Matrix select_columns(const Matrix& x, const Columns& cols);

}  // namespace pppv
