#include "pppv/ps_model.hpp"

#include "pppv/error.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace pppv {

namespace {

double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double log_likelihood(const Vector& z, const Vector& eta) {
  double total = 0.0;
  for (Index i = 0; i < eta.size(); ++i) total += z(i) * eta(i) - softplus(eta(i));
  return total;
}

Vector fitted_probabilities(const Vector& eta) {
  Vector e(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    e(i) = std::clamp(logistic(eta(i)), kProbabilityClip, 1.0 - kProbabilityClip);
  }
  return e;
}

std::string describe_direction(const Vector& theta) {
  std::ostringstream os;
  os << std::setprecision(4) << "direction (";
  const double norm = theta.norm();
  for (Index j = 0; j < theta.size(); ++j) {
    os << (j ? ", " : "") << (norm > 0 ? theta(j) / norm : 0.0);
  }
  os << ")";
  return os.str();
}

}  // namespace

Matrix with_intercept(const Matrix& x) {
  Matrix design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  return design;
}

void require_full_rank(const Matrix& design, const std::string& what) {
  if (design.rows() < design.cols()) {
    throw Error(ErrorKind::singular_design,
                what + ": fewer rows than parameters (" + std::to_string(design.rows()) +
                    " < " + std::to_string(design.cols()) + ")");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < design.cols()) {
    throw Error(ErrorKind::singular_design,
                what + ": design has rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(design.cols()));
  }
}

FittedPropensity fit_logistic(const Vector& z, const Matrix& design, const Vector* start,
                              bool check_rank) {
  const Index n = design.rows();
  const Index p = design.cols();
  if (z.size() != n) throw Error(ErrorKind::dimension, "fit_logistic: z length mismatch");
  if (check_rank) require_full_rank(design, "propensity model");

  FittedPropensity fit;
  fit.theta = (start != nullptr && start->size() == p) ? *start : Vector::Zero(p);
  Vector eta = design * fit.theta;
  double ll = log_likelihood(z, eta);
  const double tolerance = 1e-8 * static_cast<double>(n);
  double previous_gradient = std::numeric_limits<double>::infinity();
  int stalled = 0;

  for (int iter = 0; iter <= kMaxIrlsIterations; ++iter) {
    Vector e(n);
    Vector w(n);
    for (Index i = 0; i < n; ++i) {
      e(i) = logistic(eta(i));
      w(i) = e(i) * (1.0 - e(i));
    }
    const Vector gradient = design.transpose() * (z - e);
    const double gradient_norm = gradient.norm();
    fit.iterations = iter;
    if (gradient_norm <= tolerance) {
      fit.converged = true;
      break;
    }
    if (iter == kMaxIrlsIterations) break;

    const double max_eta = eta.cwiseAbs().maxCoeff();
    if (max_eta > kSeparationEta && gradient_norm > 0.25 * previous_gradient) {
      if (++stalled >= 5) {
        throw Error(ErrorKind::separation,
                    "perfect separation along " + describe_direction(fit.theta.tail(p - 1)) +
                        " after " + std::to_string(iter) + " iterations");
      }
    } else {
      stalled = 0;
    }
    previous_gradient = gradient_norm;

    const Matrix hessian = design.transpose() * w.asDiagonal() * design;
    Eigen::LLT<Matrix> llt(hessian);
    Vector step = llt.solve(gradient);
    if (llt.info() != Eigen::Success || !step.allFinite()) {
      if (max_eta > kSeparationEta) {
        throw Error(ErrorKind::separation,
                    "perfect separation along " + describe_direction(fit.theta.tail(p - 1)) +
                        " (information matrix singular)");
      }
      throw Error(ErrorKind::singular_design, "propensity model: information matrix singular");
    }

    // Step halving keeps the likelihood monotone far from the optimum.
    double t = 1.0;
    Vector candidate = fit.theta + step;
    Vector candidate_eta = design * candidate;
    double candidate_ll = log_likelihood(z, candidate_eta);
    while (!(candidate_ll >= ll - 1e-12 * std::abs(ll)) && t > 1e-10) {
      t *= 0.5;
      candidate = fit.theta + t * step;
      candidate_eta = design * candidate;
      candidate_ll = log_likelihood(z, candidate_eta);
    }
    fit.theta = std::move(candidate);
    eta = std::move(candidate_eta);
    ll = candidate_ll;
  }

  fit.e_hat = fitted_probabilities(eta);
  return fit;
}

FittedPropensity fit_logistic(const ObservedSample& sample) {
  return fit_logistic(sample.z, with_intercept(sample.x));
}

FittedPropensity fit_logistic(const ObservedSample& sample, const Columns& cols) {
  return fit_logistic(sample.z, with_intercept(select_columns(sample.x, cols)));
}

LogPosterior log_posterior(const Vector& theta, const Vector& z, const Matrix& design) {
  if (theta.size() != design.cols()) {
    throw Error(ErrorKind::dimension, "log_posterior: theta has length " +
                                          std::to_string(theta.size()) + ", expected " +
                                          std::to_string(design.cols()));
  }
  const Vector eta = design * theta;
  LogPosterior out;
  if (!eta.allFinite()) {
    out.value = -std::numeric_limits<double>::infinity();
    out.saturated = true;
    return out;
  }
  out.value = log_likelihood(z, eta);
  for (Index i = 0; i < eta.size(); ++i) {
    const double e = logistic(eta(i));
    if (e == 0.0 || e == 1.0) {
      out.saturated = true;
      break;
    }
  }
  return out;
}

LogPosterior log_posterior(const Vector& theta, const ObservedSample& sample) {
  return log_posterior(theta, sample.z, with_intercept(sample.x));
}

PosteriorDraws sample_posterior(const Vector& z, const Matrix& design,
                                const SamplerOptions& options) {
  if (options.n_draws < 1 || options.burn_in < 0) {
    throw Error(ErrorKind::config, "sample_posterior: need n_draws >= 1 and burn_in >= 0");
  }
  const Index p = design.cols();
  const FittedPropensity mle = fit_logistic(z, design);
  if (!mle.converged) {
    throw Error(ErrorKind::initialization, "sample_posterior: MLE did not converge");
  }

  Vector w(mle.e_hat.size());
  for (Index i = 0; i < w.size(); ++i) w(i) = mle.e_hat(i) * (1.0 - mle.e_hat(i));
  const Matrix information = design.transpose() * w.asDiagonal() * design;
  const Matrix covariance = information.llt().solve(Matrix::Identity(p, p));
  Eigen::LLT<Matrix> chol(covariance);
  if (chol.info() != Eigen::Success || !covariance.allFinite()) {
    throw Error(ErrorKind::initialization, "sample_posterior: curvature at MLE not invertible");
  }
  const Matrix root = chol.matrixL();

  Vector current = mle.theta;
  double current_lp = log_likelihood(z, design * current);
  if (!std::isfinite(current_lp)) {
    throw Error(ErrorKind::initialization, "sample_posterior: non-finite log-posterior at start");
  }

  Rng rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double log_scale = std::log(2.38 * 2.38 / static_cast<double>(p));

  PosteriorDraws out;
  out.burn_in = options.burn_in;
  out.seed = options.seed;
  out.draws.resize(options.n_draws, p);
  out.names.push_back("(intercept)");
  for (Index j = 1; j < p; ++j) out.names.push_back("theta" + std::to_string(j));

  constexpr int kBatch = 50;
  int batch_accepted = 0;
  int batch_size = 0;
  long retained_accepted = 0;
  Vector noise(p);
  const int total = options.burn_in + options.n_draws;
  for (int iter = 0; iter < total; ++iter) {
    for (Index j = 0; j < p; ++j) noise(j) = normal(rng);
    const Vector proposal = current + std::exp(0.5 * log_scale) * (root * noise);
    const double proposal_lp = log_likelihood(z, design * proposal);
    const bool accept =
        std::isfinite(proposal_lp) && std::log(uniform(rng)) < proposal_lp - current_lp;
    if (accept) {
      current = proposal;
      current_lp = proposal_lp;
    }
    if (iter < options.burn_in) {
      batch_accepted += accept ? 1 : 0;
      if (++batch_size == kBatch || iter + 1 == options.burn_in) {
        const double rate = static_cast<double>(batch_accepted) / batch_size;
        if (rate < options.min_acceptance) {
          log_scale += std::log(std::max(rate, 0.02) / 0.25);
        } else if (rate > options.max_acceptance) {
          log_scale += std::log(rate / 0.4);
        }
        batch_accepted = 0;
        batch_size = 0;
      }
    } else {
      retained_accepted += accept ? 1 : 0;
      out.draws.row(iter - options.burn_in) = current.transpose();
    }
  }
  out.acceptance_rate = static_cast<double>(retained_accepted) / options.n_draws;
  out.proposal_scale = std::exp(log_scale);
  return out;
}

PosteriorDraws sample_posterior(const ObservedSample& sample, int burn_in, int n_draws,
                                std::uint64_t seed) {
  SamplerOptions options;
  options.burn_in = burn_in;
  options.n_draws = n_draws;
  options.seed = seed;
  return sample_posterior(sample, all_columns(sample.d()), options);
}

PosteriorDraws sample_posterior(const ObservedSample& sample, const Columns& cols,
                                const SamplerOptions& options) {
  PosteriorDraws out =
      sample_posterior(sample.z, with_intercept(select_columns(sample.x, cols)), options);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto j = static_cast<std::size_t>(cols[k]);
    if (j < sample.labels.size()) out.names[k + 1] = sample.labels[j];
  }
  return out;
}

Vector predict_propensity(const Vector& theta, const Matrix& x) {
  if (theta.size() != x.cols() + 1) {
    throw Error(ErrorKind::dimension, "predict_propensity: theta has length " +
                                          std::to_string(theta.size()) + ", expected " +
                                          std::to_string(x.cols() + 1));
  }
  const Vector eta = (x * theta.tail(x.cols())).array() + theta(0);
  return fitted_probabilities(eta);
}

Vector draw_assignments(const Vector& probabilities, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector z(probabilities.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = uniform(rng) < probabilities(i) ? 1.0 : 0.0;
  return z;
}

void write_draws_csv(const PosteriorDraws& draws, std::ostream& out) {
  for (std::size_t j = 0; j < draws.names.size(); ++j) out << (j ? "," : "") << draws.names[j];
  out << '\n' << std::setprecision(17);
  for (Index r = 0; r < draws.draws.rows(); ++r) {
    for (Index j = 0; j < draws.draws.cols(); ++j) {
      out << (j ? "," : "") << draws.draws(r, j);
    }
    out << '\n';
  }
}

}  // namespace pppv
