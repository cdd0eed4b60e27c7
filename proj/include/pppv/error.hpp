#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pppv {

enum class ErrorKind {
  format,              // malformed input file
  parse,               // non-numeric cell
  validation,          // sample invariant violated
  dimension,           // shape mismatch between arguments
  singular_design,     // rank-deficient design matrix
  separation,          // logistic MLE does not exist
  degenerate_variance, // all influence values are zero
  initialization,      // sampler could not start
  unstable_bootstrap,  // too many failed resamples
  design,              // randomization design is not usable
  undefined_statistic, // observed statistic could not be computed
  unreliable_study,    // too many failed replications
  config,              // bad configuration value
  io,                  // file could not be opened or written
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pppv
