// Averages X over many regular-design units and prints the estimate next to
// the closed-form mean used by the generator.
//
//   covariate_mean_oracle [units=10000000] [seed=20240101]

#include "pppv/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>

int main(int argc, char** argv) {
  const long total = argc > 1 ? std::atol(argv[1]) : 10'000'000L;
  const unsigned long long seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 20240101ULL;
  constexpr int kChunk = 100'000;

  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  Eigen::Vector4d sum_sq = Eigen::Vector4d::Zero();
  long seen = 0;
  for (long chunk = 0; seen < total; ++chunk) {
    pppv::DgpConfig config;
    config.kind = pppv::DgpKind::regular;
    config.n = static_cast<int>(std::min<long>(kChunk, total - seen));
    config.seed = seed + static_cast<unsigned long long>(chunk);
    const auto sim = pppv::gen_regular(config);
    sum += sim.observed.x.colwise().sum().transpose();
    sum_sq += sim.observed.x.array().square().matrix().colwise().sum().transpose();
    seen += config.n;
  }
  const auto n = static_cast<double>(seen);
  std::cout << std::setprecision(6) << std::fixed;
  std::cout << "units " << seen << "\n";
  for (int j = 0; j < 4; ++j) {
    const double mean = sum(j) / n;
    const double sd = std::sqrt(sum_sq(j) / n - mean * mean);
    std::cout << "x" << j + 1 << "  monte_carlo " << mean << "  +/- " << sd / std::sqrt(n)
              << "  closed_form " << pppv::kRegularCovariateMean[static_cast<std::size_t>(j)]
              << "\n";
  }
  return 0;
}
