#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srdrm {

// One tensor whose elements are perturbed in place during a check, paired
// with the analytic gradient of the objective w.r.t. those elements.
struct GradProbe {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  double step = 1e-3;
  // 0 checks every element; otherwise a seeded sample of this many elements
  // per probe.
  std::size_t max_elements_per_probe = 0;
  std::uint64_t seed = 0;
  // Optional: identifies the differentiable piece of the objective at its
  // most recent evaluation (for instance a hash of ReLU sign patterns). When
  // a +/- step leaves the piece of the unperturbed point the step is divided
  // by 10, down to min_step; elements that still straddle a boundary are
  // skipped.
  std::function<std::uint64_t()> region;
  double min_step = 1e-7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_probe;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
  std::size_t elements_skipped = 0;  // straddled a region boundary at min_step
};

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double relative_error(double analytic, double numeric);

// Central differences of `objective` against each probe's analytic
// gradient. Values are restored after each perturbation. Throws
// NumericError naming `op` and the element if the objective is non-finite.
GradCheckReport grad_check(std::string_view op,
                           const std::function<double()>& objective,
                           std::span<const GradProbe> probes,
                           const GradCheckOptions& options = {});

}  // namespace srdrm
