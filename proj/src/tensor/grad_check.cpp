#include "srdrm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "srdrm/errors.hpp"
#include "srdrm/random.hpp"

namespace srdrm {

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> pick_elements(std::size_t count, std::size_t limit,
                                       Rng& rng) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= count) return idx;
  // Partial Fisher-Yates, then sort so the visit order is ascending.
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(count - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double evaluate(std::string_view op, const std::function<double()>& objective,
                const GradProbe& probe, std::size_t index) {
  const double v = objective();
  if (!std::isfinite(v)) {
    throw NumericError(fmt::format(
        "grad_check({}): objective is non-finite while perturbing {}[{}]", op,
        probe.name, index));
  }
  return v;
}

}  // namespace

GradCheckReport grad_check(std::string_view op,
                           const std::function<double()>& objective,
                           std::span<const GradProbe> probes,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) {
    throw ContractError("grad_check: step must be positive");
  }
  const double base = objective();
  if (!std::isfinite(base)) {
    throw NumericError(fmt::format(
        "grad_check({}): objective is non-finite at the unperturbed input", op));
  }

  const std::uint64_t base_region = options.region ? options.region() : 0;
  Rng rng(options.seed);
  GradCheckReport report;
  for (const GradProbe& probe : probes) {
    if (probe.values.size() != probe.analytic.size()) {
      throw ContractError(fmt::format(
          "grad_check({}): probe {} has {} values but {} analytic entries", op,
          probe.name, probe.values.size(), probe.analytic.size()));
    }
    for (std::size_t i = 0; i < probe.values.size(); ++i) {
      if (!std::isfinite(probe.values[i]) || !std::isfinite(probe.analytic[i])) {
        throw NumericError(fmt::format(
            "grad_check({}): non-finite input or analytic gradient at {}[{}]",
            op, probe.name, i));
      }
    }
    for (std::size_t i : pick_elements(probe.values.size(),
                                       options.max_elements_per_probe, rng)) {
      const double saved = probe.values[i];
      double step = options.step;
      double numeric = 0.0;
      bool same_region = false;
      // Near a kink, shrink the step until both evaluations stay on the
      // piece of the unperturbed point.
      while (!same_region && step >= options.min_step) {
        probe.values[i] = saved + step;
        const double plus = evaluate(op, objective, probe, i);
        const bool plus_same = !options.region || options.region() == base_region;
        probe.values[i] = saved - step;
        const double minus = evaluate(op, objective, probe, i);
        const bool minus_same = !options.region || options.region() == base_region;
        probe.values[i] = saved;
        same_region = plus_same && minus_same;
        numeric = (plus - minus) / (2.0 * step);
        step *= 0.1;
      }
      if (!same_region) {
        ++report.elements_skipped;
        continue;
      }

      const double err = relative_error(probe.analytic[i], numeric);
      ++report.elements_checked;
      if (err > report.max_relative_error || report.worst_probe.empty()) {
        report.max_relative_error = err;
        report.worst_probe = probe.name;
        report.worst_index = i;
        report.worst_analytic = probe.analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace srdrm
