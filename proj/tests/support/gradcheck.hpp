// Central finite-difference gradient oracle used by the unit and acceptance
// suites. Independent of the library's backward pass: it only re-evaluates
// the forward closure under coordinate perturbations.
#pragma once

#include "reverie/core/graph.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace reverie::testing {

struct GradCheckReport {
  long checked = 0;
  long within_tol = 0;
  double worst_rel = 0;
  std::string worst_name;

  double pass_fraction() const {
    return checked == 0 ? 1.0 : static_cast<double>(within_tol) / checked;
  }
};

// `eval(with_grads)` must rebuild the computation from scratch, returning the
// scalar loss; when `with_grads` is true it must also accumulate gradients
// into the params (which the caller zeroes beforehand). Randomness inside the
// closure must be re-seeded per call so perturbed evaluations see identical
// draws.
inline GradCheckReport grad_check(ParamMap<double>& params,
                                  const std::function<double(bool)>& eval,
                                  double rel_tol = 1e-3, double eps_base = 1e-5,
                                  long max_coords_per_param = 4096) {
  for (auto& [_, p] : params.items) p->zero_grad();
  eval(true);

  std::vector<Mat<double>> analytic;
  analytic.reserve(params.items.size());
  for (auto& [_, p] : params.items) analytic.push_back(p->grad);

  GradCheckReport rep;
  for (size_t pi = 0; pi < params.items.size(); ++pi) {
    auto& [name, p] = params.items[pi];
    const Index n = p->value.size();
    const Index step = n > max_coords_per_param ? n / max_coords_per_param : 1;
    for (Index i = 0; i < n; i += step) {
      double* th = p->value.data() + i;
      const double orig = *th;
      const double eps = eps_base * std::max(1.0, std::abs(orig));
      *th = orig + eps;
      const double fp = eval(false);
      *th = orig - eps;
      const double fm = eval(false);
      *th = orig;
      const double numeric = (fp - fm) / (2 * eps);
      const double a = analytic[pi].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++rep.checked;
      if (rel <= rel_tol) {
        ++rep.within_tol;
      } else if (rel > rep.worst_rel) {
        rep.worst_rel = rel;
        rep.worst_name = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace reverie::testing
