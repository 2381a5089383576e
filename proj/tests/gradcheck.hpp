#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dicycle/tensor.hpp"

namespace dicycle::testing {

// Central finite differences oracle. `loss_value` must rebuild the forward
// pass from the parameters' CURRENT data and return the scalar loss; it knows
// nothing about backward(), which keeps the oracle independent of the
// implementation path under test.
using LossFn = std::function<double()>;

struct GradCheckReport {
  bool ok = true;
  double max_err = 0.0;
  std::string detail;
};

inline double central_difference(Tensor& param, Index i, const LossFn& loss_value, double h) {
  const double saved = param.data[i];
  param.data[i] = saved + h;
  const double up = loss_value();
  param.data[i] = saved - h;
  const double down = loss_value();
  param.data[i] = saved;
  return (up - down) / (2.0 * h);
}

// Compares the analytic gradients already accumulated in params[*]->grad
// against finite differences, entry by entry. Pass criterion per entry:
// |analytic - numeric| <= abs_tol + rel_tol * max(|analytic|, |numeric|).
inline GradCheckReport check_gradients(const std::vector<TensorPtr>& params,
                                       const LossFn& loss_value, double rel_tol,
                                       double abs_tol = 1e-9, double h = 1e-5) {
  GradCheckReport rep;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (Index i = 0; i < t.numel(); ++i) {
      const double analytic = t.grad.size() == t.data.size() ? t.grad[i] : 0.0;
      const double numeric = central_difference(t, i, loss_value, h);
      const double err = std::abs(analytic - numeric);
      const double tol = abs_tol + rel_tol * std::max(std::abs(analytic), std::abs(numeric));
      if (err > tol) {
        rep.ok = false;
        if (rep.detail.empty()) {
          std::ostringstream os;
          os << "param " << p << " entry " << i << ": analytic " << analytic << " vs numeric "
             << numeric << " (err " << err << ", tol " << tol << ")";
          rep.detail = os.str();
        }
      }
      rep.max_err = std::max(rep.max_err, err);
    }
  }
  return rep;
}

}  // namespace dicycle::testing
