#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sgmatch/rng.hpp"
#include "sgmatch/tensor.hpp"

namespace sgmatch {

// Compares analytic gradients against central differences on randomly
// sampled scalar parameters and returns the worst relative error, with
// denominator max(|analytic|, |numeric|, 1e-8).
//
// loss_fn(true) must zero the gradients, run forward+backward, and return
// the loss; loss_fn(false) must return the loss without touching gradients.
template <typename T>
double finite_diff_check(const std::function<double(bool)>& loss_fn,
                         ParamStore<T>& params, double eps, int samples,
                         SeededRng& rng) {
  if (eps <= 0.0) throw ConfigError("finite_diff_check: eps must be > 0");

  auto check_finite = [](double x) {
    if (!std::isfinite(x))
      throw NonFiniteLoss("finite_diff_check: loss is not finite");
    return x;
  };

  check_finite(loss_fn(true));  // populates analytic gradients

  // Flat index space over all parameters in sorted-name order.
  struct Entry {
    Param<T>* p;
    std::size_t offset;
  };
  std::vector<Entry> flat;
  std::size_t total = 0;
  for (auto& [name, p] : params) total += p.value.size();
  flat.reserve(total);
  for (auto& [name, p] : params)
    for (std::size_t i = 0; i < p.value.size(); ++i)
      flat.push_back(Entry{&p, i});

  double max_rel_err = 0.0;
  for (int s = 0; s < samples; ++s) {
    Entry& entry = flat[rng.uniform_index(flat.size())];
    T& theta = entry.p->value[entry.offset];
    const T saved = theta;
    theta = static_cast<T>(static_cast<double>(saved) + eps);
    const double f_plus = check_finite(loss_fn(false));
    theta = static_cast<T>(static_cast<double>(saved) - eps);
    const double f_minus = check_finite(loss_fn(false));
    theta = saved;

    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double analytic =
        static_cast<double>(entry.p->grad[entry.offset]);
    const double denom =
        std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    max_rel_err = std::max(max_rel_err, std::fabs(analytic - numeric) / denom);
  }
  return max_rel_err;
}

}  // namespace sgmatch
