#pragma once

// Central-difference check of reverse-mode gradients over a ParamSet.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tvae/params.hpp"

namespace testing_fd {

/// Max relative error |a - f| / max(|a|, |f|, floor) per parameter block.
inline std::map<std::string, double> max_rel_error(tvae::ParamSet params,
                                                   const std::function<tvae::Tensor(const tvae::LeafMap&)>& loss,
                                                   double h = 1e-5, double floor = 1e-6) {
  const auto g = tvae::evaluate_and_grad(loss(tvae::make_leaves(params)));
  std::map<std::string, double> out;
  for (auto& [name, block] : params) {
    const auto it = g.grads.find(name);
    const auto analytic = it == g.grads.end() ? std::vector<double>(block.values.size(), 0.0) : it->second.to_vector();
    double worst = 0.0;
    for (std::size_t i = 0; i < block.values.size(); ++i) {
      const double keep = block.values[i];
      block.values[i] = keep + h;
      const double up = loss(tvae::make_leaves(params)).item();
      block.values[i] = keep - h;
      const double down = loss(tvae::make_leaves(params)).item();
      block.values[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::fabs(analytic[i] - fd) / std::max({std::fabs(analytic[i]), std::fabs(fd), floor}));
    }
    out[name] = worst;
  }
  return out;
}

}  // namespace testing_fd
