#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgnn/common.hpp"
#include "hgnn/tensor.hpp"

namespace hgnn {

double grad_check(const std::function<Tensor()>& f, std::span<const Tensor> params, GradCheckOptions options) {
  std::vector<Tensor> handles(params.begin(), params.end());
  for (auto& p : handles) p.zero_grad();
  {
    Tensor loss = f();
    loss.backward();
  }
  std::vector<Matrix> analytic;
  analytic.reserve(handles.size());
  for (const auto& p : handles) analytic.push_back(p.grad());

  auto evaluate = [&] {
    NoGradGuard guard;
    return f().item();
  };

  Rng rng(options.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < handles.size(); ++k) {
    auto& values = handles[k].mutable_value().data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords) {
      shuffle(coords, rng);
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (auto c : coords) {
      const double original = values[c];
      values[c] = original + options.eps;
      const double up = evaluate();
      values[c] = original - options.eps;
      const double down = evaluate();
      values[c] = original;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[k].data()[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace hgnn
