#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "asmalign/graph.hpp"
#include "asmalign/optim.hpp"

namespace asmalign {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central finite-difference check of every element of every parameter in
// `store` against reverse-mode gradients. `build` constructs the forward pass
// from the store's current values and returns the scalar loss node. Run at
// 64-bit precision; epsilon should be in [1e-7, 1e-4].
inline GradCheckReport grad_check(
    ParamStore<double>& store,
    const std::function<Graph<double>::NodeId(Graph<double>&)>& build, double epsilon = 1e-5) {
  std::vector<Tensor<double>> analytic(store.size());
  {
    Graph<double> g;
    auto loss = build(g);
    g.backward(loss);
    g.flush_param_grads(analytic);
  }
  auto eval = [&]() {
    Graph<double> g;
    auto loss = build(g);
    return g.value(loss).data[0];
  };
  GradCheckReport report;
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& t = store.value(static_cast<int>(p));
    for (std::size_t i = 0; i < t.numel(); ++i) {
      double keep = t.data[i];
      t.data[i] = keep + epsilon;
      double plus = eval();
      t.data[i] = keep - epsilon;
      double minus = eval();
      t.data[i] = keep;
      double cd = (plus - minus) / (2.0 * epsilon);
      double a = analytic[p].numel() ? analytic[p].data[i] : 0.0;
      double rel = std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-12});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = store.name(static_cast<int>(p));
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace asmalign
