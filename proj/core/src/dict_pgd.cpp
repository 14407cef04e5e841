#include "convdl/dict/pgd.hpp"

#include <cmath>

namespace convdl::dict {

PgdResult pgd_update(const Dictionary& d, const SufficientStats& stats,
                     const PgdOptions& opts) {
  opts.line_search.validate();
  PgdResult out{d, {}, 0, 0, false};
  out.initial_objective = objective_from_stats(d, stats);

  double step0 = opts.line_search.initial_step;
  if (step0 <= 0) {
    const double lam = gram_operator_norm(stats.phi, d.channels, d.support);
    step0 = lam > 1e-12 ? 1.0 / lam : 1.0;
  }

  double f_cur = out.initial_objective;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Dictionary grad = gradient_from_stats(out.d, stats);
    const double gnorm2 = sq_l2(grad.values);
    if (gnorm2 == 0.0) break;

    double step = step0;
    int backtracks = 0;
    bool accepted = false;
    Dictionary trial = out.d;
    double f_trial = f_cur;
    while (backtracks <= opts.line_search.max_backtracks) {
      trial = out.d;
      for (std::size_t i = 0; i < trial.values.size(); ++i)
        trial.values[i] -= step * grad.values[i];
      project_unit_ball(trial);
      f_trial = objective_from_stats(trial, stats);
      double inner = 0;  // <grad, trial - current>, nonpositive along the arc
      for (std::size_t i = 0; i < trial.values.size(); ++i)
        inner += grad.values[i] * (trial.values[i] - out.d.values[i]);
      if (f_trial <= f_cur + opts.line_search.sufficient_decrease * inner) {
        accepted = true;
        break;
      }
      step *= opts.line_search.shrink;
      ++backtracks;
    }
    if (!accepted) {
      if (it == 0) out.stalled = true;
      break;
    }
    out.d = std::move(trial);
    out.steps.push_back({it, step, f_trial, backtracks});
    const double decrease = f_cur - f_trial;
    f_cur = f_trial;
    if (decrease < opts.rel_tolerance * std::max(1.0, std::abs(f_cur))) break;
  }
  out.final_objective = f_cur;
  return out;
}

}  // namespace convdl::dict
