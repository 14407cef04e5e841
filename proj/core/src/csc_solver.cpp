#include "convdl/csc/solver.hpp"

#include <chrono>
#include <random>
#include <sstream>

#include <json.hpp>

namespace convdl::csc {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kGreedy: return "greedy";
    case Strategy::kRandomized: return "randomized";
    default: return "lgcd";
  }
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "greedy") return Strategy::kGreedy;
  if (s == "randomized" || s == "random") return Strategy::kRandomized;
  if (s == "lgcd" || s == "locally-greedy") return Strategy::kLocallyGreedy;
  throw ConfigError("unknown strategy '" + s + "'");
}

double default_eps(double lambda, const XCorrTable& xc) {
  if (lambda <= 0) return 1e-10;
  return 1e-2 * lambda / xc.max_full_sqnorm();
}

std::string ConvergenceLog::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : records) {
    nlohmann::json j{{"iter", r.iter},
                     {"t_sec", r.t_sec},
                     {"max_dz", r.max_dz},
                     {"objective", r.objective}};
    os << j.dump() << "\n";
  }
  return os.str();
}

double optimality_residual(const CscState& s, const CoordKernel& kernel) {
  return kernel.best_in(s, s.slab).abs_dz();
}

namespace {

ActivationMap state_to_map(const CscState& s, const Domain& omega, int atoms) {
  ActivationMap z(omega, atoms);
  export_region(s, s.slab, z);
  return z;
}

}  // namespace

SolveResult solve(const Signal& x, const Dictionary& dict, double lambda,
                  const SolveOptions& opts) {
  if (lambda < 0) throw ConfigError("lambda must be nonnegative");
  XCorrTable xc(dict, x.domain);
  xc.prepare_all();
  const double eps = opts.eps > 0 ? opts.eps : default_eps(lambda, xc);
  if (eps <= 0) throw ConfigError("eps must be positive");

  CscState s = init_state(x, dict, opts.conv);
  CoordKernel kernel(xc, lambda);

  ConvergenceLog log;
  for (int k = 0; k < dict.atoms; ++k)
    log.frozen_atoms += xc.full_sqnorm(k) <= CoordKernel::kDegenerateNorm;

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  auto checkpoint = [&](double max_dz) {
    const ActivationMap z = state_to_map(s, x.domain, dict.atoms);
    log.records.push_back(
        {log.iterations, elapsed(), max_dz, objective(x, z, dict, lambda, opts.conv)});
  };

  checkpoint(optimality_residual(s, kernel));

  bool out_of_budget = false;
  if (opts.strategy == Strategy::kRandomized) {
    std::mt19937_64 rng(opts.seed);
    const index_t n = x.domain.size();
    std::uniform_int_distribution<int> atom_dist(0, dict.atoms - 1);
    std::uniform_int_distribution<index_t> pos_dist(0, n - 1);
    const index_t scan_period =
        std::max<index_t>(256, dict.atoms * n / 2);
    for (index_t draws = 1;; ++draws) {
      const int k = atom_dist(rng);
      const Pos w = x.domain.at(pos_dist(rng));
      const CandidateUpdate u = kernel.eval(s, k, w);
      if (u.abs_dz() >= eps) {
        kernel.apply(s, u);
        ++log.iterations;
        if (opts.log_every > 0 && log.iterations % opts.log_every == 0)
          checkpoint(u.abs_dz());
        if (log.iterations >= opts.max_iter) {
          out_of_budget = true;
          break;
        }
      }
      if (draws % scan_period == 0) {
        const double r = optimality_residual(s, kernel);
        if (r < eps) {
          log.converged = true;
          break;
        }
      }
    }
  } else {
    std::vector<Box> cells;
    if (opts.strategy == Strategy::kGreedy) {
      cells.push_back(x.domain.box());
    } else {
      cells = SubPartition::regular(x.domain.box(), dict.support).cells;
    }
    for (;;) {
      double sweep_max = 0;
      for (const Box& cell : cells) {
        const CandidateUpdate u = kernel.best_in(s, cell);
        if (u.abs_dz() > sweep_max) sweep_max = u.abs_dz();
        if (u.abs_dz() >= eps) {
          kernel.apply(s, u);
          ++log.iterations;
          if (opts.log_every > 0 && log.iterations % opts.log_every == 0)
            checkpoint(u.abs_dz());
          if (log.iterations >= opts.max_iter) {
            out_of_budget = true;
            break;
          }
        }
      }
      ++log.sweeps;
      if (out_of_budget) break;
      if (sweep_max < eps) {
        log.converged = true;
        break;
      }
    }
  }

  SolveResult result{state_to_map(s, x.domain, dict.atoms), std::move(log)};
  result.log.final_objective = objective(x, result.z, dict, lambda, opts.conv);
  result.log.records.push_back({result.log.iterations, elapsed(),
                                optimality_residual(s, kernel),
                                result.log.final_objective});
  return result;
}

}  // namespace convdl::csc
