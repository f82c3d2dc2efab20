#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "platoon/lti.hpp"
#include "platoon/reach.hpp"
#include "platoon/realize.hpp"
#include "platoon/sdp.hpp"

// Optimal-realization synthesis: per decay-grid point, jointly optimize the
// ellipsoid shape Y, the five free controller-mixing entries beta, and the
// multipliers a_1..a_6, with alpha fixed to 1 (the attack matrix depends on
// beta/alpha only, so this loses nothing).

namespace platoon::synth {

using model::Mat4;
using model::PlatoonParams;
using model::Row6;
using model::Vec6;
using realize::Mat46;
using realize::Realization;
using reach::AttackBounds;
using reach::EllipsoidResult;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Decoupled attack matrix as an affine function of beta at alpha = 1:
/// B_delta(beta) = base + sum_j beta_j * dirs[j], j over the 5 free entries.
struct BetaAffineMap {
  Mat46 base;
  std::array<Mat46, 5> dirs;

  Mat46 eval(const Row6& beta) const {
    Mat46 B = base;
    for (int j = 0; j < 5; ++j) B += beta(j) * dirs[j];
    return B;
  }
};

/// Precompute the affine decomposition and verify it against the direct
/// attack-matrix route on sample points (the synthesis LMI is only valid
/// if the decomposition is exact).
inline BetaAffineMap build_beta_map(const PlatoonParams& p) {
  p.validate();
  auto decoupled_bdelta = [&p](const Row6& beta) {
    Realization real;
    real.beta = beta;
    return realize::decoupled_system(p, real).Bdelta;
  };

  BetaAffineMap map;
  map.base = decoupled_bdelta(Row6::Zero());
  for (int j = 0; j < 5; ++j) {
    Row6 e = Row6::Zero();
    e(j) = 1.0;
    map.dirs[j] = decoupled_bdelta(e) - map.base;
  }

  Row6 probe;
  probe << 0.37, -1.21, 0.58, 2.04, -0.66, 0.0;
  const double residual =
      (map.eval(probe) - decoupled_bdelta(probe)).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-12)) {
    throw std::runtime_error("build_beta_map: affinity decomposition residual " +
                             std::to_string(residual) + " exceeds 1e-12");
  }
  return map;
}

/// Joint problem at one grid point: z = (sym(Y) [10], beta [5], a_vec [6]),
/// minimize trace(Y) subject to the Y-form block with Bd affine in beta,
/// Y >= eps*I, sum(a_vec) >= a, a_vec in [eps, 1-eps].
inline sdp::SdpProblem assemble_synthesis(const BetaAffineMap& map, const lti::Zoh& zoh,
                                          const AttackBounds& W, double a) {
  W.validate();
  if (!(a > 0.0) || !(a < 1.0)) {
    throw std::invalid_argument("assemble_synthesis: a must lie in (0,1)");
  }
  if (zoh.Ad.rows() != 4) {
    throw std::invalid_argument("assemble_synthesis: expected the 4-state subsystem");
  }
  const int n = 4, q = 6, dim = 2 * n + q;
  const int ny = sdp::sym_dim(n);
  const int p = ny + 5 + q;  // 21

  const MatrixXd Ad = zoh.Ad;
  sdp::SdpProblem prob;
  prob.p = p;
  prob.c = reach::detail::trace_cost(n, p);

  sdp::LmiBlock main;
  main.F0 = MatrixXd::Zero(dim, dim);
  const MatrixXd Bd0 = zoh.bd(map.base);
  main.F0.block(n, 2 * n, n, q) = Bd0;
  main.F0.block(2 * n, n, q, n) = Bd0.transpose();
  for (const MatrixXd& S : sdp::sym_basis(n)) {
    MatrixXd F = MatrixXd::Zero(dim, dim);
    F.topLeftCorner(n, n) = a * S;
    F.block(0, n, n, n) = S * Ad.transpose();
    F.block(n, 0, n, n) = Ad * S;
    F.block(n, n, n, n) = S;
    main.F.push_back(std::move(F));
  }
  for (int j = 0; j < 5; ++j) {
    MatrixXd F = MatrixXd::Zero(dim, dim);
    const MatrixXd Bdj = zoh.bd(map.dirs[j]);
    F.block(n, 2 * n, n, q) = Bdj;
    F.block(2 * n, n, q, n) = Bdj.transpose();
    main.F.push_back(std::move(F));
  }
  for (int j = 0; j < q; ++j) {
    MatrixXd F = MatrixXd::Zero(dim, dim);
    F(2 * n + j, 2 * n + j) = 1.0 / (W.W(j) * W.W(j));
    main.F.push_back(std::move(F));
  }

  sdp::LmiBlock floor;  // Y >= eps*I
  floor.F0 = -reach::kEps * MatrixXd::Identity(n, n);
  for (const MatrixXd& S : sdp::sym_basis(n)) floor.F.push_back(S);
  for (int j = 0; j < 5 + q; ++j) floor.F.push_back(MatrixXd::Zero(n, n));

  sdp::LmiBlock sum;  // sum(a_vec) - a >= 0
  sum.F0 = MatrixXd::Constant(1, 1, -a);
  for (int k = 0; k < ny + 5; ++k) sum.F.push_back(MatrixXd::Zero(1, 1));
  for (int j = 0; j < q; ++j) sum.F.push_back(MatrixXd::Ones(1, 1));

  prob.blocks.push_back(std::move(main));
  prob.blocks.push_back(std::move(floor));
  prob.blocks.push_back(std::move(sum));

  constexpr double inf = std::numeric_limits<double>::infinity();
  prob.lo = VectorXd::Constant(p, -inf);
  prob.hi = VectorXd::Constant(p, inf);
  for (int j = 0; j < q; ++j) {
    prob.lo(ny + 5 + j) = reach::kEps;
    prob.hi(ny + 5 + j) = 1.0 - reach::kEps;
  }
  return prob;
}

/// One grid point of the synthesis sweep.
struct ARecord {
  double a = std::numeric_limits<double>::quiet_NaN();
  sdp::SdpStatus status = sdp::SdpStatus::NumericalTrouble;
  double trace = std::numeric_limits<double>::quiet_NaN();
};

struct SynthesisResult {
  sdp::SdpStatus status = sdp::SdpStatus::NumericalTrouble;
  Row6 beta_opt = Row6::Zero();
  Mat4 Y_opt = Mat4::Zero();
  double a_opt = std::numeric_limits<double>::quiet_NaN();
  Vec6 a_vec_opt = Vec6::Zero();
  double trace_opt = std::numeric_limits<double>::quiet_NaN();
  std::vector<ARecord> curve;  ///< sorted by a
  std::map<std::string, EllipsoidResult> comparisons;
};

/// Fixed-realization sweep used for comparisons and by the CLI.
inline EllipsoidResult evaluate_realization(const Realization& real,
                                            const PlatoonParams& p, const AttackBounds& W,
                                            const std::vector<double>& a_grid,
                                            double tol = 1e-8) {
  real.validate();
  const auto dec = realize::decoupled_system(p, real);
  return reach::solve_fixed_realization(dec, W, p.Ts, a_grid, tol);
}

/// Sweep of the joint SDP over the a-grid; comparisons for the two published
/// realizations are computed on the identical grid. Deterministic: the grid
/// is sorted internally and trace ties resolve to the smallest a.
inline SynthesisResult optimize_realization(const PlatoonParams& p, const AttackBounds& W,
                                            const std::vector<double>& a_grid,
                                            double tol = 1e-8) {
  p.validate();
  W.validate();
  if (a_grid.empty()) {
    throw std::invalid_argument("optimize_realization: empty a-grid");
  }

  const BetaAffineMap map = build_beta_map(p);
  const auto dec = realize::decoupled_system(p, realize::realization_C());
  const lti::Zoh zoh = lti::make_zoh(dec.Ai, p.Ts);

  std::vector<double> grid = a_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  SynthesisResult out;
  bool any_trouble = false;
  const int ny = sdp::sym_dim(4);
  for (double a : grid) {
    const sdp::SdpProblem prob = assemble_synthesis(map, zoh, W, a);
    const sdp::SdpSolution sol = sdp::solve(prob, tol);
    ARecord rec;
    rec.a = a;
    rec.status = sol.status;
    if (sol.status == sdp::SdpStatus::Optimal) rec.trace = sol.objective;
    if (sol.status == sdp::SdpStatus::NumericalTrouble) any_trouble = true;
    out.curve.push_back(rec);

    if (sol.status != sdp::SdpStatus::Optimal) continue;
    if (out.status == sdp::SdpStatus::Optimal && !(sol.objective < out.trace_opt)) continue;
    out.status = sdp::SdpStatus::Optimal;
    out.Y_opt = sdp::vec_to_sym(sol.z.head(ny), 4);
    out.beta_opt.head<5>() = sol.z.segment(ny, 5).transpose();
    out.beta_opt(5) = 0.0;
    out.a_opt = a;
    out.a_vec_opt = sol.z.tail(6);
    out.trace_opt = sol.objective;
  }

  if (out.status != sdp::SdpStatus::Optimal) {
    out.status = any_trouble ? sdp::SdpStatus::NumericalTrouble : sdp::SdpStatus::Infeasible;
  }

  out.comparisons.emplace("C", evaluate_realization(realize::realization_C(), p, W, grid, tol));
  out.comparisons.emplace("Chat",
                          evaluate_realization(realize::realization_Chat(p), p, W, grid, tol));
  return out;
}

/// The synthesized realization as a Realization value (alpha = 1).
inline Realization realization_from(const SynthesisResult& res) {
  if (res.status != sdp::SdpStatus::Optimal) {
    throw std::invalid_argument("realization_from: synthesis did not produce an optimum");
  }
  Realization real;
  real.alpha = 1.0;
  real.beta = res.beta_opt;
  real.validate();
  return real;
}

}  // namespace platoon::synth
