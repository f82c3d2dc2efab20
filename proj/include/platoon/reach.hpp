#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "platoon/lti.hpp"
#include "platoon/realize.hpp"
#include "platoon/sdp.hpp"

// Outer ellipsoidal approximations of the attack-reachable set of one
// follower: LMI assembly in P- and Y-form, the a-grid sweep for a fixed
// realization, a Monte Carlo reachability check, and ellipsoid volumes.

namespace platoon::reach {

using model::Mat4;
using model::Vec6;
using realize::DecoupledSystem;
using realize::Mat46;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Interiority margin realizing the strict inequalities (Y > 0, a_j in (0,1))
/// as closed constraints.
inline constexpr double kEps = 1e-6;

/// Per-channel peak bounds: |delta_j(k)| <= W_j for all k.
struct AttackBounds {
  Vec6 W = Vec6::Ones();

  void validate() const {
    for (int j = 0; j < 6; ++j) {
      if (!(W(j) > 0.0) || !std::isfinite(W(j))) {
        throw std::invalid_argument("AttackBounds: W entries must be positive and finite");
      }
    }
  }
};

/// Best ellipsoid found on an a-grid: {x : x' P x <= bound} contains the
/// reachable set, with Y = P^-1 the SDP variable.
struct EllipsoidResult {
  sdp::SdpStatus status = sdp::SdpStatus::NumericalTrouble;
  Mat4 Y = Mat4::Zero();
  Mat4 P = Mat4::Zero();
  double a = std::numeric_limits<double>::quiet_NaN();
  Vec6 a_vec = Vec6::Zero();
  double bound_nominal = std::numeric_limits<double>::quiet_NaN();  ///< (N-a)/(1-a)
  double bound_lyap = std::numeric_limits<double>::quiet_NaN();   ///< (sum a_j)/(1-a)
  double trace = std::numeric_limits<double>::quiet_NaN();
  double volume_nominal = std::numeric_limits<double>::quiet_NaN();
  double volume_lyap = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void check_shapes(const MatrixXd& Ad, const MatrixXd& Bd) {
  if (Ad.rows() != Ad.cols()) throw std::invalid_argument("reach: Ad must be square");
  if (Bd.rows() != Ad.rows()) throw std::invalid_argument("reach: Bd row mismatch");
}

inline void check_decay(double a) {
  if (!(a > 0.0) || !(a < 1.0)) {
    throw std::invalid_argument("reach: decay scalar a must lie in (0,1)");
  }
}

// W_a = diag(a_j / W_j^2): with |delta_j| <= W_j this normalizes the
// attack energy so that delta' W_a delta <= sum a_j.
inline VectorXd wa_diagonal(const VectorXd& W, const VectorXd& a_vec) {
  VectorXd d(W.size());
  for (Eigen::Index j = 0; j < W.size(); ++j) d(j) = a_vec(j) / (W(j) * W(j));
  return d;
}

// Objective vector selecting the diagonal of the sym-vectorized Y.
inline VectorXd trace_cost(int n, int p) {
  VectorXd c = VectorXd::Zero(p);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    c(k) = 1.0;
    k += n - i;
  }
  return c;
}

}  // namespace detail

/// P-form feasibility block for fixed (a, a_vec):
///   [[aP, Ad'P, 0], [PAd, P, PBd], [0, Bd'P, W_a]] >= 0
/// as an SdpProblem over the sym-vectorized P (zero objective, no bounds;
/// callers add either).
inline sdp::SdpProblem assemble_lmi_P(const MatrixXd& Ad, const MatrixXd& Bd,
                                      const AttackBounds& W, double a,
                                      const Vec6& a_vec) {
  detail::check_shapes(Ad, Bd);
  detail::check_decay(a);
  W.validate();
  for (int j = 0; j < 6; ++j) {
    if (!(a_vec(j) > 0.0) || !(a_vec(j) < 1.0)) {
      throw std::invalid_argument("assemble_lmi_P: a_vec entries must lie in (0,1)");
    }
  }
  const int n = static_cast<int>(Ad.rows());
  const int q = static_cast<int>(Bd.cols());
  const int dim = 2 * n + q;
  const int p = sdp::sym_dim(n);

  sdp::SdpProblem prob;
  prob.p = p;
  prob.c = VectorXd::Zero(p);

  sdp::LmiBlock block;
  block.F0 = MatrixXd::Zero(dim, dim);
  block.F0.bottomRightCorner(q, q) =
      detail::wa_diagonal(W.W.head(q), a_vec.head(q)).asDiagonal();
  for (const MatrixXd& S : sdp::sym_basis(n)) {
    MatrixXd F = MatrixXd::Zero(dim, dim);
    F.topLeftCorner(n, n) = a * S;
    F.block(0, n, n, n) = Ad.transpose() * S;
    F.block(n, 0, n, n) = S * Ad;
    F.block(n, n, n, n) = S;
    F.block(n, 2 * n, n, q) = S * Bd;
    F.block(2 * n, n, q, n) = Bd.transpose() * S;
    block.F.push_back(std::move(F));
  }
  prob.blocks.push_back(std::move(block));
  return prob;
}

/// Y-form synthesis-ready problem for a fixed attack matrix Bd:
///   [[aY, YAd', 0], [AdY, Y, Bd], [0, Bd', W_a]] >= 0,
///   Y >= eps*I, sum(a_vec) >= a, a_vec in [eps, 1-eps],
/// over z = (sym(Y), a_vec), objective trace(Y).
inline sdp::SdpProblem assemble_lmi_Y(const MatrixXd& Ad, const MatrixXd& Bd,
                                      const AttackBounds& W, double a) {
  detail::check_shapes(Ad, Bd);
  detail::check_decay(a);
  W.validate();
  const int n = static_cast<int>(Ad.rows());
  const int q = static_cast<int>(Bd.cols());
  const int dim = 2 * n + q;
  const int ny = sdp::sym_dim(n);
  const int p = ny + q;

  sdp::SdpProblem prob;
  prob.p = p;
  prob.c = detail::trace_cost(n, p);

  sdp::LmiBlock main;
  main.F0 = MatrixXd::Zero(dim, dim);
  main.F0.block(n, 2 * n, n, q) = Bd;
  main.F0.block(2 * n, n, q, n) = Bd.transpose();
  for (const MatrixXd& S : sdp::sym_basis(n)) {
    MatrixXd F = MatrixXd::Zero(dim, dim);
    F.topLeftCorner(n, n) = a * S;
    F.block(0, n, n, n) = S * Ad.transpose();
    F.block(n, 0, n, n) = Ad * S;
    F.block(n, n, n, n) = S;
    main.F.push_back(std::move(F));
  }
  for (int j = 0; j < q; ++j) {
    MatrixXd F = MatrixXd::Zero(dim, dim);
    F(2 * n + j, 2 * n + j) = 1.0 / (W.W(j) * W.W(j));
    main.F.push_back(std::move(F));
  }

  sdp::LmiBlock floor;  // Y >= eps*I
  floor.F0 = -kEps * MatrixXd::Identity(n, n);
  for (const MatrixXd& S : sdp::sym_basis(n)) floor.F.push_back(S);
  for (int j = 0; j < q; ++j) floor.F.push_back(MatrixXd::Zero(n, n));

  sdp::LmiBlock sum;  // sum(a_vec) - a >= 0
  sum.F0 = MatrixXd::Constant(1, 1, -a);
  for (int k = 0; k < ny; ++k) sum.F.push_back(MatrixXd::Zero(1, 1));
  for (int j = 0; j < q; ++j) sum.F.push_back(MatrixXd::Ones(1, 1));

  prob.blocks.push_back(std::move(main));
  prob.blocks.push_back(std::move(floor));
  prob.blocks.push_back(std::move(sum));

  constexpr double inf = std::numeric_limits<double>::infinity();
  prob.lo = VectorXd::Constant(p, -inf);
  prob.hi = VectorXd::Constant(p, inf);
  for (int j = 0; j < q; ++j) {
    prob.lo(ny + j) = kEps;
    prob.hi(ny + j) = 1.0 - kEps;
  }
  return prob;
}

/// Grid of decay scalars, logarithmically spaced in (1 - a), ascending in a.
inline std::vector<double> make_a_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi < 1.0) || !(lo <= hi)) {
    throw std::invalid_argument("make_a_grid: need 0 < lo <= hi < 1");
  }
  if (n < 1) throw std::invalid_argument("make_a_grid: need n >= 1");
  std::vector<double> grid;
  if (n == 1) {
    grid.push_back(0.5 * (lo + hi));
    return grid;
  }
  const double u0 = std::log(1.0 - lo), u1 = std::log(1.0 - hi);
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    grid.push_back(1.0 - std::exp(u0 + t * (u1 - u0)));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

/// Default grid for a given discrete system matrix. The LMI is feasible only
/// for a > rho(Ad)^2, so the nominal [0.02, 0.98] span is widened toward 1
/// whenever the spectral radius demands it (slow sampling keeps rho close
/// to 1 and would otherwise leave every grid point infeasible).
inline std::vector<double> default_a_grid(const MatrixXd& Ad, int n = 50) {
  const double rho = lti::spectral_radius(Ad);
  if (!(rho < 1.0)) throw std::invalid_argument("default_a_grid: Ad must be Schur");
  const double rho2 = rho * rho;
  const double lo = std::max(0.02, rho2 + 1e-3 * (1.0 - rho2));
  double hi = 0.98;
  if (lo >= hi - 1e-9) hi = 1.0 - 1e-2 * (1.0 - lo);
  return make_a_grid(lo, hi, n);
}

/// Volume of {x : x' Y^-1 x <= bound} = V_n bound^{n/2} sqrt(det Y).
inline double ellipsoid_volume(const MatrixXd& Y, double bound) {
  if (Y.rows() != Y.cols()) throw std::domain_error("ellipsoid_volume: Y must be square");
  if (!(bound > 0.0)) throw std::domain_error("ellipsoid_volume: bound must be positive");
  Eigen::LLT<MatrixXd> llt(Y);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("ellipsoid_volume: Y is not positive definite");
  }
  const int n = static_cast<int>(Y.rows());
  double sqrt_det = 1.0;
  for (int i = 0; i < n; ++i) sqrt_det *= llt.matrixLLT()(i, i);
  const double unit_ball = std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
  return unit_ball * std::pow(bound, 0.5 * n) * sqrt_det;
}

/// Sweep the a-grid for a fixed realization's decoupled system and return
/// the trace-minimal ellipsoid. Ties across a resolve to the smallest a.
inline EllipsoidResult solve_fixed_realization(const DecoupledSystem& dec,
                                               const AttackBounds& W, double Ts,
                                               const std::vector<double>& a_grid,
                                               double tol = 1e-8) {
  W.validate();
  if (!dec.stable) {
    throw std::invalid_argument("solve_fixed_realization: decoupled system must be Hurwitz");
  }
  if (a_grid.empty()) {
    throw std::invalid_argument("solve_fixed_realization: empty a-grid");
  }

  const lti::Zoh zoh = lti::make_zoh(dec.Ai, Ts);
  const MatrixXd Bd = zoh.bd(dec.Bdelta);

  std::vector<double> grid = a_grid;
  std::sort(grid.begin(), grid.end());

  EllipsoidResult best;
  bool any_trouble = false;
  for (double a : grid) {
    detail::check_decay(a);
    const sdp::SdpProblem prob = assemble_lmi_Y(zoh.Ad, Bd, W, a);
    const sdp::SdpSolution sol = sdp::solve(prob, tol);
    if (sol.status == sdp::SdpStatus::NumericalTrouble) any_trouble = true;
    if (sol.status != sdp::SdpStatus::Optimal) continue;
    if (best.status == sdp::SdpStatus::Optimal && !(sol.objective < best.trace)) continue;

    best.status = sdp::SdpStatus::Optimal;
    best.Y = sdp::vec_to_sym(sol.z.head(sdp::sym_dim(4)), 4);
    best.P = best.Y.inverse();
    best.a = a;
    best.a_vec = sol.z.tail(6);
    best.trace = sol.objective;
  }

  if (best.status != sdp::SdpStatus::Optimal) {
    best.status = any_trouble ? sdp::SdpStatus::NumericalTrouble : sdp::SdpStatus::Infeasible;
    return best;
  }

  if ((best.P * best.Y - Mat4::Identity()).cwiseAbs().maxCoeff() > 1e-8) {
    best.status = sdp::SdpStatus::NumericalTrouble;
    return best;
  }

  best.bound_nominal = (6.0 - best.a) / (1.0 - best.a);
  best.bound_lyap = best.a_vec.sum() / (1.0 - best.a);
  best.trace = best.Y.trace();
  best.volume_nominal = ellipsoid_volume(best.Y, best.bound_nominal);
  best.volume_lyap = ellipsoid_volume(best.Y, best.bound_lyap);
  return best;
}

/// Monte Carlo lower bound on the reachable supremum: simulate attack
/// sequences with |delta_j| <= W_j from x(0) = 0 and report the largest
/// x'Px / bound seen. Four strategies rotate across runs: per-step uniform,
/// random-switching bang-bang, constant extremes, and a greedy sign rule.
/// Deterministic for a given seed regardless of scheduling (per-run streams).
inline double mc_attack_sup(const lti::DiscreteSystem& sysd, const VectorXd& W,
                            const MatrixXd& P, double bound, int n_runs,
                            int horizon, std::uint64_t seed) {
  const Eigen::Index n = sysd.Ad.rows();
  const Eigen::Index q = sysd.Bd.cols();
  if (W.size() != q) throw std::invalid_argument("mc_attack_sup: W size mismatch");
  if (P.rows() != n || P.cols() != n) {
    throw std::invalid_argument("mc_attack_sup: P shape mismatch");
  }
  if (!(bound > 0.0)) throw std::invalid_argument("mc_attack_sup: bound must be positive");
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!(W(j) >= 0.0)) throw std::invalid_argument("mc_attack_sup: W must be nonnegative");
  }

  const MatrixXd BtP = sysd.Bd.transpose() * P;
  double worst = 0.0;

  for (int run = 0; run < n_runs; ++run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int strategy = run % 4;

    VectorXd delta = VectorXd::Zero(q);
    VectorXd signs(q);
    for (Eigen::Index j = 0; j < q; ++j) signs(j) = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double switch_prob = 0.01 + 0.49 * unit(rng);

    VectorXd x = VectorXd::Zero(n);
    for (int k = 0; k < horizon; ++k) {
      switch (strategy) {
        case 0:  // per-step uniform
          for (Eigen::Index j = 0; j < q; ++j) delta(j) = (2.0 * unit(rng) - 1.0) * W(j);
          break;
        case 1:  // bang-bang with random switching
          for (Eigen::Index j = 0; j < q; ++j) {
            if (unit(rng) < switch_prob) signs(j) = -signs(j);
            delta(j) = signs(j) * W(j);
          }
          break;
        case 2:  // constant extreme
          delta = signs.cwiseProduct(W);
          break;
        default: {  // greedy: push along the gradient of V at the next state
          const VectorXd lin = BtP * (sysd.Ad * x);
          for (Eigen::Index j = 0; j < q; ++j) {
            delta(j) = (lin(j) >= 0.0 ? 1.0 : -1.0) * W(j);
          }
          break;
        }
      }
      x = sysd.Ad * x + sysd.Bd * delta;
      const double ratio = x.dot(P * x) / bound;
      if (ratio > worst) worst = ratio;
    }
  }
  return worst;
}

}  // namespace platoon::reach
