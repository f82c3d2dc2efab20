#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

// Small dense semidefinite programs: minimize c'z subject to one or more
// affine matrix blocks F0 + sum_j z_j F_j >= 0 and box bounds on z.
//
// Solved with a log-det barrier and damped Newton steps (path following).
// Problem sizes in this repo are tiny (largest block 14x14, p <= 22), so
// robustness is preferred over sparsity tricks throughout.

namespace platoon::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class SdpStatus { Optimal, Infeasible, NumericalTrouble };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::Infeasible: return "Infeasible";
    default: return "NumericalTrouble";
  }
}

/// One affine PSD constraint F0 + sum_j z_j F[j] >= 0.
struct LmiBlock {
  MatrixXd F0;
  std::vector<MatrixXd> F;
};

struct SdpProblem {
  int p = 0;                    ///< number of scalar decision variables
  VectorXd c;                   ///< objective, minimize c'z (may be zero)
  std::vector<LmiBlock> blocks;
  VectorXd lo, hi;              ///< box bounds, +-inf where absent (size p or 0)

  void validate() const {
    if (p <= 0) throw std::invalid_argument("SdpProblem: p must be positive");
    if (c.size() != p) throw std::invalid_argument("SdpProblem: objective size mismatch");
    if (blocks.empty()) throw std::invalid_argument("SdpProblem: no constraint blocks");
    for (const auto& b : blocks) {
      const Eigen::Index n = b.F0.rows();
      if (b.F0.cols() != n) throw std::invalid_argument("SdpProblem: F0 not square");
      if (static_cast<int>(b.F.size()) != p)
        throw std::invalid_argument("SdpProblem: block needs one F per variable");
      if ((b.F0 - b.F0.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("SdpProblem: F0 not symmetric");
      for (const auto& Fj : b.F) {
        if (Fj.rows() != n || Fj.cols() != n)
          throw std::invalid_argument("SdpProblem: F dimension mismatch");
        if ((Fj - Fj.transpose()).cwiseAbs().maxCoeff() > 1e-12)
          throw std::invalid_argument("SdpProblem: F not symmetric");
      }
    }
    if (lo.size() != hi.size()) throw std::invalid_argument("SdpProblem: bound size mismatch");
    if (lo.size() != 0 && lo.size() != p)
      throw std::invalid_argument("SdpProblem: bounds must cover all variables");
    for (Eigen::Index j = 0; j < lo.size(); ++j) {
      if (!(lo(j) <= hi(j))) throw std::invalid_argument("SdpProblem: empty bound interval");
    }
  }
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalTrouble;
  VectorXd z;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double min_eig_residual = 0.0;  ///< worst block eigenvalue at z (post-hoc)
  double infeasibility = 0.0;     ///< phase-1 certificate residual when Infeasible
  int newton_iters = 0;
};

inline MatrixXd eval_block(const LmiBlock& b, const VectorXd& z) {
  MatrixXd G = b.F0;
  for (int j = 0; j < static_cast<int>(b.F.size()); ++j) {
    if (z(j) != 0.0) G.noalias() += z(j) * b.F[j];
  }
  return G;
}

/// Smallest eigenvalue over all blocks at z; independent of the solve path.
inline double min_block_eig(const SdpProblem& prob, const VectorXd& z) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& b : prob.blocks) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(eval_block(b, z), Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Symmetric-matrix vectorization shared by the LMI assembly code.
// Entry order: (0,0), (0,1), ..., (0,n-1), (1,1), ..., (n-1,n-1).
// Basis matrices are E_ii on the diagonal and E_ij + E_ji off it, so the
// coefficient of a basis element equals the matrix entry.
// ---------------------------------------------------------------------------

inline int sym_dim(int n) { return n * (n + 1) / 2; }

inline std::vector<MatrixXd> sym_basis(int n) {
  std::vector<MatrixXd> basis;
  basis.reserve(sym_dim(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      MatrixXd B = MatrixXd::Zero(n, n);
      B(i, j) = 1.0;
      B(j, i) = 1.0;
      basis.push_back(B);
    }
  }
  return basis;
}

inline VectorXd sym_to_vec(const MatrixXd& S) {
  const int n = static_cast<int>(S.rows());
  VectorXd v(sym_dim(n));
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(k++) = S(i, j);
  return v;
}

inline MatrixXd vec_to_sym(const VectorXd& v, int n) {
  if (v.size() != sym_dim(n)) throw std::invalid_argument("vec_to_sym: size mismatch");
  MatrixXd S(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      S(i, j) = v(k);
      S(j, i) = v(k);
      ++k;
    }
  }
  return S;
}

// ---------------------------------------------------------------------------
// Solver internals
// ---------------------------------------------------------------------------

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Barrier formulation of one SDP: keeps per-block lists of the variables
// that actually enter each block, since the assembly code produces many
// all-zero coefficient matrices.
struct Barrier {
  int p = 0;
  VectorXd c;
  std::vector<LmiBlock> blocks;
  std::vector<std::vector<int>> active;  // variables with nonzero F per block
  VectorXd lo, hi;
  int degree = 0;  // total barrier parameter: block dims + finite bounds

  void init_active() {
    active.clear();
    degree = 0;
    for (const auto& b : blocks) {
      degree += static_cast<int>(b.F0.rows());
      std::vector<int> act;
      for (int j = 0; j < p; ++j) {
        if (b.F[j].cwiseAbs().maxCoeff() != 0.0) act.push_back(j);
      }
      active.push_back(std::move(act));
    }
    for (int j = 0; j < p; ++j) {
      if (lo(j) > -kInf) ++degree;
      if (hi(j) < kInf) ++degree;
    }
  }

  bool strictly_feasible(const VectorXd& z) const {
    for (int j = 0; j < p; ++j) {
      if (!(z(j) > lo(j) && z(j) < hi(j))) return false;
    }
    for (const auto& b : blocks) {
      Eigen::LLT<MatrixXd> llt(eval_block(b, z));
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Gradient and Hessian of the barrier phi(z); z must be strictly feasible.
  // Returns false if a Cholesky factorization fails.
  bool derivs(const VectorXd& z, VectorXd& g, MatrixXd& H) const {
    g = VectorXd::Zero(p);
    H = MatrixXd::Zero(p, p);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      const auto& act = active[bi];
      if (act.empty()) continue;
      const Eigen::Index n = b.F0.rows();
      Eigen::LLT<MatrixXd> llt(eval_block(b, z));
      if (llt.info() != Eigen::Success) return false;
      const MatrixXd L = llt.matrixL();
      // M_j = L^-1 F_j L^-T; then grad_j = -tr(M_j), H_jk = <M_j, M_k>.
      std::vector<MatrixXd> M(act.size());
      for (size_t a = 0; a < act.size(); ++a) {
        MatrixXd S = L.triangularView<Eigen::Lower>().solve(b.F[act[a]]);
        M[a].noalias() =
            L.triangularView<Eigen::Lower>().solve(S.transpose()).transpose();
      }
      for (size_t a = 0; a < act.size(); ++a) {
        g(act[a]) -= M[a].trace();
        for (size_t e = a; e < act.size(); ++e) {
          const double hae = M[a].cwiseProduct(M[e]).sum();
          H(act[a], act[e]) += hae;
          if (e != a) H(act[e], act[a]) += hae;
        }
      }
      (void)n;
    }
    for (int j = 0; j < p; ++j) {
      if (lo(j) > -kInf) {
        const double d = z(j) - lo(j);
        g(j) -= 1.0 / d;
        H(j, j) += 1.0 / (d * d);
      }
      if (hi(j) < kInf) {
        const double d = hi(j) - z(j);
        g(j) += 1.0 / d;
        H(j, j) += 1.0 / (d * d);
      }
    }
    return true;
  }
};

struct CenterResult {
  bool ok = false;
  int iters = 0;
};

// Centering is deliberately loose (Newton decrement lambda <= 1/4): near
// corner optima the barrier Hessian conditioning makes tight centering
// unreachable in doubles, and the duality-gap bound below absorbs the
// slack. Damped steps 1/(1+lambda) guarantee descent without a merit
// line search for a self-concordant barrier.
constexpr double kCenterLambda2 = 0.0625;  // (1/4)^2

inline CenterResult center(const Barrier& bar, double t, VectorXd& z,
                           const std::function<bool(const VectorXd&)>& stop_early,
                           int max_iter = 200) {
  CenterResult res;
  VectorXd g;
  MatrixXd H;
  for (int it = 0; it < max_iter; ++it) {
    if (stop_early && stop_early(z)) {
      res.ok = true;
      res.iters = it;
      return res;
    }
    if (!bar.derivs(z, g, H)) return res;  // left the cone: numerical trouble
    VectorXd grad = g + t * bar.c;

    VectorXd dz;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::LDLT<MatrixXd> ldlt(H + ridge * MatrixXd::Identity(bar.p, bar.p));
      if (ldlt.info() == Eigen::Success) {
        dz = ldlt.solve(-grad);
        if (dz.allFinite() && grad.dot(dz) < 0.0) break;
      }
      ridge = (ridge == 0.0) ? 1e-12 * (1.0 + H.trace() / bar.p) : ridge * 100.0;
      dz.resize(0);
    }
    if (dz.size() == 0) {
      // Gradient may already be ~0 (centered); otherwise give up.
      res.ok = grad.norm() <= 1e-9 * (1.0 + t * bar.c.norm());
      res.iters = it;
      return res;
    }

    const double lambda2 = -grad.dot(dz);
    if (lambda2 <= kCenterLambda2) {
      res.ok = true;
      res.iters = it;
      return res;
    }
    const double lambda = std::sqrt(lambda2);
    double step = 1.0 / (1.0 + lambda);
    // Rounding can put the step marginally outside the cone; back off.
    int backs = 0;
    while (backs < 60 && !bar.strictly_feasible(z + step * dz)) {
      step *= 0.5;
      ++backs;
    }
    if (backs == 60) {
      res.ok = lambda2 <= 1.0;  // stalled at the boundary but nearly centered
      res.iters = it;
      return res;
    }
    z += step * dz;
    ++res.iters;
  }
  res.ok = false;  // iteration cap
  return res;
}

struct PathResult {
  bool converged = false;
  int newton_iters = 0;
  double gap = kInf;
};

// Duality gap of a loosely centered point (lambda <= 1): conservative form
// of (m + sqrt(m) * lambda / (1 - lambda)) / t.
inline double gap_at(const Barrier& bar, double t) {
  return (bar.degree + 2.0 * std::sqrt(static_cast<double>(bar.degree))) / t;
}

// Follow the central path until the gap drops below tol*(1+|c'z|) or the
// early-stop predicate fires.
inline PathResult path_follow(const Barrier& bar, VectorXd& z, double tol,
                              const std::function<bool(const VectorXd&)>& stop_early) {
  PathResult res;
  const double mu = 20.0;
  double t = 1.0;
  for (int round = 0; round < 60; ++round) {
    CenterResult cr = center(bar, t, z, stop_early);
    res.newton_iters += cr.iters;
    if (stop_early && stop_early(z)) {
      res.converged = true;
      res.gap = gap_at(bar, t);
      return res;
    }
    if (!cr.ok) return res;
    res.gap = gap_at(bar, t);
    if (res.gap <= tol * (1.0 + std::abs(bar.c.dot(z)))) {
      res.converged = true;
      return res;
    }
    t *= mu;
  }
  return res;
}

}  // namespace detail

/// Solve a small dense SDP. tol controls the relative duality gap at
/// termination and is clamped to [1e-10, 1e-4].
inline SdpSolution solve(const SdpProblem& problem, double tol = 1e-8) {
  problem.validate();
  tol = std::clamp(tol, 1e-10, 1e-4);

  const int p = problem.p;
  SdpSolution sol;

  // Normalize every block to unit scale: feasibility is unchanged and the
  // phase-1 slack becomes comparable across problems.
  detail::Barrier bar;
  bar.p = p;
  bar.c = problem.c;
  bar.blocks = problem.blocks;
  for (auto& b : bar.blocks) {
    double scale = b.F0.cwiseAbs().maxCoeff();
    for (const auto& Fj : b.F) scale = std::max(scale, Fj.cwiseAbs().maxCoeff());
    if (scale > 0.0 && scale != 1.0) {
      b.F0 /= scale;
      for (auto& Fj : b.F) Fj /= scale;
    }
  }
  if (problem.lo.size() == p) {
    bar.lo = problem.lo;
    bar.hi = problem.hi;
  } else {
    bar.lo = VectorXd::Constant(p, -detail::kInf);
    bar.hi = VectorXd::Constant(p, detail::kInf);
  }

  // Starting point: bound midpoints where available, zero elsewhere.
  VectorXd z0 = VectorXd::Zero(p);
  for (int j = 0; j < p; ++j) {
    const bool has_lo = bar.lo(j) > -detail::kInf;
    const bool has_hi = bar.hi(j) < detail::kInf;
    if (has_lo && has_hi) z0(j) = 0.5 * (bar.lo(j) + bar.hi(j));
    else if (has_lo) z0(j) = bar.lo(j) + 1.0;
    else if (has_hi) z0(j) = bar.hi(j) - 1.0;
  }

  // ---- Phase 1: minimize s with blocks shifted by s*I. -------------------
  detail::Barrier ph1;
  ph1.p = p + 1;
  ph1.c = VectorXd::Zero(p + 1);
  ph1.c(p) = 1.0;
  double s0 = 0.0;
  for (const auto& b : bar.blocks) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(eval_block(b, z0), Eigen::EigenvaluesOnly);
    s0 = std::max(s0, -es.eigenvalues().minCoeff());
  }
  s0 += 1.0;
  for (const auto& b : bar.blocks) {
    LmiBlock shifted;
    shifted.F0 = b.F0;
    shifted.F = b.F;
    shifted.F.push_back(MatrixXd::Identity(b.F0.rows(), b.F0.cols()));
    ph1.blocks.push_back(std::move(shifted));
  }
  ph1.lo = VectorXd::Constant(p + 1, -detail::kInf);
  ph1.hi = VectorXd::Constant(p + 1, detail::kInf);
  ph1.lo.head(p) = bar.lo;
  ph1.hi.head(p) = bar.hi;
  ph1.hi(p) = s0 + 1.0;
  // Phase-1 box on otherwise-free variables keeps the slack minimization
  // from drifting along directions that never help feasibility.
  const double box = 1e8 * (1.0 + z0.cwiseAbs().maxCoeff());
  for (int j = 0; j < p; ++j) {
    if (ph1.lo(j) == -detail::kInf) ph1.lo(j) = -box;
    if (ph1.hi(j) == detail::kInf) ph1.hi(j) = box;
  }
  ph1.init_active();

  VectorXd z1(p + 1);
  z1.head(p) = z0;
  z1(p) = s0;

  constexpr double kFeasEps = 1e-7;    // slack above this: infeasible
  constexpr double kExitLevel = 1e-4;  // slack below -this: comfortably interior
  auto interior_found = [&](const VectorXd& z) { return z(p) < -kExitLevel; };
  detail::PathResult pr1 =
      detail::path_follow(ph1, z1, std::min(tol, 0.1 * kFeasEps), interior_found);
  sol.newton_iters += pr1.newton_iters;
  const double slack = z1(p);

  if (!pr1.converged && !(slack < -kFeasEps)) {
    sol.status = SdpStatus::NumericalTrouble;
    sol.z = z1.head(p);
    sol.infeasibility = slack;
    return sol;
  }
  if (slack - pr1.gap > kFeasEps) {
    sol.status = SdpStatus::Infeasible;
    sol.z = z1.head(p);
    sol.infeasibility = slack;
    sol.min_eig_residual = min_block_eig(problem, sol.z);
    return sol;
  }

  // ---- Phase 2: minimize the real objective from the interior point. -----
  VectorXd z = z1.head(p);
  bar.init_active();
  bool phase2_ok = true;
  if (bar.c.cwiseAbs().maxCoeff() > 0.0) {
    if (bar.strictly_feasible(z)) {
      detail::PathResult pr2 = detail::path_follow(bar, z, tol, nullptr);
      sol.newton_iters += pr2.newton_iters;
      phase2_ok = pr2.converged;
    } else {
      // Feasible set has (numerically) empty interior; keep the phase-1
      // point, which is as good as any certifiable point.
      phase2_ok = slack <= kFeasEps;
    }
  }

  sol.z = z;
  sol.objective = problem.c.dot(z);
  sol.min_eig_residual = min_block_eig(problem, z);

  double bound_violation = 0.0;
  if (problem.lo.size() == p) {
    for (int j = 0; j < p; ++j) {
      bound_violation = std::max(bound_violation, problem.lo(j) - z(j));
      bound_violation = std::max(bound_violation, z(j) - problem.hi(j));
    }
  }

  // Post-hoc verification gates the Optimal label.
  if (phase2_ok && sol.min_eig_residual >= -1e-7 && bound_violation <= 1e-9) {
    sol.status = SdpStatus::Optimal;
  } else {
    sol.status = SdpStatus::NumericalTrouble;
  }
  return sol;
}

}  // namespace platoon::sdp
