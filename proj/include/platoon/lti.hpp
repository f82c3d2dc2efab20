#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

// Matrix exponential, exact zero-order-hold discretization, Schur/Hurwitz
// tests, and discrete LTI rollout. Everything here is small and dense.

namespace platoon::lti {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// x(k+1) = Ad x(k) + Bd u(k), sampled at Ts.
struct DiscreteSystem {
  MatrixXd Ad;
  MatrixXd Bd;
  double   Ts = 0.0;
};

/// Exponential of a square matrix (scaling-and-squaring, Pade kernel).
inline MatrixXd mat_exp(const MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("mat_exp: matrix must be square");
  if (!M.allFinite()) throw std::invalid_argument("mat_exp: non-finite entries");
  MatrixXd E = M.exp();
  if (!E.allFinite()) throw std::overflow_error("mat_exp: non-finite result");
  return E;
}

/// ZOH discretization data for a fixed (A, Ts): Ad = exp(A Ts) and
/// Gamma = int_0^Ts exp(A s) ds, so that Bd = Gamma * B for any B.
///
/// Both come from one exponential of the doubled block [[A, I], [0, 0]] * Ts,
/// which keeps Bd = Gamma * B bit-identical no matter which B is supplied;
/// synthesis relies on that when sweeping the attack matrix.
struct Zoh {
  MatrixXd Ad;
  MatrixXd gamma;
  double   Ts = 0.0;

  MatrixXd bd(const MatrixXd& B) const {
    if (B.rows() != gamma.cols()) throw std::invalid_argument("Zoh::bd: row mismatch");
    return gamma * B;
  }
};

inline Zoh make_zoh(const MatrixXd& A, double Ts) {
  if (A.rows() != A.cols()) throw std::invalid_argument("make_zoh: A must be square");
  if (!(Ts > 0.0)) throw std::invalid_argument("make_zoh: Ts must be > 0");
  const Eigen::Index n = A.rows();
  MatrixXd M = MatrixXd::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = A;
  M.topRightCorner(n, n) = MatrixXd::Identity(n, n);
  const MatrixXd E = mat_exp(M * Ts);
  return Zoh{E.topLeftCorner(n, n), E.topRightCorner(n, n), Ts};
}

inline DiscreteSystem discretize(const MatrixXd& A, const MatrixXd& B, double Ts) {
  if (B.rows() != A.rows()) throw std::invalid_argument("discretize: B row mismatch");
  const Zoh zoh = make_zoh(A, Ts);
  return DiscreteSystem{zoh.Ad, zoh.bd(B), Ts};
}

// Margin keeps numerically marginal systems out.
inline constexpr double kStabilityMargin = 1e-9;

inline bool is_schur(const MatrixXd& Ad) {
  if (Ad.rows() != Ad.cols()) throw std::invalid_argument("is_schur: matrix must be square");
  Eigen::EigenSolver<MatrixXd> es(Ad, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("is_schur: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff() < 1.0 - kStabilityMargin;
}

inline bool is_hurwitz(const MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("is_hurwitz: matrix must be square");
  Eigen::EigenSolver<MatrixXd> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("is_hurwitz: eigensolver failed");
  return es.eigenvalues().real().maxCoeff() < -kStabilityMargin;
}

/// Spectral radius, used to size the feasible decay range of reachability LMIs.
inline double spectral_radius(const MatrixXd& Ad) {
  Eigen::EigenSolver<MatrixXd> es(Ad, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Roll the system forward from x0 under the input columns of U.
/// Returns the n x (K+1) matrix of states x(0..K), K = U.cols().
inline MatrixXd rollout(const DiscreteSystem& sys, const VectorXd& x0, const MatrixXd& U) {
  const Eigen::Index n = sys.Ad.rows();
  if (x0.size() != n) throw std::invalid_argument("rollout: x0 size mismatch");
  if (sys.Bd.rows() != n || U.rows() != sys.Bd.cols()) {
    throw std::invalid_argument("rollout: input dimension mismatch");
  }
  MatrixXd X(n, U.cols() + 1);
  X.col(0) = x0;
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    X.col(k + 1) = sys.Ad * X.col(k) + sys.Bd * U.col(k);
  }
  return X;
}

}  // namespace platoon::lti
