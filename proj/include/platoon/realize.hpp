#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "platoon/model.hpp"

// Controller-realization algebra: the (alpha, beta) class of equivalent
// controllers, the realized controller under sensor attacks, the attack
// input matrix, and the decoupled 4-state subsystem used for reachability.

namespace platoon::realize {

using model::ClosedLoop;
using model::Mat4;
using model::Mat6;
using model::PlantMatrices;
using model::PlatoonParams;
using model::Row6;
using model::SensorMap;
using model::Vec6;

using Mat43 = Eigen::Matrix<double, 4, 3>;
using Mat46 = Eigen::Matrix<double, 4, 6>;
using Vec4  = Eigen::Matrix<double, 4, 1>;

/// One member of the equivalent-controller class. The controller state
/// is rho_bar = alpha * rho + beta * y; entry 6 of beta is pinned to zero
/// (the last sensor channel carries u_prev, whose derivative is unknown).
struct Realization {
  double alpha = 1.0;
  Row6   beta = Row6::Zero();

  void validate() const {
    if (alpha == 0.0 || !std::isfinite(alpha)) {
      throw std::invalid_argument("Realization: alpha must be nonzero");
    }
    if (beta(5) != 0.0) {
      throw std::invalid_argument("Realization: beta[6] must be exactly zero");
    }
    if (!beta.allFinite()) {
      throw std::invalid_argument("Realization: beta must be finite");
    }
  }
};

/// Realized controller in rho_bar coordinates:
///   u_i        = c_c * rho_bar + d_c * y
///   drho_bar   = a_c * rho_bar + b_c * y
struct RealizedController {
  double a_c;
  Row6   b_c;
  double c_c;
  Row6   d_c;
};

/// Attacked follower reduced to the 4 coordinates [e, de/dt, z, rho]:
///   dx = Ai x + Bprev [v_prev; a_prev; u_prev] + Bdelta delta
struct DecoupledSystem {
  Mat4  Ai;
  Mat43 Bprev;
  Mat46 Bdelta;
  bool  stable;  ///< Ai Hurwitz (re-checked at extraction)
};

/// The base controller as a realization: alpha = 1, beta = 0.
inline Realization realization_C() { return Realization{}; }

/// The alternative published controller: alpha = -tau/h,
/// beta = [0, 0, 1 - tau/h, 0, tau/h, 0].
inline Realization realization_Chat(const PlatoonParams& p) {
  if (!(p.h > 0.0) || !(p.tau > 0.0)) {
    throw std::invalid_argument("realization_Chat: requires h > 0 and tau > 0");
  }
  Realization out;
  out.alpha = -p.tau / p.h;
  out.beta << 0, 0, 1.0 - p.tau / p.h, 0, p.tau / p.h, 0;
  return out;
}

namespace detail {

// [K 1/h] and C*[A B2] appear in both the attack matrix and the realized
// controller; assemble them once.
inline Row6 k_row(const PlantMatrices& plant, const PlatoonParams& p) {
  Row6 out;
  out << plant.K, 1.0 / p.h;
  return out;
}

inline Mat6 c_times_plant(const PlantMatrices& plant, const SensorMap& sensor) {
  Eigen::Matrix<double, 5, 6> AB2;
  AB2 << plant.A, plant.B2;
  return sensor.C * AB2;
}

}  // namespace detail

/// Attack input matrix of the closed loop in original coordinates: the
/// only closed-loop quantity that depends on the realization.
inline Mat6 attack_matrix(const PlantMatrices& plant, const SensorMap& sensor,
                          const PlatoonParams& p, const Realization& real) {
  real.validate();
  const Row6 beta_over_alpha = real.beta / real.alpha;
  Mat6 out;
  out.topRows<5>() = -plant.B1 * beta_over_alpha;
  out.row(5) = (detail::k_row(plant, p) + beta_over_alpha * detail::c_times_plant(plant, sensor)) *
                   sensor.CDinv +
               beta_over_alpha / p.h;
  return out;
}

inline RealizedController realized_controller(const PlantMatrices& plant,
                                              const SensorMap& sensor,
                                              const PlatoonParams& p,
                                              const Realization& real) {
  real.validate();
  const double alpha = real.alpha;
  const Row6&  beta = real.beta;
  const double beta_c_b1 = (beta * sensor.C * plant.B1)(0);

  RealizedController out;
  out.a_c = beta_c_b1 / alpha - 1.0 / p.h;
  out.b_c = (alpha * detail::k_row(plant, p) + beta * detail::c_times_plant(plant, sensor)) *
                sensor.CDinv +
            beta / p.h - (beta_c_b1 / alpha) * beta;
  out.c_c = 1.0 / alpha;
  out.d_c = -beta / alpha;
  return out;
}

/// Extract the (e, de/dt, z, rho) subsystem; v_prev, a_prev, u_prev become
/// inputs. Ai and Bprev are independent of the realization.
inline DecoupledSystem decouple(const ClosedLoop& cl, const Mat6& Bdelta_full,
                                const Vec6& Bu) {
  // Rows 4 and 5 of the full attack matrix are structurally zero (B1 has
  // zero entries there); anything bigger means the inputs were inconsistent.
  const double dropped = Bdelta_full.middleRows<2>(3).cwiseAbs().maxCoeff();
  if (!(dropped <= 1e-14)) {
    throw std::runtime_error("decouple: dropped attack-matrix rows are not zero (max " +
                             std::to_string(dropped) + ")");
  }

  const int idx[4] = {0, 1, 2, 5};
  DecoupledSystem out;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) out.Ai(i, j) = cl.Acal(idx[i], idx[j]);
    out.Bprev(i, 0) = cl.Acal(idx[i], 3);
    out.Bprev(i, 1) = cl.Acal(idx[i], 4);
    out.Bprev(i, 2) = Bu(idx[i]);
    out.Bdelta.row(i) = Bdelta_full.row(idx[i]);
  }

  Eigen::EigenSolver<Mat4> es(out.Ai);
  out.stable = es.info() == Eigen::Success && es.eigenvalues().real().maxCoeff() < -1e-9;
  return out;
}

/// Convenience: decoupled system of a given realization from params alone.
inline DecoupledSystem decoupled_system(const PlatoonParams& p, const Realization& real,
                                        model::StabilityPolicy policy = model::StabilityPolicy::Require) {
  const PlantMatrices plant = model::build_plant(p);
  const SensorMap sensor = model::build_sensor_map(p);
  const ClosedLoop cl = model::build_closed_loop(plant, p, policy);
  return decouple(cl, attack_matrix(plant, sensor, p, real), cl.Bu);
}

}  // namespace platoon::realize
