#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

// Continuous-time model of one CACC follower: plant matrices, the base
// closed loop, and the sensor map with its inverse.
//
// State order is fixed repo-wide as x = [e, de/dt, z, v_prev, a_prev],
// augmented with the controller state rho as [x; rho].

namespace platoon::model {

using Mat5  = Eigen::Matrix<double, 5, 5>;
using Vec5  = Eigen::Matrix<double, 5, 1>;
using Row5  = Eigen::Matrix<double, 1, 5>;
using Mat65 = Eigen::Matrix<double, 6, 5>;
using Vec6  = Eigen::Matrix<double, 6, 1>;
using Row6  = Eigen::Matrix<double, 1, 6>;
using Mat6  = Eigen::Matrix<double, 6, 6>;
using Mat4  = Eigen::Matrix<double, 4, 4>;

/// Physical and control constants shared by every module.
struct PlatoonParams {
  double h   = 1.0;   ///< time gap [s]
  double tau = 0.1;   ///< driveline time constant [s]
  double r   = 2.0;   ///< standstill distance [m]
  double kp  = 0.2;   ///< proportional gain [1/s^2]
  double kd  = 0.7;   ///< derivative gain [1/s]
  double Ts  = 0.01;  ///< sampling interval [s]
  int    m   = 3;     ///< platoon length (vehicle count)

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("PlatoonParams: " + what);
    };
    if (!(h > 0.0) || !std::isfinite(h)) fail("h must be > 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be > 0");
    if (!(r >= 0.0) || !std::isfinite(r)) fail("r must be >= 0");
    if (!(kp > 0.0) || !std::isfinite(kp)) fail("kp must be > 0");
    if (!(kd > 0.0) || !std::isfinite(kd)) fail("kd must be > 0");
    if (!(Ts > 0.0) || !std::isfinite(Ts)) fail("Ts must be > 0");
    if (m < 2) fail("m must be >= 2");
  }
};

/// Plant in closed-loop coordinates: dx/dt = A x + B1 u_i + B2 u_prev,
/// with the state-feedback row K of the base controller.
struct PlantMatrices {
  Mat5 A;
  Vec5 B1;
  Vec5 B2;
  Row5 K;
};

/// Sensor map y = C x + D u_prev and the inverse of the stacked [C D].
struct SensorMap {
  Mat65 C;
  Vec6  D;
  Mat6  CDinv;
};

/// Base closed loop d/dt [x; rho] = Acal [x; rho] + Bu u_prev.
struct ClosedLoop {
  Mat6   Acal;
  Vec6   Bu;
  bool   stable;            ///< 4x4 (e, de/dt, z, rho) block Hurwitz
  double max_real_part;     ///< largest eigenvalue real part of that block
};

/// Stability handling for build_closed_loop: synthesis requires a stable
/// loop, simulation merely reports it.
enum class StabilityPolicy { Require, Warn };

inline PlantMatrices build_plant(const PlatoonParams& p) {
  p.validate();
  const double h = p.h, tau = p.tau;
  PlantMatrices out;
  out.A << 0, 1, 0, 0, 0,
           0, 1 / h - 1 / tau, 1 / tau - 1 / h, 0, 1,
           0, 1 / h, -1 / h, 0, 1,
           0, 0, 0, 0, 1,
           0, 0, 0, 0, -1 / tau;
  out.B1 << 0, -h / tau, 0, 0, 0;
  out.B2 << 0, 0, 0, 0, 1 / tau;
  out.K << p.kp / h, p.kd / h, 0, 0, 0;
  return out;
}

inline SensorMap build_sensor_map(const PlatoonParams& p) {
  if (!(p.h > 0.0)) throw std::invalid_argument("build_sensor_map: h must be > 0");
  const double h = p.h;
  SensorMap out;
  out.C << 1, 0, -h, h, 0,
           0, 0, -1, 1, 0,
           0, -1 / h, 1 / h, 0, 0,
           0, 0, 1, 0, 0,
           0, 0, 0, 0, 1,
           0, 0, 0, 0, 0;
  out.D << 0, 0, 0, 0, 0, 1;

  Mat6 CD;
  CD << out.C, out.D;
  out.CDinv = CD.inverse();

  // [C D] is invertible for every h > 0; guard against numerical surprises.
  const double residual = (CD * out.CDinv - Mat6::Identity()).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-12)) {
    throw std::runtime_error("build_sensor_map: [C D] inversion residual " +
                             std::to_string(residual) + " exceeds 1e-12");
  }
  return out;
}

/// Largest eigenvalue real part of the (e, de/dt, z, rho) principal block.
inline double controllable_block_max_real(const Mat6& Acal) {
  Mat4 block;
  const int idx[4] = {0, 1, 2, 5};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) block(i, j) = Acal(idx[i], idx[j]);
  Eigen::EigenSolver<Mat4> es(block);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("controllable_block_max_real: eigensolver failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

inline ClosedLoop build_closed_loop(const PlantMatrices& plant, const PlatoonParams& p,
                                    StabilityPolicy policy = StabilityPolicy::Require) {
  p.validate();
  ClosedLoop out;
  out.Acal.topLeftCorner<5, 5>() = plant.A;
  out.Acal.topRightCorner<5, 1>() = plant.B1;
  out.Acal.bottomLeftCorner<1, 5>() = plant.K;
  out.Acal(5, 5) = -1.0 / p.h;
  out.Bu.head<5>() = plant.B2;
  out.Bu(5) = 1.0 / p.h;

  out.max_real_part = controllable_block_max_real(out.Acal);
  out.stable = out.max_real_part < -1e-9;
  if (!out.stable && policy == StabilityPolicy::Require) {
    throw std::runtime_error(
        "build_closed_loop: gains are not stabilizing (max eigenvalue real part " +
        std::to_string(out.max_real_part) + ")");
  }
  return out;
}

}  // namespace platoon::model
