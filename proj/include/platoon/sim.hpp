#pragma once
// Discrete-time simulation of an m-vehicle platoon. Every follower runs its
// realized controller in rho_bar coordinates; the chain couples through the
// predecessor signals (v, a, u) carried inside one stacked LTI system, which
// is discretized exactly once with ZOH. The only exogenous inputs are the
// lead control samples and the per-follower attack channels, both held
// constant over each sampling period.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "platoon/lti.hpp"
#include "platoon/model.hpp"
#include "platoon/reach.hpp"
#include "platoon/realize.hpp"

namespace platoon::sim {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using model::PlatoonParams;
using model::Row6;
using model::Vec5;

/// Lead-vehicle control input: one sample per period Ts, held over the step.
struct LeadProfile {
  std::vector<double> samples;
  double v0 = 20.0;  ///< initial lead velocity [m/s]

  void validate(int horizon) const {
    if (!std::isfinite(v0)) throw std::invalid_argument("LeadProfile: v0 must be finite");
    if (static_cast<int>(samples.size()) < horizon) {
      throw std::invalid_argument("LeadProfile: need at least `horizon` samples");
    }
    for (double s : samples) {
      if (!std::isfinite(s)) throw std::invalid_argument("LeadProfile: samples must be finite");
    }
  }
};

/// Piecewise-constant profile from (time, value) knots, sampled at period Ts.
/// Sample k takes the value of the last knot with time <= k * Ts (0 before
/// the first knot). Convenient for step/pulse lead maneuvers.
inline std::vector<double> step_profile(int horizon, double Ts,
                                        const std::vector<std::pair<double, double>>& knots) {
  std::vector<double> out(static_cast<size_t>(horizon), 0.0);
  for (int k = 0; k < horizon; ++k) {
    const double t = k * Ts;
    double value = 0.0;
    for (const auto& [tk, vk] : knots) {
      if (tk <= t + 1e-12) value = vk;
    }
    out[static_cast<size_t>(k)] = value;
  }
  return out;
}

enum class AttackKind { Zero, Constant, Sine, Uniform, BangBang };

/// Generator for one attacked channel. Whatever the generator produces is
/// clipped to [-W_j, W_j], so the per-channel peak bound holds by
/// construction.
struct AttackSignalSpec {
  AttackKind kind = AttackKind::Zero;
  double amplitude = 0.0;
  double frequency_hz = 0.0;        ///< sine only
  double phase = 0.0;               ///< sine only [rad]
  double switch_probability = 0.05; ///< bang-bang only, per step
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(amplitude) || !std::isfinite(frequency_hz) || !std::isfinite(phase)) {
      throw std::invalid_argument("AttackSignalSpec: parameters must be finite");
    }
    if (!(switch_probability >= 0.0 && switch_probability <= 1.0)) {
      throw std::invalid_argument("AttackSignalSpec: switch_probability must be in [0, 1]");
    }
  }
};

/// Stable per-signal seed derivation so each (vehicle, channel) stream is
/// independent of every other one (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t vehicle,
                                 std::uint64_t channel) {
  std::uint64_t x = root ^ (0x9e3779b97f4a7c15ull * (vehicle + 1)) ^
                    (0xbf58476d1ce4e5b9ull * (channel + 1));
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Sample `count` held values of one attack channel. Deterministic in
/// spec.seed; every sample lies in [-W_j, W_j].
inline std::vector<double> sample_attack(const AttackSignalSpec& spec, double W_j, double Ts,
                                         int count) {
  spec.validate();
  if (!(W_j >= 0.0) || !std::isfinite(W_j)) {
    throw std::invalid_argument("sample_attack: W_j must be nonnegative and finite");
  }
  if (count < 0) throw std::invalid_argument("sample_attack: count must be nonnegative");

  std::vector<double> out(static_cast<size_t>(count), 0.0);
  const auto clip = [W_j](double v) { return std::clamp(v, -W_j, W_j); };
  std::mt19937_64 gen(spec.seed);

  switch (spec.kind) {
    case AttackKind::Zero:
      break;
    case AttackKind::Constant:
      std::fill(out.begin(), out.end(), clip(spec.amplitude));
      break;
    case AttackKind::Sine:
      for (int k = 0; k < count; ++k) {
        const double t = k * Ts;
        out[static_cast<size_t>(k)] =
            clip(spec.amplitude * std::sin(2.0 * M_PI * spec.frequency_hz * t + spec.phase));
      }
      break;
    case AttackKind::Uniform: {
      std::uniform_real_distribution<double> dist(-spec.amplitude, spec.amplitude);
      for (auto& v : out) v = clip(dist(gen));
      break;
    }
    case AttackKind::BangBang: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      double level = (unit(gen) < 0.5) ? spec.amplitude : -spec.amplitude;
      for (auto& v : out) {
        v = clip(level);
        if (unit(gen) < spec.switch_probability) level = -level;
      }
      break;
    }
  }
  return out;
}

/// Optional per-follower initial deviation from the equilibrium start
/// (zero spacing errors, common velocity).
struct InitialOffsets {
  double de = 0.0;
  double dedot = 0.0;
  double dz = 0.0;
};

/// Everything one deterministic run needs.
struct PlatoonScenario {
  PlatoonParams params;
  std::vector<realize::Realization> realizations;     ///< size m-1
  LeadProfile lead;
  std::vector<std::array<AttackSignalSpec, 6>> attacks;  ///< size m-1 or empty (= no attacks)
  reach::AttackBounds bounds;
  int horizon = 1;
  std::vector<InitialOffsets> offsets;                 ///< size m-1 or empty

  void validate() const {
    params.validate();
    bounds.validate();
    if (horizon < 1) throw std::invalid_argument("PlatoonScenario: horizon must be >= 1");
    const size_t followers = static_cast<size_t>(params.m) - 1;
    if (realizations.size() != followers) {
      throw std::invalid_argument("PlatoonScenario: need one realization per follower");
    }
    for (const auto& r : realizations) r.validate();
    if (!attacks.empty() && attacks.size() != followers) {
      throw std::invalid_argument("PlatoonScenario: attacks must be empty or one set per follower");
    }
    for (const auto& set : attacks) {
      for (const auto& spec : set) spec.validate();
    }
    if (!offsets.empty() && offsets.size() != followers) {
      throw std::invalid_argument("PlatoonScenario: offsets must be empty or one per follower");
    }
    lead.validate(horizon);
  }
};

/// Linear output rows over the stacked state, one set per vehicle. The rows
/// evaluate physical signals; u additionally feeds through the vehicle's own
/// attack vector (u_delta), zero for the lead and for the base realization.
struct VehicleMap {
  RowVectorXd e, v, a, rho, u;
  RowVectorXd vprev, aprev;  ///< predecessor signals (zero rows for the lead)
  Row6 u_delta = Row6::Zero();
  Eigen::Matrix<double, 1, 5> betaC = Eigen::Matrix<double, 1, 5>::Zero();
};

/// The platoon chain as one LTI system. State ordering:
/// [v1, a1, (e, de/dt, z, rho_bar)_{i=2..m}]; inputs [u1, delta_2 (6), ...].
struct StackedSystem {
  PlatoonParams params;
  int m = 0;
  int n = 0;          ///< stacked state dimension 2 + 4(m-1)
  MatrixXd A, B;      ///< continuous-time stacked pair
  lti::DiscreteSystem sysd;
  std::vector<VehicleMap> maps;  ///< size m, index 0 = lead
  bool stable = true;            ///< follower error blocks Hurwitz (warning only)
};

inline StackedSystem build_stacked_system(const PlatoonScenario& sc) {
  sc.validate();
  const PlatoonParams& p = sc.params;
  const auto plant = model::build_plant(p);
  const auto sensor = model::build_sensor_map(p);
  const auto cl = model::build_closed_loop(plant, p, model::StabilityPolicy::Warn);

  StackedSystem st;
  st.params = p;
  st.m = p.m;
  st.n = 2 + 4 * (p.m - 1);
  st.stable = cl.stable;
  const int n = st.n;
  const int q = 1 + 6 * (p.m - 1);
  st.A = MatrixXd::Zero(n, n);
  st.B = MatrixXd::Zero(n, q);
  st.maps.resize(static_cast<size_t>(p.m));

  const auto unit_row = [n](int j) {
    RowVectorXd r = RowVectorXd::Zero(n);
    r(j) = 1.0;
    return r;
  };

  // Lead: dv1 = a1, da1 = (u1 - a1) / tau.
  st.A(0, 1) = 1.0;
  st.A(1, 1) = -1.0 / p.tau;
  st.B(1, 0) = 1.0 / p.tau;
  {
    VehicleMap& lead = st.maps[0];
    lead.v = unit_row(0);
    lead.a = unit_row(1);
    lead.e = RowVectorXd::Zero(n);
    lead.rho = RowVectorXd::Zero(n);
    lead.u = RowVectorXd::Zero(n);  // lead u comes from the sample sequence
    lead.vprev = RowVectorXd::Zero(n);
    lead.aprev = RowVectorXd::Zero(n);
  }

  constexpr int kKeep[4] = {0, 1, 2, 5};  // rows of the 6-state follower block

  for (int i = 2; i <= p.m; ++i) {
    const int f = i - 2;            // follower index, 0-based
    const int base = 2 + 4 * f;     // first stacked column of this follower
    const auto& real = sc.realizations[static_cast<size_t>(f)];
    const auto ctrl = realize::realized_controller(plant, sensor, p, real);

    // Closed follower block in rho_bar coordinates over
    // w = [e, de/dt, z, v_prev, a_prev, rho_bar], driven by u_prev and delta.
    model::Mat6 M;
    M.topLeftCorner<5, 5>() = plant.A + plant.B1 * (ctrl.d_c * sensor.C);
    M.topRightCorner<5, 1>() = plant.B1 * ctrl.c_c;
    M.bottomLeftCorner<1, 5>() = ctrl.b_c * sensor.C;
    M(5, 5) = ctrl.a_c;
    model::Vec6 bu;
    bu.head<5>() = plant.B2 + plant.B1 * (ctrl.d_c * sensor.D);
    bu(5) = (ctrl.b_c * sensor.D)(0);
    model::Mat6 bdelta;
    bdelta.topRows<5>() = plant.B1 * ctrl.d_c;
    bdelta.row(5) = ctrl.b_c;

    VehicleMap& map = st.maps[static_cast<size_t>(i - 1)];
    const RowVectorXd erow = unit_row(base);
    const RowVectorXd edrow = unit_row(base + 1);
    const RowVectorXd zrow = unit_row(base + 2);
    const RowVectorXd rhorow = unit_row(base + 3);

    // Predecessor signals expressed over the stacked state.
    if (i == 2) {
      map.vprev = unit_row(0);
      map.aprev = unit_row(1);
    } else {
      const VehicleMap& prev = st.maps[static_cast<size_t>(i - 2)];
      map.vprev = prev.v;
      map.aprev = prev.a;
    }

    map.e = erow;
    map.v = map.vprev - zrow;                    // v_i = v_{i-1} - z_i
    map.a = (zrow - edrow) / p.h;                // a_i = (z_i - de/dt) / h
    map.rho = rhorow;
    const Eigen::Matrix<double, 1, 5> dcC = ctrl.d_c * sensor.C;
    map.u = dcC(0) * erow + dcC(1) * edrow + dcC(2) * zrow + dcC(3) * map.vprev +
            dcC(4) * map.aprev + ctrl.c_c * rhorow;
    map.u_delta = ctrl.d_c;
    map.betaC = real.beta * sensor.C;

    // Substitution matrix w = S * s.
    MatrixXd S(6, n);
    S.row(0) = erow;
    S.row(1) = edrow;
    S.row(2) = zrow;
    S.row(3) = map.vprev;
    S.row(4) = map.aprev;
    S.row(5) = rhorow;

    const MatrixXd MS = M * S;
    Eigen::Vector4d bu4, bd4col;
    for (int lr = 0; lr < 4; ++lr) {
      st.A.row(base + lr) += MS.row(kKeep[lr]);
      bu4(lr) = bu(kKeep[lr]);
    }

    // Predecessor control: exogenous u1 for the first follower, otherwise the
    // previous follower's output map (state part into A, attack feedthrough
    // into that follower's delta columns).
    if (i == 2) {
      st.B.block(base, 0, 4, 1) += bu4;
    } else {
      const VehicleMap& prev = st.maps[static_cast<size_t>(i - 2)];
      st.A.block(base, 0, 4, n) += bu4 * prev.u;
      st.B.block(base, 1 + 6 * (f - 1), 4, 6) += bu4 * prev.u_delta;
    }

    // Own attack channels.
    for (int lr = 0; lr < 4; ++lr) {
      st.B.block(base + lr, 1 + 6 * f, 1, 6) += bdelta.row(kKeep[lr]);
    }
  }

  st.sysd = lti::discretize(st.A, st.B, p.Ts);
  return st;
}

/// Per-vehicle sampled series; every vector has horizon + 1 entries.
struct VehicleSeries {
  std::vector<double> d, v, a, e, u, rho;
};

struct Trajectory {
  double Ts = 0.0;
  int m = 0;
  int horizon = 0;
  std::vector<VehicleSeries> vehicles;  ///< index 0 = lead
  MatrixXd states;                      ///< stacked state history, n x (horizon+1)
};

/// Simulate from explicit held input samples. `delta` stacks the follower
/// attack channels ((m-1)*6 rows); it needs at least `horizon` columns, and
/// column `horizon` (when present) is only used to report u at the final
/// sample.
inline Trajectory simulate_sampled(const StackedSystem& st, const LeadProfile& lead,
                                   const MatrixXd& delta,
                                   const std::vector<InitialOffsets>& offsets, int horizon) {
  const PlatoonParams& p = st.params;
  const int followers = st.m - 1;
  if (horizon < 1) throw std::invalid_argument("simulate_sampled: horizon must be >= 1");
  lead.validate(horizon);
  if (delta.rows() != 6 * followers || delta.cols() < horizon) {
    throw std::invalid_argument("simulate_sampled: delta must be 6(m-1) x >=horizon");
  }
  if (!offsets.empty() && offsets.size() != static_cast<size_t>(followers)) {
    throw std::invalid_argument("simulate_sampled: offsets must be empty or one per follower");
  }

  // Initial stacked state: physical entries first, then each controller state
  // rho_bar(0) = beta * y(0) from its own clean measurement (rho(0) = 0; the
  // u_prev channel never contributes because beta_6 = 0).
  VectorXd x0 = VectorXd::Zero(st.n);
  x0(0) = lead.v0;
  for (int f = 0; f < followers; ++f) {
    const InitialOffsets off = offsets.empty() ? InitialOffsets{} : offsets[static_cast<size_t>(f)];
    x0.segment<3>(2 + 4 * f) << off.de, off.dedot, off.dz;
  }
  for (int f = 0; f < followers; ++f) {
    const VehicleMap& map = st.maps[static_cast<size_t>(f + 1)];
    Vec5 w0;
    w0 << x0(2 + 4 * f), x0(2 + 4 * f + 1), x0(2 + 4 * f + 2), map.vprev.dot(x0),
        map.aprev.dot(x0);
    x0(2 + 4 * f + 3) = (map.betaC * w0)(0);
  }

  MatrixXd U(st.B.cols(), horizon);
  for (int k = 0; k < horizon; ++k) {
    U(0, k) = lead.samples[static_cast<size_t>(k)];
    U.col(k).tail(6 * followers) = delta.col(k);
  }

  Trajectory traj;
  traj.Ts = p.Ts;
  traj.m = st.m;
  traj.horizon = horizon;
  traj.states = lti::rollout(st.sysd, x0, U);
  traj.vehicles.resize(static_cast<size_t>(st.m));

  const auto held = [&](int k) { return std::min<Eigen::Index>(k, delta.cols() - 1); };
  const auto lead_u = [&](int k) {
    return lead.samples[std::min(static_cast<size_t>(k), lead.samples.size() - 1)];
  };

  for (int vi = 0; vi < st.m; ++vi) {
    const VehicleMap& map = st.maps[static_cast<size_t>(vi)];
    VehicleSeries& s = traj.vehicles[static_cast<size_t>(vi)];
    const size_t len = static_cast<size_t>(horizon) + 1;
    s.d.resize(len);
    s.v.resize(len);
    s.a.resize(len);
    s.e.resize(len);
    s.u.resize(len);
    s.rho.resize(len);
    for (int k = 0; k <= horizon; ++k) {
      const VectorXd x = traj.states.col(k);
      const double v = map.v.dot(x);
      const double e = map.e.dot(x);
      s.v[static_cast<size_t>(k)] = v;
      s.a[static_cast<size_t>(k)] = map.a.dot(x);
      s.e[static_cast<size_t>(k)] = e;
      s.rho[static_cast<size_t>(k)] = map.rho.dot(x);
      s.d[static_cast<size_t>(k)] = e + p.r + p.h * v;  // lead: virtual target, e = 0
      if (vi == 0) {
        s.u[static_cast<size_t>(k)] = lead_u(k);
      } else {
        const double feed =
            (map.u_delta * delta.col(held(k)).segment<6>(6 * (vi - 1)))(0);
        s.u[static_cast<size_t>(k)] = map.u.dot(x) + feed;
      }
    }
  }
  return traj;
}

/// Sample every attack channel of the scenario: horizon + 1 held values per
/// channel (the final one only feeds the u report at the last sample).
inline MatrixXd sample_scenario_attacks(const PlatoonScenario& sc) {
  const int followers = sc.params.m - 1;
  MatrixXd delta = MatrixXd::Zero(6 * followers, sc.horizon + 1);
  if (sc.attacks.empty()) return delta;
  for (int f = 0; f < followers; ++f) {
    for (int j = 0; j < 6; ++j) {
      const auto seq = sample_attack(sc.attacks[static_cast<size_t>(f)][static_cast<size_t>(j)],
                                     sc.bounds.W(j), sc.params.Ts, sc.horizon + 1);
      for (int k = 0; k <= sc.horizon; ++k) delta(6 * f + j, k) = seq[static_cast<size_t>(k)];
    }
  }
  return delta;
}

inline Trajectory run(const PlatoonScenario& sc) {
  const StackedSystem st = build_stacked_system(sc);
  return simulate_sampled(st, sc.lead, sample_scenario_attacks(sc), sc.offsets, sc.horizon);
}

struct Metrics {
  double max_abs_e = 0.0;                      ///< over followers and samples
  std::vector<double> max_abs_e_per_follower;  ///< size m-1
  double min_distance = std::numeric_limits<double>::infinity();  ///< followers only
  bool collision = false;                      ///< min follower distance <= 0
  std::vector<double> rms_u;                   ///< size m, lead first
  double max_u_diff_vs_reference = 0.0;        ///< set by the reference overload
};

inline double max_u_difference(const Trajectory& a, const Trajectory& b) {
  if (a.m != b.m || a.horizon != b.horizon) {
    throw std::invalid_argument("max_u_difference: trajectories must match in shape");
  }
  double worst = 0.0;
  for (int vi = 0; vi < a.m; ++vi) {
    for (size_t k = 0; k < a.vehicles[static_cast<size_t>(vi)].u.size(); ++k) {
      worst = std::max(worst, std::abs(a.vehicles[static_cast<size_t>(vi)].u[k] -
                                       b.vehicles[static_cast<size_t>(vi)].u[k]));
    }
  }
  return worst;
}

inline double max_e_difference(const Trajectory& a, const Trajectory& b) {
  if (a.m != b.m || a.horizon != b.horizon) {
    throw std::invalid_argument("max_e_difference: trajectories must match in shape");
  }
  double worst = 0.0;
  for (int vi = 0; vi < a.m; ++vi) {
    for (size_t k = 0; k < a.vehicles[static_cast<size_t>(vi)].e.size(); ++k) {
      worst = std::max(worst, std::abs(a.vehicles[static_cast<size_t>(vi)].e[k] -
                                       b.vehicles[static_cast<size_t>(vi)].e[k]));
    }
  }
  return worst;
}

inline Metrics compute_metrics(const Trajectory& traj) {
  Metrics m;
  m.max_abs_e_per_follower.assign(static_cast<size_t>(traj.m - 1), 0.0);
  m.rms_u.assign(static_cast<size_t>(traj.m), 0.0);
  for (int vi = 0; vi < traj.m; ++vi) {
    const VehicleSeries& s = traj.vehicles[static_cast<size_t>(vi)];
    double sq = 0.0;
    for (double u : s.u) sq += u * u;
    m.rms_u[static_cast<size_t>(vi)] = std::sqrt(sq / static_cast<double>(s.u.size()));
    if (vi == 0) continue;
    double& me = m.max_abs_e_per_follower[static_cast<size_t>(vi - 1)];
    for (size_t k = 0; k < s.e.size(); ++k) {
      me = std::max(me, std::abs(s.e[k]));
      m.min_distance = std::min(m.min_distance, s.d[k]);
    }
    m.max_abs_e = std::max(m.max_abs_e, me);
  }
  m.collision = m.min_distance <= 0.0;
  return m;
}

inline Metrics compute_metrics(const Trajectory& traj, const Trajectory& reference) {
  Metrics m = compute_metrics(traj);
  m.max_u_diff_vs_reference = max_u_difference(traj, reference);
  return m;
}

}  // namespace platoon::sim
