#pragma once
// Config parsing and result serialization for the command-line front end.
// JSON in/out goes through nlohmann::json whose object type keeps keys
// sorted; together with its deterministic number formatting that makes every
// emitted document canonical (byte-identical for identical inputs). CSV
// numbers are printed with one fixed "%.*g" format for the same reason.
// All knowledge of file formats lives here; the core headers stay plain.

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "platoon/model.hpp"
#include "platoon/reach.hpp"
#include "platoon/realize.hpp"
#include "platoon/sim.hpp"
#include "platoon/synth.hpp"

namespace platoon::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// canonical output helpers

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Canonical dump: sorted keys (nlohmann's std::map object type), two-space
/// indent, trailing newline.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

inline json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Derived>
json vector_to_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// ---------------------------------------------------------------------------
// config schema

/// Throws when `j` (an object) contains a key outside `allowed`, naming both
/// the key and where it appeared.
inline void reject_unknown_keys(const json& j, const std::string& context,
                                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: " + context + " must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + context);
    }
  }
}

/// a-grid request: explicit [lo, hi] or the adaptive default around the
/// system's spectral radius when the endpoints are omitted.
struct GridSpec {
  int points = 50;
  std::optional<double> lo;
  std::optional<double> hi;
};

inline std::vector<double> make_grid(const GridSpec& spec, const Eigen::MatrixXd& Ad) {
  if (spec.lo.has_value() != spec.hi.has_value()) {
    throw std::invalid_argument("config: a_grid needs both lo and hi, or neither");
  }
  if (spec.lo) return reach::make_a_grid(*spec.lo, *spec.hi, spec.points);
  return reach::default_a_grid(Ad, spec.points);
}

/// One attack template applied to the selected channels of every follower;
/// per-signal seeds are derived from the global seed and (vehicle, channel).
struct AttackTemplate {
  sim::AttackSignalSpec spec;
  std::vector<int> channels = {0, 1, 2, 3, 4, 5};
};

struct ScenarioSpec {
  int horizon = 1000;
  double lead_v0 = 20.0;
  std::vector<std::pair<double, double>> lead_knots;
  std::vector<json> realization_specs;  ///< size m-1; names or explicit objects
  std::optional<AttackTemplate> attack;
  std::vector<sim::InitialOffsets> offsets;
};

struct Config {
  model::PlatoonParams params;
  reach::AttackBounds bounds;
  GridSpec grid;
  std::map<std::string, realize::Realization> named;  ///< user-defined realizations
  std::vector<std::string> compare = {"C", "Chat", "optimal"};
  std::optional<ScenarioSpec> scenario;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
};

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw std::invalid_argument("config: " + where + " must be a number");
  return j.get<double>();
}

inline realize::Realization parse_realization(const json& j, const std::string& where) {
  reject_unknown_keys(j, where, {"alpha", "beta"});
  realize::Realization r;
  if (j.contains("alpha")) r.alpha = get_number(j.at("alpha"), where + ".alpha");
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    if (!b.is_array() || b.size() != 6) {
      throw std::invalid_argument("config: " + where + ".beta must have 6 entries");
    }
    for (int k = 0; k < 6; ++k) r.beta(k) = get_number(b.at(static_cast<size_t>(k)),
                                                       where + ".beta");
  }
  r.validate();
  return r;
}

inline sim::AttackSignalSpec parse_attack_spec(const json& j, const std::string& where) {
  reject_unknown_keys(j, where,
                      {"kind", "amplitude", "frequency_hz", "phase", "switch_probability"});
  sim::AttackSignalSpec spec;
  const std::string kind = j.value("kind", "zero");
  if (kind == "zero") {
    spec.kind = sim::AttackKind::Zero;
  } else if (kind == "constant") {
    spec.kind = sim::AttackKind::Constant;
  } else if (kind == "sine") {
    spec.kind = sim::AttackKind::Sine;
  } else if (kind == "uniform") {
    spec.kind = sim::AttackKind::Uniform;
  } else if (kind == "bangbang") {
    spec.kind = sim::AttackKind::BangBang;
  } else {
    throw std::invalid_argument("config: " + where + ".kind '" + kind + "' is not recognized");
  }
  if (j.contains("amplitude")) spec.amplitude = get_number(j.at("amplitude"), where);
  if (j.contains("frequency_hz")) spec.frequency_hz = get_number(j.at("frequency_hz"), where);
  if (j.contains("phase")) spec.phase = get_number(j.at("phase"), where);
  if (j.contains("switch_probability")) {
    spec.switch_probability = get_number(j.at("switch_probability"), where);
  }
  spec.validate();
  return spec;
}

inline ScenarioSpec parse_scenario(const json& j) {
  reject_unknown_keys(j, "scenario",
                      {"horizon", "lead_v0", "lead_knots", "realizations", "attack",
                       "attack_channels", "offsets"});
  ScenarioSpec sc;
  if (j.contains("horizon")) sc.horizon = j.at("horizon").get<int>();
  if (j.contains("lead_v0")) sc.lead_v0 = get_number(j.at("lead_v0"), "scenario.lead_v0");
  if (j.contains("lead_knots")) {
    for (const auto& k : j.at("lead_knots")) {
      if (!k.is_array() || k.size() != 2) {
        throw std::invalid_argument("config: scenario.lead_knots entries must be [t, u] pairs");
      }
      sc.lead_knots.emplace_back(get_number(k.at(0), "scenario.lead_knots"),
                                 get_number(k.at(1), "scenario.lead_knots"));
    }
  }
  if (j.contains("realizations")) {
    if (!j.at("realizations").is_array()) {
      throw std::invalid_argument("config: scenario.realizations must be an array");
    }
    for (const auto& r : j.at("realizations")) sc.realization_specs.push_back(r);
  }
  if (j.contains("attack")) {
    AttackTemplate tpl;
    tpl.spec = parse_attack_spec(j.at("attack"), "scenario.attack");
    if (j.contains("attack_channels")) {
      tpl.channels.clear();
      for (const auto& c : j.at("attack_channels")) {
        const int ch = c.get<int>();
        if (ch < 0 || ch > 5) {
          throw std::invalid_argument("config: scenario.attack_channels entries must be 0..5");
        }
        tpl.channels.push_back(ch);
      }
    }
    sc.attack = std::move(tpl);
  } else if (j.contains("attack_channels")) {
    throw std::invalid_argument("config: scenario.attack_channels requires scenario.attack");
  }
  if (j.contains("offsets")) {
    for (const auto& o : j.at("offsets")) {
      if (!o.is_array() || o.size() != 3) {
        throw std::invalid_argument("config: scenario.offsets entries must be [de, dedot, dz]");
      }
      sc.offsets.push_back(sim::InitialOffsets{get_number(o.at(0), "scenario.offsets"),
                                               get_number(o.at(1), "scenario.offsets"),
                                               get_number(o.at(2), "scenario.offsets")});
    }
  }
  return sc;
}

inline Config parse_config(const json& j) {
  reject_unknown_keys(j, "top level",
                      {"params", "bounds", "a_grid", "realizations", "compare", "scenario",
                       "output_dir", "seed"});
  Config cfg;
  if (j.contains("params")) {
    const auto& p = j.at("params");
    reject_unknown_keys(p, "params", {"h", "tau", "r", "kp", "kd", "Ts", "m"});
    if (p.contains("h")) cfg.params.h = get_number(p.at("h"), "params.h");
    if (p.contains("tau")) cfg.params.tau = get_number(p.at("tau"), "params.tau");
    if (p.contains("r")) cfg.params.r = get_number(p.at("r"), "params.r");
    if (p.contains("kp")) cfg.params.kp = get_number(p.at("kp"), "params.kp");
    if (p.contains("kd")) cfg.params.kd = get_number(p.at("kd"), "params.kd");
    if (p.contains("Ts")) cfg.params.Ts = get_number(p.at("Ts"), "params.Ts");
    if (p.contains("m")) cfg.params.m = p.at("m").get<int>();
  }
  cfg.params.validate();
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    reject_unknown_keys(b, "bounds", {"W"});
    if (b.contains("W")) {
      const auto& w = b.at("W");
      if (!w.is_array() || w.size() != 6) {
        throw std::invalid_argument("config: bounds.W must have 6 entries");
      }
      for (int k = 0; k < 6; ++k) cfg.bounds.W(k) = get_number(w.at(static_cast<size_t>(k)),
                                                               "bounds.W");
    }
    cfg.bounds.validate();
  }
  if (j.contains("a_grid")) {
    const auto& g = j.at("a_grid");
    reject_unknown_keys(g, "a_grid", {"points", "lo", "hi"});
    if (g.contains("points")) cfg.grid.points = g.at("points").get<int>();
    if (g.contains("lo")) cfg.grid.lo = get_number(g.at("lo"), "a_grid.lo");
    if (g.contains("hi")) cfg.grid.hi = get_number(g.at("hi"), "a_grid.hi");
    if (cfg.grid.points < 1) throw std::invalid_argument("config: a_grid.points must be >= 1");
    if (cfg.grid.lo.has_value() != cfg.grid.hi.has_value()) {
      throw std::invalid_argument("config: a_grid needs both lo and hi, or neither");
    }
  }
  if (j.contains("realizations")) {
    for (const auto& [name, spec] : j.at("realizations").items()) {
      if (name == "C" || name == "Chat" || name == "optimal") {
        throw std::invalid_argument("config: realization name '" + name + "' is reserved");
      }
      cfg.named.emplace(name, parse_realization(spec, "realizations." + name));
    }
  }
  if (j.contains("compare")) {
    cfg.compare.clear();
    for (const auto& name : j.at("compare")) cfg.compare.push_back(name.get<std::string>());
    if (cfg.compare.empty()) throw std::invalid_argument("config: compare must not be empty");
  }
  if (j.contains("scenario")) cfg.scenario = parse_scenario(j.at("scenario"));
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

// ---------------------------------------------------------------------------
// name resolution

/// Maps a name or an inline {alpha, beta} object to a realization. "optimal"
/// requires the synthesized result to be supplied by the caller.
inline realize::Realization resolve_realization(const json& name_or_spec, const Config& cfg,
                                                const synth::SynthesisResult* synthesized) {
  if (name_or_spec.is_object()) return parse_realization(name_or_spec, "inline realization");
  if (!name_or_spec.is_string()) {
    throw std::invalid_argument("config: realization reference must be a name or an object");
  }
  const std::string name = name_or_spec.get<std::string>();
  if (name == "C") return realize::realization_C();
  if (name == "Chat") return realize::realization_Chat(cfg.params);
  if (name == "optimal") {
    if (synthesized == nullptr || synthesized->status != sdp::SdpStatus::Optimal) {
      throw std::invalid_argument("config: 'optimal' realization is not available");
    }
    return synth::realization_from(*synthesized);
  }
  const auto it = cfg.named.find(name);
  if (it == cfg.named.end()) {
    throw std::invalid_argument("config: realization '" + name + "' is not defined");
  }
  return it->second;
}

/// Builds the runnable scenario: resolves realizations, expands the attack
/// template into per-channel specs with seeds derived from (seed, vehicle,
/// channel), and assembles the lead profile.
inline sim::PlatoonScenario resolve_scenario(const Config& cfg,
                                             const synth::SynthesisResult* synthesized) {
  if (!cfg.scenario) throw std::invalid_argument("config: scenario section is missing");
  const ScenarioSpec& spec = *cfg.scenario;
  const int followers = cfg.params.m - 1;

  sim::PlatoonScenario sc;
  sc.params = cfg.params;
  sc.bounds = cfg.bounds;
  sc.horizon = spec.horizon;
  sc.lead.v0 = spec.lead_v0;
  sc.lead.samples = sim::step_profile(spec.horizon, cfg.params.Ts, spec.lead_knots);
  sc.offsets = spec.offsets;

  if (spec.realization_specs.empty()) {
    sc.realizations.assign(static_cast<size_t>(followers), realize::realization_C());
  } else if (spec.realization_specs.size() == 1) {
    sc.realizations.assign(static_cast<size_t>(followers),
                           resolve_realization(spec.realization_specs[0], cfg, synthesized));
  } else {
    for (const auto& r : spec.realization_specs) {
      sc.realizations.push_back(resolve_realization(r, cfg, synthesized));
    }
  }

  if (spec.attack) {
    sc.attacks.assign(static_cast<size_t>(followers), {});
    for (int f = 0; f < followers; ++f) {
      for (int ch : spec.attack->channels) {
        sim::AttackSignalSpec s = spec.attack->spec;
        s.seed = sim::derive_seed(cfg.seed, static_cast<std::uint64_t>(f + 2),
                                  static_cast<std::uint64_t>(ch));
        sc.attacks[static_cast<size_t>(f)][static_cast<size_t>(ch)] = s;
      }
    }
  }
  sc.validate();
  return sc;
}

// ---------------------------------------------------------------------------
// result serialization

inline json ellipsoid_to_json(const reach::EllipsoidResult& r) {
  json j;
  j["status"] = sdp::to_string(r.status);
  if (r.status == sdp::SdpStatus::Optimal) {
    j["a"] = r.a;
    j["a_vec"] = vector_to_json(r.a_vec);
    j["trace"] = r.trace;
    j["bound_nominal"] = r.bound_nominal;
    j["bound_lyap"] = r.bound_lyap;
    j["volume_nominal"] = r.volume_nominal;
    j["volume_lyap"] = r.volume_lyap;
    j["Y"] = matrix_to_json(r.Y);
    j["P"] = matrix_to_json(r.P);
  }
  return j;
}

inline json synthesis_to_json(const synth::SynthesisResult& r) {
  json j;
  j["status"] = sdp::to_string(r.status);
  if (r.status == sdp::SdpStatus::Optimal) {
    j["beta_opt"] = vector_to_json(r.beta_opt);
    j["a_opt"] = r.a_opt;
    j["a_vec_opt"] = vector_to_json(r.a_vec_opt);
    j["trace_opt"] = r.trace_opt;
    j["Y_opt"] = matrix_to_json(r.Y_opt);
  }
  json curve = json::array();
  for (const auto& rec : r.curve) {
    json c;
    c["a"] = rec.a;
    c["status"] = sdp::to_string(rec.status);
    if (rec.status == sdp::SdpStatus::Optimal) c["trace"] = rec.trace;
    curve.push_back(std::move(c));
  }
  j["curve"] = std::move(curve);
  json comps;
  for (const auto& [name, res] : r.comparisons) comps[name] = ellipsoid_to_json(res);
  j["comparisons"] = std::move(comps);
  return j;
}

inline json metrics_to_json(const sim::Metrics& m, bool with_reference) {
  json j;
  j["max_abs_e"] = m.max_abs_e;
  j["max_abs_e_per_follower"] = m.max_abs_e_per_follower;
  j["min_distance"] = m.min_distance;
  j["collision"] = m.collision;
  j["rms_u"] = m.rms_u;
  if (with_reference) j["max_u_diff_vs_reference"] = m.max_u_diff_vs_reference;
  return j;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_trajectory_csv(std::ostream& os, const sim::Trajectory& traj) {
  os << "k,t,vehicle,d,v,a,e,u\n";
  for (int k = 0; k <= traj.horizon; ++k) {
    for (int vi = 0; vi < traj.m; ++vi) {
      const auto& s = traj.vehicles[static_cast<size_t>(vi)];
      const auto idx = static_cast<size_t>(k);
      os << k << ',' << format_double(k * traj.Ts) << ',' << (vi + 1) << ','
         << format_double(s.d[idx]) << ',' << format_double(s.v[idx]) << ','
         << format_double(s.a[idx]) << ',' << format_double(s.e[idx]) << ','
         << format_double(s.u[idx]) << '\n';
    }
  }
}

inline void write_curve_csv(std::ostream& os, const synth::SynthesisResult& r) {
  os << "a,status,trace\n";
  for (const auto& rec : r.curve) {
    os << format_double(rec.a) << ',' << sdp::to_string(rec.status) << ',';
    if (rec.status == sdp::SdpStatus::Optimal) os << format_double(rec.trace);
    os << '\n';
  }
}

/// One row per named realization: trace, both volumes, and the decay rate a*
/// the sweep selected.
inline void write_compare_csv(std::ostream& os,
                              const std::vector<std::pair<std::string, reach::EllipsoidResult>>&
                                  rows) {
  os << "name,status,trace,volume_nominal,volume_lyap,a_star\n";
  for (const auto& [name, r] : rows) {
    os << name << ',' << sdp::to_string(r.status) << ',';
    if (r.status == sdp::SdpStatus::Optimal) {
      os << format_double(r.trace) << ',' << format_double(r.volume_nominal) << ','
         << format_double(r.volume_lyap) << ',' << format_double(r.a);
    } else {
      os << ",,,";
    }
    os << '\n';
  }
}

/// Ellipsoid membership over time: the quadratic form of each follower's
/// deviation (in base-controller coordinates) relative to its certified
/// bound; values <= 1 are inside.
inline void write_membership_csv(std::ostream& os, const Eigen::MatrixXd& ratios, double Ts) {
  os << "k,t,vehicle,ratio\n";
  for (Eigen::Index k = 0; k < ratios.cols(); ++k) {
    for (Eigen::Index f = 0; f < ratios.rows(); ++f) {
      os << k << ',' << format_double(static_cast<double>(k) * Ts) << ',' << (f + 2) << ','
         << format_double(ratios(f, k)) << '\n';
    }
  }
}

/// Quadratic-form ratio series used by the membership CSV. Row f tracks
/// follower f+2; the deviation is taken from the equilibrium start and mapped
/// back through each follower's realization.
inline Eigen::MatrixXd membership_ratios(const sim::StackedSystem& st,
                                         const sim::Trajectory& traj,
                                         const std::vector<realize::Realization>& reals,
                                         const std::vector<reach::EllipsoidResult>& ells) {
  const int followers = st.m - 1;
  Eigen::MatrixXd out(followers, traj.states.cols());
  for (int f = 0; f < followers; ++f) {
    const auto& map = st.maps[static_cast<size_t>(f + 1)];
    const auto& ell = ells[static_cast<size_t>(f)];
    for (Eigen::Index k = 0; k < traj.states.cols(); ++k) {
      const Eigen::Vector4d blk = traj.states.block<4, 1>(2 + 4 * f, k);
      const Eigen::Vector4d blk0 = traj.states.block<4, 1>(2 + 4 * f, 0);
      Eigen::Vector4d xt;
      xt.head<3>() = blk.head<3>() - blk0.head<3>();
      xt(3) = ((blk(3) - blk0(3)) - map.betaC.head<3>().dot(xt.head<3>())) /
              reals[static_cast<size_t>(f)].alpha;
      out(f, k) = xt.dot(ell.P * xt) / ell.bound_lyap;
    }
  }
  return out;
}

}  // namespace platoon::io
