// platoonctl: batch front end over the toolkit. Three subcommands:
//   synth     joint realization synthesis, writes synthesis.json + curve.csv
//   compare   fixed-realization evaluation table, writes compare.csv
//   simulate  scenario run, writes trajectory.csv + metrics.json + membership.csv
// Exit codes: 0 success, 1 usage/config error, 2 infeasible or unsound result.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "platoon/io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace platoon;
using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return json::parse(buf.str());  // parse_error carries line/column
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write output file '" + path.string() + "'");
  out << content;
}

std::vector<double> synthesis_grid(const io::Config& cfg) {
  const auto dec = realize::decoupled_system(cfg.params, realize::realization_C());
  return io::make_grid(cfg.grid, lti::make_zoh(dec.Ai, cfg.params.Ts).Ad);
}

int run_synth(const io::Config& cfg, const fs::path& outdir) {
  const auto grid = synthesis_grid(cfg);
  const auto res = synth::optimize_realization(cfg.params, cfg.bounds, grid);

  write_text(outdir / "synthesis.json", io::canonical_dump(io::synthesis_to_json(res)));
  std::ostringstream curve;
  io::write_curve_csv(curve, res);
  write_text(outdir / "curve.csv", curve.str());

  if (res.status != sdp::SdpStatus::Optimal) {
    std::cerr << "synthesis failed: " << sdp::to_string(res.status) << " on all " << grid.size()
              << " grid points\n";
    return 2;
  }
  std::cout << "trace_opt = " << io::format_double(res.trace_opt)
            << " at a = " << io::format_double(res.a_opt) << "\n"
            << "wrote " << (outdir / "synthesis.json").string() << " and "
            << (outdir / "curve.csv").string() << "\n";
  return 0;
}

int run_compare(const io::Config& cfg, const fs::path& outdir) {
  const auto grid = synthesis_grid(cfg);

  synth::SynthesisResult sres;
  const synth::SynthesisResult* sptr = nullptr;
  for (const auto& name : cfg.compare) {
    if (name == "optimal") {
      sres = synth::optimize_realization(cfg.params, cfg.bounds, grid);
      if (sres.status != sdp::SdpStatus::Optimal) {
        std::cerr << "cannot evaluate 'optimal': synthesis " << sdp::to_string(sres.status)
                  << "\n";
        return 2;
      }
      sptr = &sres;
      break;
    }
  }

  std::vector<std::pair<std::string, reach::EllipsoidResult>> rows;
  bool all_ok = true;
  for (const auto& name : cfg.compare) {
    const auto real = io::resolve_realization(json(name), cfg, sptr);
    const auto res = synth::evaluate_realization(real, cfg.params, cfg.bounds, grid);
    all_ok = all_ok && res.status == sdp::SdpStatus::Optimal;
    rows.emplace_back(name, res);
  }

  std::ostringstream table;
  io::write_compare_csv(table, rows);
  write_text(outdir / "compare.csv", table.str());

  std::printf("%-16s %-16s %14s %14s %14s %10s\n", "name", "status", "trace", "vol_nominal",
              "vol_lyap", "a*");
  for (const auto& [name, r] : rows) {
    if (r.status == sdp::SdpStatus::Optimal) {
      std::printf("%-16s %-16s %14s %14s %14s %10s\n", name.c_str(),
                  sdp::to_string(r.status), io::format_double(r.trace).c_str(),
                  io::format_double(r.volume_nominal).c_str(),
                  io::format_double(r.volume_lyap).c_str(), io::format_double(r.a).c_str());
    } else {
      std::printf("%-16s %-16s %14s %14s %14s %10s\n", name.c_str(),
                  sdp::to_string(r.status), "-", "-", "-", "-");
    }
  }
  std::cout << "wrote " << (outdir / "compare.csv").string() << "\n";
  return all_ok ? 0 : 2;
}

int run_simulate(const io::Config& cfg, const fs::path& outdir) {
  if (!cfg.scenario) throw std::invalid_argument("config: scenario section is missing");

  synth::SynthesisResult sres;
  const synth::SynthesisResult* sptr = nullptr;
  for (const auto& spec : cfg.scenario->realization_specs) {
    if (spec.is_string() && spec.get<std::string>() == "optimal") {
      sres = synth::optimize_realization(cfg.params, cfg.bounds, synthesis_grid(cfg));
      if (sres.status != sdp::SdpStatus::Optimal) {
        std::cerr << "cannot simulate 'optimal': synthesis " << sdp::to_string(sres.status)
                  << "\n";
        return 2;
      }
      sptr = &sres;
      break;
    }
  }

  const auto scenario = io::resolve_scenario(cfg, sptr);
  const auto st = sim::build_stacked_system(scenario);
  if (!st.stable) std::cerr << "warning: follower error dynamics are not strictly stable\n";
  const auto traj = sim::simulate_sampled(st, scenario.lead, sim::sample_scenario_attacks(scenario),
                                          scenario.offsets, scenario.horizon);

  std::ostringstream tcsv;
  io::write_trajectory_csv(tcsv, traj);
  write_text(outdir / "trajectory.csv", tcsv.str());

  const auto grid = synthesis_grid(cfg);
  std::vector<reach::EllipsoidResult> ells;
  bool ell_ok = true;
  for (const auto& real : scenario.realizations) {
    const auto dec = realize::decoupled_system(cfg.params, real);
    ells.push_back(reach::solve_fixed_realization(dec, cfg.bounds, cfg.params.Ts, grid));
    ell_ok = ell_ok && ells.back().status == sdp::SdpStatus::Optimal;
  }

  const auto metrics = sim::compute_metrics(traj);
  json mj = io::metrics_to_json(metrics, false);
  if (ell_ok) {
    const auto ratios = io::membership_ratios(st, traj, scenario.realizations, ells);
    std::ostringstream mcsv;
    io::write_membership_csv(mcsv, ratios, cfg.params.Ts);
    write_text(outdir / "membership.csv", mcsv.str());
    json peaks = json::array();
    for (Eigen::Index f = 0; f < ratios.rows(); ++f) peaks.push_back(ratios.row(f).maxCoeff());
    mj["membership_max_ratio"] = std::move(peaks);
  }
  write_text(outdir / "metrics.json", io::canonical_dump(mj));

  std::cout << "max|e| = " << io::format_double(metrics.max_abs_e)
            << ", min d = " << io::format_double(metrics.min_distance)
            << ", collision = " << (metrics.collision ? "yes" : "no") << "\n"
            << "wrote " << (outdir / "trajectory.csv").string() << " and "
            << (outdir / "metrics.json").string() << "\n";
  if (!ell_ok) {
    std::cerr << "membership series unavailable: ellipsoid certification failed\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attack-robust platoon controller synthesis, analysis, and simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir_flag;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--output-dir", outdir_flag,
                    "output directory (overrides PLATOONCTL_OUTPUT_DIR and the config)");
    sub->add_option_function<std::uint64_t>(
           "--seed",
           [&](std::uint64_t v) {
             seed_flag = v;
             seed_given = true;
           },
           "global seed override");
  };
  CLI::App* synth_cmd = app.add_subcommand("synth", "synthesize the minimum-trace realization");
  CLI::App* compare_cmd = app.add_subcommand("compare", "evaluate named realizations");
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "run the configured scenario");
  add_common(synth_cmd);
  add_common(compare_cmd);
  add_common(simulate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    io::Config cfg = io::parse_config(load_json(config_path));
    if (seed_given) cfg.seed = seed_flag;

    fs::path outdir = cfg.output_dir;
    if (const char* env = std::getenv("PLATOONCTL_OUTPUT_DIR"); env != nullptr && *env != '\0') {
      outdir = env;
    }
    if (!outdir_flag.empty()) outdir = outdir_flag;
    fs::create_directories(outdir);

    if (app.got_subcommand(synth_cmd)) return run_synth(cfg, outdir);
    if (app.got_subcommand(compare_cmd)) return run_compare(cfg, outdir);
    return run_simulate(cfg, outdir);
  } catch (const json::parse_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
