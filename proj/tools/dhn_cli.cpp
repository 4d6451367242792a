// Command-line front end: adaptive solves, single-pipe studies and instance
// generation.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "dhn/adaptive.hpp"
#include "dhn/errors.hpp"
#include "dhn/generator.hpp"
#include "dhn/log.hpp"
#include "dhn/reporting.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCap = 2;
constexpr int kExitSolver = 3;

struct SolveArgs {
  std::string network;
  std::string config;
  std::string output_dir;
  std::string error_mode;
  std::uint64_t seed = 0;
  bool no_timing = false;
};

int run_solve(const SolveArgs& a) {
  auto net = std::make_shared<dhn::NetworkModel>(dhn::load_network(a.network));
  dhn::AdaptiveConfig config = a.config.empty() ? dhn::AdaptiveConfig{} : dhn::load_config(a.config);
  if (!a.error_mode.empty()) config.error_mode = dhn::parse_error_mode(a.error_mode);
  dhn::ArtifactOptions opts;
  opts.timing = !a.no_timing;
  opts.seed = a.seed;

  dhn::TerminationDiagnostics d = dhn::check_termination_conditions(config, net->pipes().size());
  if (!d.discretization_ok || !d.model_ok) {
    dhn::log::info("termination conditions: discretization margin " + std::to_string(d.discretization_margin) +
                   ", model margin " + std::to_string(d.model_margin));
  }
  dhn::AdaptiveResult res;
  try {
    res = dhn::run_adaptive(net, config);
  } catch (const dhn::SolveFailed& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  dhn::write_artifacts(a.output_dir, res, config, opts);
  double avg = dhn::average_error(res.errors, config.error_mode) / dhn::kJoulePerGJ;
  std::cout << dhn::adaptive_status_name(res.status) << ": average error " << avg << " GJ/m3 after "
            << res.outer_iterations << " outer iterations, objective " << res.solve.objective << "\n";
  return res.status == dhn::AdaptiveStatus::EpsFeasible ? kExitOk : kExitCap;
}

struct StudyArgs {
  dhn::PipeStudy study;
  double e_in_gj = 0.35;
  std::string out_dir;
};

int run_pipe_study(StudyArgs a) {
  a.study.inflow_energy = a.e_in_gj * dhn::kJoulePerGJ;
  dhn::PipeStudyTables t = dhn::run_pipe_study(a.study);
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec) throw dhn::Error("cannot create output directory '" + a.out_dir + "': " + ec.message());
  dhn::write_text_file((std::filesystem::path(a.out_dir) / "profiles.csv").string(), t.profiles);
  dhn::write_text_file((std::filesystem::path(a.out_dir) / "errors.csv").string(), t.errors);
  return kExitOk;
}

struct GenerateArgs {
  std::string tmpl;
  std::uint64_t seed = 1;
  std::string out;
  int pipes = 3;
};

int run_generate(const GenerateArgs& a) {
  dhn::GeneratorOptions opts;
  opts.chain_pipes = a.pipes;
  dhn::NetworkModel net = dhn::generate_network(dhn::parse_template(a.tmpl), a.seed, opts);
  dhn::write_text_file(a.out, dhn::serialize_network(net));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive model and discretization control for district heating network optimization"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Run the adaptive loop on an instance and write artifacts");
  solve->add_option("--network", solve_args.network, "Instance file (JSON)")->required();
  solve->add_option("--config", solve_args.config, "Run configuration (JSON); defaults when omitted");
  solve->add_option("--output-dir", solve_args.output_dir, "Directory for the artifacts")->required();
  solve->add_option("--error-mode", solve_args.error_mode, "Override the error mode")
      ->check(CLI::IsMember({"estimate", "exact"}));
  solve->add_option("--seed", solve_args.seed, "Seed recorded in the summary");
  solve->add_flag("--no-timing", solve_args.no_timing, "Write 0 for wall-clock fields");

  StudyArgs study_args;
  study_args.study.pipe = dhn::reference_pipe();
  auto* study = app.add_subcommand("pipe-study", "Profiles and error measures of a single pipe");
  study->add_option("--out-dir", study_args.out_dir, "Directory for profiles.csv and errors.csv")->required();
  study->add_option("--length", study_args.study.pipe.length, "Pipe length [m]");
  study->add_option("--diameter", study_args.study.pipe.diameter, "Diameter [m]");
  study->add_option("--friction", study_args.study.pipe.friction, "Friction coefficient");
  study->add_option("--slope", study_args.study.pipe.slope, "Slope");
  study->add_option("--heat-transfer", study_args.study.pipe.heat_transfer, "Heat transfer coefficient [W/(m^2 K)]");
  study->add_option("--wall-temperature", study_args.study.pipe.wall_temperature, "Wall temperature [K]");
  study->add_option("--velocity", study_args.study.velocities, "Velocities [m/s]");
  study->add_option("--e-in", study_args.e_in_gj, "Inflow energy density [GJ/m^3]");
  study->add_option("--level", study_args.study.levels, "Model levels")->check(CLI::Range(1, 3));
  study->add_option("--intervals", study_args.study.intervals, "Grid interval counts");
  study->add_option("--profile-points", study_args.study.profile_points, "Intervals of the exact profile sampling");

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand("generate", "Write a synthetic instance");
  gen->add_option("--template", gen_args.tmpl, "chain, aroma-like or street-like")
      ->required()
      ->check(CLI::IsMember({"chain", "aroma-like", "street-like"}));
  gen->add_option("--seed", gen_args.seed, "Random seed");
  gen->add_option("--out", gen_args.out, "Output file")->required();
  gen->add_option("--pipes", gen_args.pipes, "Pipe count of the chain template");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve) return run_solve(solve_args);
    if (*study) return run_pipe_study(study_args);
    if (*gen) return run_generate(gen_args);
  } catch (const dhn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
