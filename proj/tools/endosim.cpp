// endosim: command-line front end.
//
// Exit codes:
//   0  success
//   2  bad input or usage
//   3  simulation or calibration failure
//   4  sweep stopped before completion

#include "endosim/figures.hpp"
#include "endosim/sweep.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace endosim;

constexpr int exit_input = 2;
constexpr int exit_simulation = 3;
constexpr int exit_incomplete = 4;

struct Options {
  std::string preset;
  std::string program;
  std::string spec;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string figure;
  std::size_t max_rows = std::numeric_limits<std::size_t>::max();
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Merges input sources; later ones win.
KeyValues gather(const Options& o) {
  KeyValues kv;
  auto merge = [&](const std::string& path) {
    if (path.empty()) return;
    const KeyValues file = KeyValues::load(path);
    for (const auto& [k, v] : file.entries()) kv.set(k, v);
  };
  merge(o.preset);
  merge(o.spec);
  for (const auto& s : o.overrides) kv.apply_override(s);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  return kv;
}

PulseProgram load_program(const std::string& path) {
  try {
    return parse_program(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_file_atomic(out, text);
}

void print_warnings(const Trajectory& tr) {
  for (const auto& w : tr.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_run(const Options& o) {
  if (o.program.empty()) throw CLI::RequiredError("--program");
  const PulseProgram program = load_program(o.program);
  const KeyValues kv = gather(o);
  const ExperimentSpec spec = spec_from(kv);
  kv.require_all_used();
  const SpinModel model(spec.params);
  const Trajectory tr = run_program(model, spec, program);
  print_warnings(tr);
  emit(o.out, trajectory_csv(tr));
  return 0;
}

int cmd_replicate(const Options& o) {
  const std::string out = o.out.empty() ? o.figure + ".csv" : o.out;
  const std::string csv_name = std::filesystem::path(out).filename().string();
  KeyValues kv = gather(o);
  if (o.figure == "fig4") {
    const SpinModel model(params_from(kv));
    const SimConfig config = sim_config_from(kv);
    const double lo = kv.get_double("nu1_min_MHz", 2.0), hi = kv.get_double("nu1_max_MHz", 40.0);
    const int points = kv.get_int("points", 39), cycles = kv.get_int("cycles", 1);
    const double target = kv.get_double("target_phase_rad", std::numbers::pi / 2.0);
    kv.require_all_used();
    if (points < 2 || !(hi > lo) || !(lo > 0.0)) throw std::invalid_argument("fig4: bad amplitude grid");
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(lo + (hi - lo) * i / (points - 1));
    const PhaseTable table = symmetric_phase_table(model, grid, cycles, config);
    const auto solved = solve_amplitude_for_phase(model, target, cycles, config).gate;
    write_file_atomic(out, phase_table_csv(table));
    write_file_atomic(out + ".gp", phase_gnuplot(csv_name));
    std::printf("experiment=fig4 monotone=%d max_leakage=%s solved_nu1_MHz=%s solved_phase_rad=%s "
                "solved_duration_us=%s duration_at_half_a_us=%s\n",
                table.strictly_monotone ? 1 : 0, format_fixed(table.max_leakage).c_str(),
                format_fixed(solved.amplitude_MHz).c_str(), format_fixed(solved.phase_simulated).c_str(),
                format_fixed(solved.duration_us).c_str(),
                format_fixed(symmetric_gate(model, 0.5 * std::abs(model.encoding().kick_splitting()), 1, config, false)
                                 .duration_us)
                    .c_str());
    return 0;
  }
  const ExperimentSpec spec = spec_from(kv, figure_spec(o.figure));
  kv.require_all_used();
  const SpinModel model(spec.params);
  const ExperimentResult r = run_figure(model, o.figure, spec);
  print_warnings(r.trajectory);
  write_file_atomic(out, trajectory_csv(r.trajectory));
  write_file_atomic(out + ".gp", trajectory_gnuplot(csv_name, o.figure, r.kick_times));
  std::printf("%s\n", r.summary().c_str());
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.spec.empty()) throw CLI::RequiredError("--spec");
  if (o.out.empty()) throw CLI::RequiredError("--out");
  KeyValues kv;
  const KeyValues spec_file = KeyValues::load(o.spec);
  for (const auto& [k, v] : spec_file.entries()) kv.set(k, v);
  if (!o.preset.empty()) {
    const KeyValues preset_file = KeyValues::load(o.preset);
    for (const auto& [k, v] : preset_file.entries())
      if (!kv.has(k)) kv.set(k, v);
  }
  for (const auto& s : o.overrides) kv.apply_override(s);
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  const SweepPlan plan = plan_sweep(kv, std::filesystem::path(o.spec).parent_path());
  const SweepStatus st = run_sweep(plan, o.out, o.max_rows);
  std::printf("sweep rows=%zu completed=%zu finished=%d\n", st.total, st.completed, st.finished ? 1 : 0);
  return st.finished ? 0 : exit_incomplete;
}

int cmd_calibrate(const Options& o) {
  KeyValues kv = gather(o);
  const SpinModel model(params_from(kv));
  const SimConfig config = sim_config_from(kv);
  const std::string mode = kv.get_string("mode", "symmetric");
  const int cycles = kv.get_int("cycles", 1);
  GateSpec g;
  int evaluations = 0;
  if (mode == "symmetric") {
    if (kv.has("nu1_MHz")) {
      g = symmetric_gate(model, kv.get_double("nu1_MHz", 0.0), cycles, config);
    } else {
      SolveOptions opt;
      if (kv.has("nominal_duration_us")) opt.nominal_duration_us = kv.get_double("nominal_duration_us", 0.0);
      const auto r = solve_amplitude_for_phase(model, kv.get_double("target_phase_rad", std::numbers::pi), cycles,
                                               config, opt);
      g = r.gate;
      evaluations = r.evaluations;
    }
  } else if (mode == "partner") {
    g = resonant_partner_gate(model, cycles, kv.get_int("cycles_partner", 2), config);
  } else if (mode == "selective") {
    g = selective_gate(model, kv.get_double("nu1_MHz", 1.0), cycles, config);
  } else {
    throw std::invalid_argument("calibrate: mode must be symmetric, partner or selective");
  }
  kv.require_all_used();
  std::printf("mode=%s\namplitude_MHz=%s\ncarrier_MHz=%s\ndetuning_01_MHz=%s\ndetuning_00_MHz=%s\n"
              "cycles_01=%d\ncycles_00=%d\nduration_us=%s\nphase_closed_form_rad=%s\nphase_projected_rad=%s\n"
              "phase_simulated_rad=%s\nleakage=%s\n",
              gate_mode_name(g.mode), format_fixed(g.amplitude_MHz).c_str(), format_fixed(g.carrier_MHz).c_str(),
              format_fixed(g.detuning_01_MHz).c_str(), format_fixed(g.detuning_00_MHz).c_str(), g.cycles_01,
              g.cycles_00, format_fixed(g.duration_us).c_str(), format_fixed(g.phase_closed_form).c_str(),
              format_fixed(g.phase_spin_projected).c_str(), format_fixed(g.phase_simulated).c_str(),
              format_fixed(g.leakage_simulated).c_str());
  if (evaluations) std::printf("evaluations=%d\n", evaluations);
  PulseProgram snippet;
  snippet.name = std::string(gate_mode_name(g.mode)) + " kick";
  snippet.total_duration = g.duration_us;
  snippet.segments.push_back(g.segment());
  if (!o.out.empty()) write_file_atomic(o.out, serialize(snippet));
  return 0;
}

int cmd_validate(const Options& o) {
  if (o.program.empty() && o.preset.empty() && o.spec.empty())
    throw CLI::ValidationError("validate", "give at least one of --program, --preset, --spec");
  if (!o.program.empty()) {
    const auto p = load_program(o.program);
    std::printf("%s: ok (%zu segments, %zu kicks, total %s us)\n", o.program.c_str(), p.segments.size(),
                p.kicks.size(), format_shortest(p.total_duration).c_str());
  }
  if (!o.preset.empty()) {
    const auto kv = KeyValues::load(o.preset);
    params_from(kv);
    sim_config_from(kv);
    std::printf("%s: ok\n", o.preset.c_str());
  }
  if (!o.spec.empty()) {
    const auto kv = KeyValues::load(o.spec);
    if (kv.has("target"))
      plan_sweep(kv, std::filesystem::path(o.spec).parent_path());
    else
      spec_from(kv);
    std::printf("%s: ok\n", o.spec.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse-level simulator of an S=3/2, I=1 electron-nuclear spin register"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--preset", o.preset, "key=value file with physical parameters")->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "override key=value (repeatable)");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; },
                                            "ensemble seed");
    sub->add_option("--out", o.out, "output path");
  };

  auto* run = app.add_subcommand("run", "simulate a pulse program and write a trajectory CSV");
  common(run);
  run->add_option("--program", o.program, "pulse program (.pp)")->required()->check(CLI::ExistingFile);
  run->add_option("--spec", o.spec, "extra key=value settings")->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("replicate", "run a named figure experiment");
  common(rep);
  rep->add_option("figure", o.figure, "fig3a | fig3c | fig3e | fig3f | fig4")
      ->required()
      ->check(CLI::IsMember(figure_ids()));
  rep->add_option("--spec", o.spec, "key=value overrides of the figure defaults")->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "grid sweep, resumable");
  common(sweep);
  sweep->add_option("--spec", o.spec, "sweep spec")->required()->check(CLI::ExistingFile);
  sweep->add_option("--max-rows", o.max_rows)->group("");  // stops early, for resume testing

  auto* cal = app.add_subcommand("calibrate", "design a phase gate; --out writes a .pp snippet");
  common(cal);
  cal->add_option("--spec", o.spec, "key=value gate request")->check(CLI::ExistingFile);

  auto* val = app.add_subcommand("validate", "parse inputs without simulating");
  val->add_option("--program", o.program)->check(CLI::ExistingFile);
  val->add_option("--preset", o.preset)->check(CLI::ExistingFile);
  val->add_option("--spec", o.spec)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_input;
  }

  try {
    if (*run) return cmd_run(o);
    if (*rep) return cmd_replicate(o);
    if (*sweep) return cmd_sweep(o);
    if (*cal) return cmd_calibrate(o);
    return cmd_validate(o);
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return exit_simulation;
  } catch (const UndefinedPhase& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return exit_simulation;
  } catch (const PhaseUnreachable& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return exit_simulation;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input;
  }
}
