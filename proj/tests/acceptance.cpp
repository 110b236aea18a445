// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "endosim/figures.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace endosim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return format_fixed(v); }

const SpinModel& model() {
  static const SpinModel m;
  return m;
}

QuantumState plus_state(const SpinModel& m) {
  return QuantumState::superposition(m.dim(), m.encoding().l00(), m.encoding().l01());
}

Outcome phase_gate() {
  const double nu1 = 1.0;
  const GateSpec g = selective_gate(model(), nu1, 1);
  const double err = std::abs(wrap_phase(g.phase_simulated - std::numbers::pi));
  // AC-Stark shift of the M_S = +3/2 partner level, detuned by the hyperfine
  // splitting, accumulated over one cycle of length 1/nu1.
  const double stark = 3.0 * std::numbers::pi * nu1 / (2.0 * std::abs(model().encoding().kick_splitting()));
  return {err <= 0.05 && g.leakage_simulated < 1e-2,
          "phase=" + fmt(g.phase_simulated) + " |phase-pi|=" + fmt(err) + " leakage=" + fmt(g.leakage_simulated) +
              " partner_stark_estimate=" + fmt(stark) + " duration_us=" + fmt(g.duration_us)};
}

Outcome endor_lines() {
  PhysicalParams p;
  p.a_MHz = 15.793;
  p.nu_n_MHz = 1.092;
  const SpinModel m(p);
  const double up = m.frequency(m.level_of(1.5, 1.0), m.level_of(1.5, 0.0));
  const double down = m.frequency(m.level_of(-1.5, 1.0), m.level_of(-1.5, 0.0));
  return {std::abs(up - 22.598) < 0.05 && std::abs(down - 24.782) < 0.05,
          "ms=+3/2 " + fmt(up) + " MHz, ms=-3/2 " + fmt(down) + " MHz"};
}

Outcome reversal() {
  ExperimentSpec s = figure_spec("fig3a");
  const auto ideal = kicked_rabi(model(), s);
  s.kick_kind = KickKind::calibrated;
  const auto cal = kicked_rabi(model(), s);
  const double a = ideal.metric("reversal_score"), b = cal.metric("reversal_score");
  return {a < 1e-3 && b < 5e-2, "ideal=" + fmt(a) + " calibrated=" + fmt(b) + " kick_duration_us=" +
                                    fmt(cal.kick_gate->duration_us) + " kick_nu1_MHz=" +
                                    fmt(cal.kick_gate->amplitude_MHz)};
}

Outcome odd_even_structure() {
  const auto r = odd_even(model(), figure_spec("fig3c"));
  std::string ranges;
  for (int i = 0;; ++i) {
    const std::string key = "range_" + std::to_string(i);
    bool found = false;
    for (const auto& m : r.metrics) found = found || m.name == key;
    if (!found) break;
    ranges += (i ? "," : "") + fmt(r.metric(key));
  }
  return {r.metric("alternating") == 1.0 && r.metric("min_even_recovery") >= 0.95,
          "alternating=" + fmt(r.metric("alternating")) + " min_even_recovery=" + fmt(r.metric("min_even_recovery")) +
              " ranges=" + ranges};
}

Outcome lock_and_release() {
  const auto lock = lock_release(model(), figure_spec("fig3e"));
  const auto rel = lock_release(model(), figure_spec("fig3f"));
  const double bound = std::pow(std::sin(std::numbers::pi / 50.0), 2) + 1e-3;
  const bool pass = lock.metric("lock_max_p01") <= bound && rel.metric("lock_max_p01") <= bound &&
                    rel.metric("release_period_rel_error") < 0.02;
  return {pass, "lock_max_p01=" + fmt(lock.metric("lock_max_p01")) + " limit=" + fmt(bound) +
                    " release_period_us=" + fmt(rel.metric("release_period_us")) +
                    " rel_error=" + fmt(rel.metric("release_period_rel_error"))};
}

Outcome zeno_scaling() {
  const double tr = ExperimentSpec{}.rabi_period_us();
  const auto scan = suppression_scan(model(), 1.0 / tr, log_spaced(tr / 100.0, tr / 10.0, 7), tr);
  const double slope = scan.slope();
  return {std::abs(slope - 2.0) <= 0.05 && scan.monotone,
          "slope=" + fmt(slope) + " monotone=" + std::to_string(scan.monotone ? 1 : 0)};
}

Outcome phase_map() {
  PhysicalParams p;
  p.a_MHz = 15.8;
  const SpinModel m(p);
  std::vector<double> grid;
  for (int k = 0; k <= 38; ++k) grid.push_back(2.0 + k);
  const PhaseTable table = symmetric_phase_table(m, grid, 1);
  double worst_solve = 0.0, worst_leak = table.max_leakage;
  for (double target : {std::numbers::pi / 2.0, 1.0, 2.5}) {
    const auto g = solve_amplitude_for_phase(m, target, 1).gate;
    worst_solve = std::max(worst_solve, std::abs(wrap_phase(g.phase_simulated - target)));
    worst_leak = std::max(worst_leak, g.leakage_simulated);
  }
  const double half_a = 0.5 * std::abs(m.encoding().kick_splitting());
  const double duration_ns = 1e3 * symmetric_gate(m, half_a, 1, SimConfig{}, false).duration_us;
  const bool pass =
      table.strictly_monotone && worst_solve < 1e-3 && worst_leak < 1e-2 && std::abs(duration_ns - 89.5) < 1.0;
  return {pass, "monotone=" + std::to_string(table.strictly_monotone ? 1 : 0) + " solve_error=" + fmt(worst_solve) +
                    " max_leakage=" + fmt(worst_leak) + " duration_at_a/2_ns=" + fmt(duration_ns)};
}

Outcome geometric_phase_match() {
  double worst = 0.0;
  for (int k = 0; k <= 9; ++k) {
    const double omega = 7.0, delta = 0.1 * k * omega, nu1 = std::sqrt(omega * omega - delta * delta);
    worst = std::max(worst, std::abs(wrap_phase(aharonov_anandan_phase(nu1, delta) - geometric_phase(nu1, delta))));
  }
  return {worst < 1e-3, "max_error=" + fmt(worst)};
}

Outcome suppression() {
  const auto scan = suppression_scan(model(), 0.1, {0.25}, 50.0);
  const auto& row = scan.rows.at(0);
  return {row.suppression >= 20.0, "unkicked=" + fmt(scan.unkicked_residual) + " kicked=" + fmt(row.residual) +
                                       " suppression=" + fmt(row.suppression)};
}

PulseProgram generated_program(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, 5);
  PulseProgram p;
  p.name = "generated " + std::to_string(rng() % 1000);
  double end = 0.0;
  for (const std::string ch : {"MW", "RF", "RF2"}) {
    double t = u(rng) * 2.0;
    for (int i = count(rng); i > 0; --i) {
      Segment s{ch, t, 1e-3 + u(rng) * 5.0, ch == "MW" ? 9650.0 + 30.0 * u(rng) : 20.0 + 6.0 * u(rng),
                10.0 * u(rng), canonical_phase((u(rng) - 0.5) * 20.0)};
      p.segments.push_back(s);
      t = s.t_end() + u(rng);
      end = std::max(end, s.t_end());
    }
  }
  p.total_duration = end + u(rng);
  if (u(rng) < 0.5) p.sample_every = 0.05 + u(rng);
  for (int i = count(rng); i > 0; --i) p.kicks.push_back({u(rng) * p.total_duration, canonical_phase(7.0 * u(rng))});
  return p;
}

Outcome hygiene() {
  // Norm after every figure program and a drive-heavy program.
  double norm = 0.0;
  for (const auto& id : {"fig3a", "fig3c", "fig3f"}) {
    ExperimentSpec s = figure_spec(id);
    if (std::string(id) == "fig3a") s.kick_kind = KickKind::calibrated;
    const auto r = run_figure(model(), id, s);
    norm = std::max(norm, r.trajectory.final_state->norm_error());
  }
  const GateSpec gate = symmetric_gate(model(), 17.2, 2, SimConfig{}, false);
  PulseProgram p;
  p.total_duration = 30.0;
  p.sample_every = 0.5;
  p.segments.push_back(
      {"RF", 0.0, 30.0, model().nuclear_qubit_frequency(), 0.04 / (2.0 * model().nuclear_qubit_element()), 0.0});
  for (int k = 1; k <= 4; ++k) p.segments.push_back(gate.segment(6.0 * k));
  SimConfig a;
  a.rf_cutoff_MHz = 0.05;
  SimConfig b = a;
  b.dt_max_us /= 2.0;
  b.steps_per_cycle *= 2.0;
  const auto ta = evolve(model(), plus_state(model()), p, a);
  const auto tb = evolve(model(), plus_state(model()), p, b);
  norm = std::max(norm, ta.final_state->norm_error());
  double dt_change = 0.0;
  for (std::size_t s = 0; s < ta.size(); ++s)
    dt_change = std::max(dt_change, (ta.populations[s] - tb.populations[s]).cwiseAbs().maxCoeff());

  std::mt19937_64 rng(7);
  int round_trips = 0;
  for (int i = 0; i < 1000; ++i) {
    const PulseProgram g = generated_program(rng);
    if (parse_program(serialize(g)) == g) ++round_trips;
  }
  return {norm < 1e-9 && dt_change < 1e-4 && round_trips == 1000,
          "max_norm_error=" + format_shortest(norm) + " dt_halving_change=" + format_shortest(dt_change) +
              " round_trips=" + std::to_string(round_trips) + "/1000"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, phase_gate},     {2, endor_lines},           {3, reversal},    {4, odd_even_structure},
      {5, lock_and_release}, {6, zeno_scaling},         {7, phase_map},   {8, geometric_phase_match},
      {9, suppression},    {10, hygiene}};
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
