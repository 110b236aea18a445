#include "endosim/figures.hpp"

#include <gtest/gtest.h>

using namespace endosim;

namespace {

const SpinModel& model() {
  static const SpinModel m;
  return m;
}

double p01_at(const Trajectory& tr, double t) {
  for (std::size_t s = 0; s < tr.size(); ++s)
    if (std::abs(tr.times[s] - t) < 1e-6) return tr.p01(s);
  throw std::out_of_range("no sample");
}

}  // namespace

TEST(ExperimentSpec, DefaultsAndKeyValues) {
  ExperimentSpec s;
  EXPECT_EQ(s.rabi_period_us(), 250.0);
  const auto kv = KeyValues::parse(
      "rf_rabi_kHz=8\nkick_kind=calibrated\nkick_period_us=25\ninitial=thermal\nensemble_sigma=0.05\nseed=9\n"
      "a_MHz=15.9\nmw_cutoff_MHz=50\n");
  const auto t = spec_from(kv);
  kv.require_all_used();
  EXPECT_EQ(t.rf_rabi_kHz, 8.0);
  EXPECT_EQ(t.kick_kind, KickKind::calibrated);
  EXPECT_EQ(t.initial, InitialMode::thermal);
  EXPECT_EQ(t.seed, 9u);
  EXPECT_EQ(t.params.a_MHz, 15.9);
  EXPECT_EQ(t.sim.mw_cutoff_MHz, 50.0);
  EXPECT_EQ(t.sim.rf_cutoff_MHz, 0.02);
  EXPECT_THROW(spec_from(KeyValues::parse("rf_rabi_kHz=0\n")), std::invalid_argument);
  EXPECT_THROW(spec_from(KeyValues::parse("kick_kind=soft\n")), std::invalid_argument);
  EXPECT_THROW(spec_from(KeyValues::parse("window_start_us=10\nwindow_end_us=5\n")), std::invalid_argument);
}

TEST(Rabi, FrequencyAndExtrema) {
  ExperimentSpec s;
  s.total_us = 1000.0;
  const auto r = rabi(model(), s);
  EXPECT_LT(r.metric("frequency_rel_error"), 0.01);
  EXPECT_NEAR(p01_at(r.trajectory, 125.0), 1.0, 1e-6);
  EXPECT_NEAR(p01_at(r.trajectory, 250.0), 0.0, 1e-6);
  EXPECT_NEAR(p01_at(r.trajectory, 375.0), 1.0, 1e-6);
  EXPECT_TRUE(r.kick_times.empty());
  EXPECT_NE(r.summary().find("experiment=rabi fitted_frequency_kHz="), std::string::npos);
}

TEST(Rabi, EnsembleEnvelopeMatchesDephasedOracle) {
  ExperimentSpec s;
  s.total_us = 1000.0;
  s.sample_us = 2.0;
  s.ensemble_sigma = 0.05;
  const auto r = rabi(model(), s);
  const double nu1 = 0.004;
  double worst = 0.0;
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const double t = r.trajectory.times[i];
    const double oracle =
        0.5 * (1.0 - std::exp(-2.0 * std::pow(std::numbers::pi * nu1 * 0.05 * t, 2)) * std::cos(2.0 * std::numbers::pi * nu1 * t));
    worst = std::max(worst, std::abs(r.trajectory.p01(i) - oracle));
  }
  EXPECT_LT(worst, 0.02);
  EXPECT_LT(r.metric("frequency_rel_error"), 0.01);
}

TEST(KickedRabi, ThirdPeriodKicksCapPopulation) {
  const auto r = kicked_rabi(model(), figure_spec("fig3a"));
  EXPECT_LE(r.metric("max_p01"), 0.75 + 1e-9);
  EXPECT_NEAR(r.metric("max_p01"), 0.75, 1e-6);
  EXPECT_LT(r.metric("reversal_score"), 1e-3);
  EXPECT_EQ(r.kick_times.size(), 11u);
}

TEST(KickedRabi, SingleQuarterPeriodKickReturnsToGround) {
  ExperimentSpec s;
  s.total_us = 250.0;
  s.kick_first_us = 62.5;
  s.kick_period_us = 62.5;
  s.kick_count = 1;
  const auto r = kicked_rabi(model(), s);
  ASSERT_EQ(r.kick_times.size(), 1u);
  EXPECT_NEAR(p01_at(r.trajectory, 125.0), 0.0, 1e-9);
  EXPECT_NEAR(p01_at(r.trajectory, 62.5), 0.5, 1e-9);
}

TEST(KickedRabi, ZeroPhaseKickIsIdentity) {
  ExperimentSpec s = figure_spec("fig3a");
  s.kick_phase_rad = 0.0;
  const auto kicked = kicked_rabi(model(), s);
  s.kick_period_us = 0.0;
  const auto free = rabi(model(), s);
  ASSERT_EQ(kicked.trajectory.size(), free.trajectory.size());
  for (std::size_t i = 0; i < free.trajectory.size(); ++i)
    EXPECT_NEAR(kicked.trajectory.p01(i), free.trajectory.p01(i), 1e-12);
}

TEST(KickedRabi, CalibratedKicksMatchIdealKicks) {
  ExperimentSpec s = figure_spec("fig3a");
  const auto ideal = kicked_rabi(model(), s);
  s.kick_kind = KickKind::calibrated;
  const auto cal = kicked_rabi(model(), s);
  ASSERT_TRUE(cal.kick_gate.has_value());
  EXPECT_LT(cal.kick_gate->leakage_simulated, 1e-2);
  EXPECT_LT(cal.metric("reversal_score"), 5e-2);
  double worst = 0.0;
  for (std::size_t i = 0; i < ideal.trajectory.size(); ++i)
    worst = std::max(worst, std::abs(ideal.trajectory.p01(i) - cal.trajectory.p01(i)));
  EXPECT_LT(worst, 5e-2);
  // A calibrated kick between two samples is visible in the program.
  EXPECT_EQ(cal.program.segments.size(), 1 + cal.kick_times.size());
  EXPECT_TRUE(cal.program.kicks.empty());
}

TEST(KickedRabi, KicksOffTheSampleGridAreRejected) {
  ExperimentSpec s;
  s.kick_period_us = 250.0 / 3.0;
  s.sample_us = 0.5;
  EXPECT_THROW(kicked_rabi(model(), s), std::invalid_argument);
}

TEST(OddEven, HalfPiKicksAlternateAndRecover) {
  const auto r = odd_even(model(), figure_spec("fig3c"));
  EXPECT_EQ(r.metric("alternating"), 1.0);
  EXPECT_GE(r.metric("min_even_recovery"), 0.95);
  EXPECT_LT(r.metric("range_1"), r.metric("range_2"));
}

TEST(OddEven, PiKicksDegenerateToReversal) {
  ExperimentSpec s = figure_spec("fig3c");
  s.kick_phase_rad = std::numbers::pi;
  const auto oe = odd_even(model(), s);
  const auto kr = kicked_rabi(model(), s);
  for (std::size_t i = 0; i < oe.trajectory.size(); ++i)
    EXPECT_EQ(oe.trajectory.p01(i), kr.trajectory.p01(i));
  s.kick_phase_rad = 0.0;
  EXPECT_THROW(odd_even(model(), s), std::invalid_argument);
  s.kick_phase_rad = 4.0;
  EXPECT_THROW(odd_even(model(), s), std::invalid_argument);
}

TEST(OddEven, TwoHalfPiKicksAtOnePointEqualOnePiKick) {
  ExperimentSpec s;
  s.total_us = 500.0;
  const PulseProgram base = build_program(model(), s, "composition");
  PulseProgram twice = base, once = base;
  twice.kicks = {{50.0, std::numbers::pi / 2.0}, {50.0, std::numbers::pi / 2.0}};
  once.kicks = {{50.0, std::numbers::pi}};
  const auto a = run_program(model(), s, twice);
  const auto b = run_program(model(), s, once);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a.p01(i), b.p01(i), 1e-12);
    EXPECT_NEAR(std::abs(a.coherence01[i] - b.coherence01[i]), 0.0, 1e-12);
  }
}

TEST(LockRelease, DenseKicksBoundPopulation) {
  const auto r = lock_release(model(), figure_spec("fig3e"));
  const double bound = std::pow(std::sin(std::numbers::pi / 50.0), 2);
  EXPECT_NEAR(r.metric("lock_bound"), bound, 1e-12);
  EXPECT_LE(r.metric("lock_max_p01"), bound + 1e-3);
  EXPECT_NEAR(bound, 4.0e-3, 1e-4);
}

TEST(LockRelease, ReleaseResumesOscillation) {
  const auto r = lock_release(model(), figure_spec("fig3f"));
  EXPECT_LE(r.metric("lock_max_p01"), std::pow(std::sin(std::numbers::pi / 50.0), 2) + 1e-3);
  EXPECT_LT(r.metric("release_period_rel_error"), 0.02);
  EXPECT_LT(r.metric("release_first_max_rel_error"), 0.02);
}

TEST(LockRelease, LockHoldsAnIntermediateState) {
  ExperimentSpec s;
  s.total_us = 1000.0;
  s.window_start_us = 100.0;
  s.window_end_us = 400.0;
  s.kick_period_us = 5.0;
  const auto r = lock_release(model(), s);
  // Held near sin^2(0.4 pi) ~ 0.905 while kicked.
  EXPECT_LT(r.metric("lock_residual"), 0.05);
  EXPECT_LT(r.metric("release_period_rel_error"), 0.02);
}

TEST(Suppression, HundredKilohertzCoupling) {
  const auto scan = suppression_scan(model(), 0.1, {0.25}, 50.0);
  ASSERT_EQ(scan.rows.size(), 1u);
  EXPECT_LE(scan.rows[0].residual, std::pow(std::sin(std::numbers::pi * 0.025), 2) + 1e-6);
  EXPECT_GE(scan.rows[0].suppression, 20.0);
  EXPECT_NEAR(scan.unkicked_residual, 1.0, 1e-3);
}

TEST(Suppression, WeakCouplingAndNoKickLimit) {
  const auto weak = suppression_scan(model(), 1e-4, {1000.0, 100.0}, 5000.0);
  for (const auto& row : weak.rows) EXPECT_LT(row.residual, 0.1);
  // A period longer than the record fits no kick: full transfer.
  const auto none = suppression_scan(model(), 0.1, {100.0}, 50.0);
  EXPECT_NEAR(none.rows[0].residual, 1.0, 1e-3);
}

TEST(Suppression, ZenoScalingSlopeAndMonotonicity) {
  ExperimentSpec base;
  const double tr = base.rabi_period_us();
  const auto scan = suppression_scan(model(), 0.004, log_spaced(tr / 100.0, tr / 10.0, 7), tr);
  EXPECT_TRUE(scan.monotone);
  EXPECT_NEAR(scan.slope(), 2.0, 0.05);
  for (const auto& row : scan.rows) EXPECT_LE(row.residual, row.bound + 1e-9);
}

TEST(Drivers, RerunningEmittedProgramIsBitIdentical) {
  for (const auto& id : {"fig3a", "fig3c", "fig3f"}) {
    ExperimentSpec s = figure_spec(id);
    const auto r = run_figure(model(), id, s);
    EXPECT_EQ(run_program(model(), s, r.program), r.trajectory) << id;
    EXPECT_EQ(run_program(model(), s, parse_program(serialize(r.program))), r.trajectory) << id;
  }
  ExperimentSpec s = figure_spec("fig3a");
  s.ensemble_sigma = 0.05;
  s.ensemble_samples = 8;
  const auto r = kicked_rabi(model(), s);
  EXPECT_EQ(run_program(model(), s, r.program), r.trajectory);
}

TEST(Figures, PresetsAndPhaseTable) {
  EXPECT_THROW(figure_spec("fig9"), std::invalid_argument);
  std::vector<double> grid;
  for (double nu1 = 2.0; nu1 <= 40.0; nu1 += 2.0) grid.push_back(nu1);
  const auto t = symmetric_phase_table(model(), grid, 1);
  EXPECT_TRUE(t.strictly_monotone);
  EXPECT_LT(t.max_leakage, 1e-2);
  const auto csv = phase_table_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "nu1_MHz,duration_us,phase_sim_rad,phase_unwrapped_rad,phase_closed_form_rad,phase_projected_rad,leakage");
}
