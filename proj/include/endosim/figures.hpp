#ifndef ENDOSIM_FIGURES_HPP
#define ENDOSIM_FIGURES_HPP

// Named experiment presets with documented defaults, shared by the CLI
// `replicate` subcommand and the acceptance suite.

#include "endosim/bangbang.hpp"

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace endosim {

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig3a", "fig3c", "fig3e", "fig3f", "fig4"};
  return ids;
}

/// Default spec for a bang-bang figure. T_R = 250 us at the default 4 kHz.
///   fig3a  pi kicks every T_R/3 from T_R/3, 1000 us
///   fig3c  pi/2 kicks at T_R/5 + m T_R, four kicks, 1050 us
///   fig3e  pi kicks every T_R/50 over the whole 500 us record
///   fig3f  pi kicks every T_R/50 on [0, 300] us, then release, 1000 us
inline ExperimentSpec figure_spec(const std::string& id) {
  ExperimentSpec s;
  const double tr = s.rabi_period_us();
  if (id == "fig3a") {
    s.total_us = 4.0 * tr;
    s.sample_us = tr / 600.0;
    s.kick_period_us = tr / 3.0;
    s.kick_first_us = tr / 3.0;
  } else if (id == "fig3c") {
    s.total_us = 4.2 * tr;
    s.sample_us = tr / 500.0;
    s.kick_phase_rad = std::numbers::pi / 2.0;
    s.kick_first_us = tr / 5.0;
    s.kick_period_us = tr;
    s.kick_count = 4;
  } else if (id == "fig3e") {
    s.total_us = 2.0 * tr;
    s.sample_us = tr / 500.0;
    s.kick_period_us = tr / 50.0;
  } else if (id == "fig3f") {
    s.total_us = 4.0 * tr;
    s.sample_us = tr / 500.0;
    s.kick_period_us = tr / 50.0;
    s.window_end_us = 1.2 * tr;
  } else {
    throw std::invalid_argument("unknown figure id '" + id + "' (expected fig3a, fig3c, fig3e, fig3f or fig4)");
  }
  return s;
}

inline ExperimentResult run_figure(const SpinModel& model, const std::string& id, const ExperimentSpec& spec) {
  if (id == "fig3a") return kicked_rabi(model, spec);
  if (id == "fig3c") return odd_even(model, spec);
  if (id == "fig3e" || id == "fig3f") return lock_release(model, spec);
  throw std::invalid_argument("unknown bang-bang figure id '" + id + "'");
}

struct PhaseTable {
  std::vector<PhaseMapPoint> points;
  std::vector<double> unwrapped;
  std::vector<double> closed_form;
  std::vector<double> projected;
  bool strictly_monotone = false;
  double max_leakage = 0.0;
};

/// Simulated symmetric-gate phase against amplitude, unwrapped from the
/// high-amplitude end where the phase tends to zero.
inline PhaseTable symmetric_phase_table(const SpinModel& model, const std::vector<double>& amplitudes, int n,
                                        const SimConfig& config = {}) {
  PhaseTable t;
  t.points = symmetric_phase_map(model, amplitudes, n, config);
  const double a = std::abs(model.encoding().kick_splitting());
  for (const auto& p : t.points) {
    t.unwrapped.push_back(p.phase_unwrapped);
    t.closed_form.push_back(symmetric_closed_form_phase(p.amplitude_MHz, a, n));
    const GateSpec g = symmetric_gate(model, p.amplitude_MHz, n, config, false);
    t.projected.push_back(g.phase_spin_projected);
    t.max_leakage = std::max(t.max_leakage, p.leakage);
  }
  bool up = true, down = true;
  for (std::size_t i = 1; i < t.unwrapped.size(); ++i) {
    up = up && t.unwrapped[i] > t.unwrapped[i - 1];
    down = down && t.unwrapped[i] < t.unwrapped[i - 1];
  }
  t.strictly_monotone = t.unwrapped.size() >= 2 && (up || down);
  return t;
}

inline std::string phase_table_csv(const PhaseTable& t) {
  std::string out = "nu1_MHz,duration_us,phase_sim_rad,phase_unwrapped_rad,phase_closed_form_rad,phase_projected_rad,leakage\n";
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    const auto& p = t.points[i];
    out += format_fixed(p.amplitude_MHz) + "," + format_fixed(p.duration_us) + "," + format_fixed(p.phase) + "," +
           format_fixed(t.unwrapped[i]) + "," + format_fixed(t.closed_form[i]) + "," + format_fixed(t.projected[i]) +
           "," + format_fixed(p.leakage) + "\n";
  }
  return out;
}

/// Gnuplot script text for a trajectory CSV; never executed here.
inline std::string trajectory_gnuplot(const std::string& csv_name, const std::string& title,
                                      const std::vector<double>& kick_times) {
  std::string out = "set datafile separator ','\nset key autotitle columnhead\n";
  out += "set title '" + title + "'\nset xlabel 'time (us)'\nset ylabel 'population'\nset yrange [0:1]\n";
  for (double t : kick_times)
    out += "set arrow from " + format_fixed(t) + ",0 to " + format_fixed(t) + ",1 nohead lc rgb 'red'\n";
  out += "plot '" + csv_name + "' using 1:3 with lines lc rgb 'black' title 'P(|01>)'\n";
  return out;
}

inline std::string phase_gnuplot(const std::string& csv_name) {
  return "set datafile separator ','\nset xlabel 'nu1 (MHz)'\nset ylabel 'relative phase (rad)'\n"
         "plot '" + csv_name + "' using 1:4 with linespoints title 'simulated (unwrapped)', \\\n"
         "     '' using 1:5 with lines title 'two-level closed form', \\\n"
         "     '' using 1:6 with lines title 'spin-projected'\n";
}

}  // namespace endosim

#endif  // ENDOSIM_FIGURES_HPP
