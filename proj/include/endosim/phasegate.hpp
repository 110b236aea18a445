#ifndef ENDOSIM_PHASEGATE_HPP
#define ENDOSIM_PHASEGATE_HPP

// Fast nuclear phase gates from closed electron cycles.
//
// A microwave pulse drives the |01>-|11> electron transition (M_I = 0
// manifold) and, detuned by the hyperfine splitting, the |00>-|10> one
// (M_I = +1). When both complete whole generalized-Rabi cycles the
// populations return and only a relative phase between |00> and |01>
// remains. The simulated 12-level phase is authoritative; the closed forms
// below are predictors kept for comparison.

#include "endosim/engine.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace endosim {

/// Wrap into (-pi, pi].
inline double wrap_phase(double phase) {
  double r = std::remainder(phase, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

/// T = n / sqrt(nu1^2 + delta^2).
inline double full_cycle_duration(double nu1_MHz, double delta_MHz, int n) {
  if (n < 1) throw std::invalid_argument("full_cycle_duration: cycle count must be >= 1");
  if (!(nu1_MHz >= 0.0)) throw std::invalid_argument("full_cycle_duration: amplitude must be >= 0");
  const double omega = std::hypot(nu1_MHz, delta_MHz);
  if (!(omega > 0.0)) throw std::invalid_argument("full_cycle_duration: generalized Rabi frequency is zero");
  return n / omega;
}

struct KickAmplitude {
  double amplitude_MHz = 0.0;
  double duration_us = 0.0;
};

/// Amplitude for which the resonant transition closes n1 cycles while the
/// partner detuned by `a` closes n2 in the same time.
inline KickAmplitude resonant_kick_amplitude(double a_MHz, int n1, int n2) {
  if (n1 < 1 || n2 <= n1) throw std::invalid_argument("resonant_kick_amplitude: need n2 > n1 >= 1");
  if (!(a_MHz > 0.0)) throw std::invalid_argument("resonant_kick_amplitude: a must be > 0");
  const double nu1 = a_MHz * n1 / std::sqrt(static_cast<double>(n2) * n2 - static_cast<double>(n1) * n1);
  return {nu1, n1 / nu1};
}

/// Effective spin-1/2 relative phase of a symmetric-detuning gate,
/// 2 n pi (1 - (a/2)/Omega).
inline double symmetric_closed_form_phase(double nu1_MHz, double a_MHz, int n) {
  const double omega = std::hypot(nu1_MHz, 0.5 * a_MHz);
  return two_pi * n * (1.0 - 0.5 * a_MHz / omega);
}

/// Closed-form geometric phase per cycle, pi (1 - delta/Omega): half the solid
/// angle of the precession cone.
inline double geometric_phase(double nu1_MHz, double delta_MHz) {
  const double omega = std::hypot(nu1_MHz, delta_MHz);
  if (!(omega > 0.0)) throw std::invalid_argument("geometric_phase: generalized Rabi frequency is zero");
  return std::numbers::pi * (1.0 - delta_MHz / omega);
}

/// Aharonov-Anandan phase of one precession cycle on the 2x2 model
/// H = (nu1 sx + delta sz)/2, found numerically as total minus dynamical
/// phase for the state starting in the lower pole. Wrapped to (-pi, pi].
inline double aharonov_anandan_phase(double nu1_MHz, double delta_MHz, int steps = 2000) {
  const double omega = std::hypot(nu1_MHz, delta_MHz);
  if (!(omega > 0.0)) throw std::invalid_argument("aharonov_anandan_phase: generalized Rabi frequency is zero");
  if (steps < 2 || steps % 2) throw std::invalid_argument("aharonov_anandan_phase: steps must be even and >= 2");
  const auto s = spin_operators(0.5);
  const Operator h = nu1_MHz * s.x + delta_MHz * s.z;
  const double period = 1.0 / omega;
  const double dt = period / steps;
  const Operator step = herm_expm(h, dt);

  Ket psi(2);
  psi << 0.0, 1.0;
  const Ket start = psi;
  // Composite Simpson over <H>(t).
  double integral = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double energy = psi.dot(h * psi).real();
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * energy;
    if (i < steps) psi = step * psi;
  }
  integral *= dt / 3.0;
  const double total = std::arg(start.dot(psi));
  const double dynamical = -two_pi * integral;
  return wrap_phase(total - dynamical);
}

enum class GateMode { resonant_selective, resonant_with_partner, symmetric_detuning };

inline const char* gate_mode_name(GateMode m) {
  switch (m) {
    case GateMode::resonant_selective: return "resonant-selective";
    case GateMode::resonant_with_partner: return "resonant-with-detuned-partner";
    case GateMode::symmetric_detuning: return "symmetric-detuning";
  }
  return "?";
}

struct GateSpec {
  GateMode mode = GateMode::symmetric_detuning;
  double amplitude_MHz = 0.0;
  double carrier_MHz = 0.0;
  double detuning_01_MHz = 0.0;  // nu(|01>-|11>) - carrier
  double detuning_00_MHz = 0.0;  // nu(|00>-|10>) - carrier
  int cycles_01 = 1;
  int cycles_00 = 1;  // meaningless for resonant-selective
  double duration_us = 0.0;
  /// Effective spin-1/2 prediction of the |01>-vs-|00> phase.
  double phase_closed_form = 0.0;
  /// Frame phase scaled by the electron projection 2S = 3.
  double phase_spin_projected = 0.0;
  double phase_simulated = std::numeric_limits<double>::quiet_NaN();
  double leakage_simulated = std::numeric_limits<double>::quiet_NaN();

  Segment segment(double t_start = 0.0, const std::string& channel = "MW") const {
    return {channel, t_start, duration_us, carrier_MHz, amplitude_MHz, 0.0};
  }
};

/// First-order frame-phase bookkeeping: each manifold's M_S = +3/2 level gains
/// (-1)^n exp(i 2 pi (3/2) delta T); `spin_twice` = 1 gives the spin-1/2 analogue.
inline double frame_phase_prediction(double delta_01, double delta_00, int n01, int n00, double duration,
                                     int spin_twice) {
  return wrap_phase(std::numbers::pi * spin_twice * (delta_01 - delta_00) * duration +
                    std::numbers::pi * (spin_twice % 2) * (n01 - n00));
}

struct GateOutcome {
  double phase = 0.0;    // |01> relative to |00>, wrapped
  double leakage = 0.0;  // population left outside {|00>, |01>}
  double population_error = 0.0;  // max |P - 1/2| over |00>, |01>
};

/// Runs the gate pulse on (|00> + |01>)/sqrt(2) through the full engine.
inline GateOutcome simulate_gate(const SpinModel& model, const GateSpec& gate, const SimConfig& config = {}) {
  PulseProgram p;
  p.name = "gate";
  p.total_duration = gate.duration_us;
  p.segments.push_back(gate.segment());
  const auto& enc = model.encoding();
  const auto traj = evolve(model, QuantumState::superposition(model.dim(), enc.l00(), enc.l01()), p, config);
  const auto& state = *traj.final_state;
  const auto pops = state.populations();
  GateOutcome out;
  out.leakage = std::max(0.0, 1.0 - pops(enc.l00()) - pops(enc.l01()));
  out.population_error = std::max(std::abs(pops(enc.l00()) - 0.5), std::abs(pops(enc.l01()) - 0.5));
  out.phase = coherence_phase(state, enc.l01(), enc.l00(), config.phase_floor);
  return out;
}

inline void attach_simulation(const SpinModel& model, GateSpec& gate, const SimConfig& config) {
  const auto outcome = simulate_gate(model, gate, config);
  gate.phase_simulated = outcome.phase;
  gate.leakage_simulated = outcome.leakage;
}

inline void fill_predictions(GateSpec& g) {
  g.phase_spin_projected =
      frame_phase_prediction(g.detuning_01_MHz, g.detuning_00_MHz, g.cycles_01, g.cycles_00, g.duration_us, 3);
}

/// Carrier half-way between the two kick transitions; both complete n cycles
/// for any amplitude.
inline GateSpec symmetric_gate(const SpinModel& model, double nu1_MHz, int n, const SimConfig& config = {},
                               bool simulate = true) {
  if (!(nu1_MHz > 0.0)) throw std::invalid_argument("symmetric_gate: amplitude must be > 0");
  const auto& enc = model.encoding();
  GateSpec g;
  g.mode = GateMode::symmetric_detuning;
  g.amplitude_MHz = nu1_MHz;
  g.carrier_MHz = 0.5 * (enc.kick_frequency_01_11 + enc.kick_frequency_00_10);
  g.detuning_01_MHz = enc.kick_frequency_01_11 - g.carrier_MHz;
  g.detuning_00_MHz = enc.kick_frequency_00_10 - g.carrier_MHz;
  g.cycles_01 = g.cycles_00 = n;
  const double half_split = 0.5 * std::abs(enc.kick_splitting());
  g.duration_us = full_cycle_duration(nu1_MHz, half_split, n);
  g.phase_closed_form = wrap_phase(symmetric_closed_form_phase(nu1_MHz, 2.0 * half_split, n));
  fill_predictions(g);
  if (simulate) attach_simulation(model, g, config);
  return g;
}

/// Carrier on |01>-|11>; amplitude chosen so the detuned partner closes n2
/// cycles while the resonant transition closes n1.
inline GateSpec resonant_partner_gate(const SpinModel& model, int n1, int n2, const SimConfig& config = {},
                                      bool simulate = true) {
  const auto& enc = model.encoding();
  const double a = std::abs(enc.kick_splitting());
  const auto k = resonant_kick_amplitude(a, n1, n2);
  GateSpec g;
  g.mode = GateMode::resonant_with_partner;
  g.amplitude_MHz = k.amplitude_MHz;
  g.carrier_MHz = enc.kick_frequency_01_11;
  g.detuning_01_MHz = 0.0;
  g.detuning_00_MHz = enc.kick_frequency_00_10 - g.carrier_MHz;
  g.cycles_01 = n1;
  g.cycles_00 = n2;
  g.duration_us = k.duration_us;
  g.phase_closed_form = frame_phase_prediction(g.detuning_01_MHz, g.detuning_00_MHz, n1, n2, g.duration_us, 1);
  fill_predictions(g);
  if (simulate) attach_simulation(model, g, config);
  return g;
}

/// Weak resonant 2 pi n cycle on |01>-|11>; ideally a pi phase per cycle.
inline GateSpec selective_gate(const SpinModel& model, double nu1_MHz, int n, const SimConfig& config = {},
                               bool simulate = true) {
  if (!(nu1_MHz > 0.0)) throw std::invalid_argument("selective_gate: amplitude must be > 0");
  const auto& enc = model.encoding();
  GateSpec g;
  g.mode = GateMode::resonant_selective;
  g.amplitude_MHz = nu1_MHz;
  g.carrier_MHz = enc.kick_frequency_01_11;
  g.detuning_01_MHz = 0.0;
  g.detuning_00_MHz = enc.kick_frequency_00_10 - g.carrier_MHz;
  g.cycles_01 = n;
  g.cycles_00 = 0;
  g.duration_us = full_cycle_duration(nu1_MHz, 0.0, n);
  g.phase_closed_form = wrap_phase(std::numbers::pi * n);
  g.phase_spin_projected = g.phase_closed_form;
  if (simulate) attach_simulation(model, g, config);
  return g;
}

struct PhaseMapPoint {
  double amplitude_MHz = 0.0;
  double duration_us = 0.0;
  double phase = 0.0;            // simulated, wrapped
  double phase_unwrapped = 0.0;  // continuous along the grid, anchored at the last point
  double leakage = 0.0;
};

/// Unwraps along index order, keeping the last element's wrapped value.
inline std::vector<double> unwrap_from_back(const std::vector<double>& wrapped) {
  std::vector<double> out(wrapped.size());
  if (wrapped.empty()) return out;
  out.back() = wrapped.back();
  for (std::size_t i = wrapped.size() - 1; i-- > 0;)
    out[i] = out[i + 1] + wrap_phase(wrapped[i] - wrapped[i + 1]);
  return out;
}

/// Simulated symmetric-gate phase over an amplitude grid (ascending).
inline std::vector<PhaseMapPoint> symmetric_phase_map(const SpinModel& model, const std::vector<double>& amplitudes,
                                                      int n, const SimConfig& config = {},
                                                      unsigned threads = default_thread_count()) {
  std::vector<PhaseMapPoint> map(amplitudes.size());
  parallel_for(
      amplitudes.size(),
      [&](std::size_t i) {
        const auto g = symmetric_gate(model, amplitudes[i], n, config);
        map[i] = {amplitudes[i], g.duration_us, g.phase_simulated, 0.0, g.leakage_simulated};
      },
      threads);
  std::vector<double> wrapped;
  for (const auto& p : map) wrapped.push_back(p.phase);
  const auto un = unwrap_from_back(wrapped);
  for (std::size_t i = 0; i < map.size(); ++i) map[i].phase_unwrapped = un[i];
  return map;
}

class PhaseUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolveOptions {
  double amplitude_min_MHz = 0.1;
  double amplitude_max_MHz = 0.0;  // zero means 10 a
  int grid_points = 400;
  double tolerance_rad = 1e-4;
  /// Prefer the solution whose duration is closest to this; otherwise the
  /// largest amplitude (shortest gate) wins.
  std::optional<double> nominal_duration_us;
};

struct SolveResult {
  GateSpec gate;
  int evaluations = 0;
};

/// Bisection on the simulated symmetric-gate phase map for a target phase
/// (taken modulo 2 pi).
inline SolveResult solve_amplitude_for_phase(const SpinModel& model, double target, int n,
                                             const SimConfig& config = {}, const SolveOptions& opt = {}) {
  const double a = std::abs(model.encoding().kick_splitting());
  const double lo = opt.amplitude_min_MHz;
  const double hi = opt.amplitude_max_MHz > 0.0 ? opt.amplitude_max_MHz : 10.0 * a;
  if (!(lo > 0.0) || !(hi > lo) || opt.grid_points < 2)
    throw std::invalid_argument("solve_amplitude_for_phase: bad amplitude range");
  std::vector<double> grid(opt.grid_points);
  for (int i = 0; i < opt.grid_points; ++i) grid[i] = lo + (hi - lo) * i / (opt.grid_points - 1);
  const auto map = symmetric_phase_map(model, grid, n, config);
  int evaluations = opt.grid_points;

  struct Bracket {
    double lo, hi;
  };
  std::vector<Bracket> brackets;
  for (std::size_t i = 0; i + 1 < map.size(); ++i) {
    const double u0 = map[i].phase_unwrapped, u1 = map[i + 1].phase_unwrapped;
    const double kmin = std::ceil((std::min(u0, u1) - target) / two_pi);
    const double kmax = std::floor((std::max(u0, u1) - target) / two_pi);
    if (kmin <= kmax) brackets.push_back({map[i].amplitude_MHz, map[i + 1].amplitude_MHz});
  }
  if (brackets.empty())
    throw PhaseUnreachable("target phase not reachable for n=" + std::to_string(n) +
                           " in the amplitude range; try a larger cycle count");

  const double half_split = 0.5 * a;
  auto duration_of = [&](double nu1) { return full_cycle_duration(nu1, half_split, n); };
  Bracket chosen = brackets.back();
  if (opt.nominal_duration_us) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : brackets) {
      const double miss = std::abs(duration_of(0.5 * (b.lo + b.hi)) - *opt.nominal_duration_us);
      if (miss < best) {
        best = miss;
        chosen = b;
      }
    }
  }

  double x0 = chosen.lo, x1 = chosen.hi;
  GateSpec best = symmetric_gate(model, x0, n, config);
  ++evaluations;
  double f0 = wrap_phase(best.phase_simulated - target);
  double best_miss = std::abs(f0);
  for (int it = 0; it < 100 && best_miss >= opt.tolerance_rad; ++it) {
    const double mid = 0.5 * (x0 + x1);
    GateSpec g = symmetric_gate(model, mid, n, config);
    ++evaluations;
    const double fm = wrap_phase(g.phase_simulated - target);
    if (std::abs(fm) < best_miss) {
      best_miss = std::abs(fm);
      best = g;
    }
    if ((fm < 0.0) == (f0 < 0.0)) {
      x0 = mid;
      f0 = fm;
    } else {
      x1 = mid;
    }
  }
  if (best_miss >= opt.tolerance_rad)
    throw PhaseUnreachable("bisection did not reach the phase tolerance");
  return {best, evaluations};
}

}  // namespace endosim

#endif  // ENDOSIM_PHASEGATE_HPP
