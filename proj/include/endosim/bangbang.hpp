#ifndef ENDOSIM_BANGBANG_HPP
#define ENDOSIM_BANGBANG_HPP

// Experiment drivers for bang-bang decoupling of the nuclear qubit: an RF
// field drives |00> <-> |01> Rabi oscillations while fast phase kicks on |01>
// reshape that evolution.
//
// Every driver builds a PulseProgram and hands it to the engine; the program
// is returned with the trajectory so a run can be replayed exactly.

#include "endosim/analysis.hpp"
#include "endosim/phasegate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace endosim {

enum class KickKind { ideal, calibrated };

struct ExperimentSpec {
  PhysicalParams params = PhysicalParams::reference();
  SimConfig sim = default_sim();
  InitialMode initial = InitialMode::pure;

  /// Two-level Rabi frequency of |00> <-> |01> under the RF drive.
  double rf_rabi_kHz = 4.0;
  double total_us = 1000.0;
  double sample_us = 0.5;

  KickKind kick_kind = KickKind::ideal;
  double kick_phase_rad = std::numbers::pi;
  double kick_period_us = 0.0;  // zero: no kicks
  double kick_first_us = std::numeric_limits<double>::quiet_NaN();  // NaN: window start + period
  int kick_count = -1;  // negative: as many as fit the window
  double window_start_us = 0.0;
  double window_end_us = std::numeric_limits<double>::infinity();

  /// Calibrated kicks: target duration and electron cycle count.
  double kick_duration_us = 0.12;
  int kick_cycles = 2;

  double ensemble_sigma = 0.0;
  int ensemble_samples = 64;
  std::uint64_t seed = 1;

  double rabi_period_us() const { return 1000.0 / rf_rabi_kHz; }

  /// The RF channel is narrowed to 20 kHz so it addresses |00>-|01> and not
  /// the M_I = 0 <-> -1 line, which sits ~39 kHz away at second order.
  static SimConfig default_sim() {
    SimConfig c;
    c.rf_cutoff_MHz = 0.02;
    return c;
  }

  void validate() const {
    if (!(rf_rabi_kHz > 0.0)) throw std::invalid_argument("experiment: rf_rabi_kHz must be > 0");
    if (!(total_us > 0.0) || !std::isfinite(total_us)) throw std::invalid_argument("experiment: total_us must be > 0");
    if (!(sample_us > 0.0)) throw std::invalid_argument("experiment: sample_us must be > 0");
    if (kick_period_us < 0.0) throw std::invalid_argument("experiment: kick_period_us must be >= 0");
    if (!(kick_duration_us > 0.0)) throw std::invalid_argument("experiment: kick_duration_us must be > 0");
    if (kick_cycles < 1) throw std::invalid_argument("experiment: kick_cycles must be >= 1");
    if (window_start_us < 0.0 || !(window_end_us >= window_start_us))
      throw std::invalid_argument("experiment: bad kick window");
    sim.validate();
    params.validate();
  }
};

inline const char* kick_kind_name(KickKind k) { return k == KickKind::ideal ? "ideal" : "calibrated"; }

/// Reads experiment, preset and SimConfig keys from one file.
inline ExperimentSpec spec_from(const KeyValues& kv, ExperimentSpec base = {}) {
  base.params = params_from(kv, base.params);
  base.sim = sim_config_from(kv, base.sim);
  const std::string initial = kv.get_string("initial", base.initial == InitialMode::pure ? "pure" : "thermal");
  if (initial == "pure")
    base.initial = InitialMode::pure;
  else if (initial == "thermal")
    base.initial = InitialMode::thermal;
  else
    throw std::invalid_argument("initial must be pure or thermal");
  base.rf_rabi_kHz = kv.get_double("rf_rabi_kHz", base.rf_rabi_kHz);
  base.total_us = kv.get_double("total_us", base.total_us);
  base.sample_us = kv.get_double("sample_us", base.sample_us);
  const std::string kind = kv.get_string("kick_kind", kick_kind_name(base.kick_kind));
  if (kind == "ideal")
    base.kick_kind = KickKind::ideal;
  else if (kind == "calibrated")
    base.kick_kind = KickKind::calibrated;
  else
    throw std::invalid_argument("kick_kind must be ideal or calibrated");
  base.kick_phase_rad = kv.get_double("kick_phase_rad", base.kick_phase_rad);
  base.kick_period_us = kv.get_double("kick_period_us", base.kick_period_us);
  base.kick_first_us = kv.get_double("kick_first_us", base.kick_first_us);
  base.kick_count = kv.get_int("kick_count", base.kick_count);
  base.window_start_us = kv.get_double("window_start_us", base.window_start_us);
  base.window_end_us = kv.get_double("window_end_us", base.window_end_us);
  base.kick_duration_us = kv.get_double("kick_duration_us", base.kick_duration_us);
  base.kick_cycles = kv.get_int("kick_cycles", base.kick_cycles);
  base.ensemble_sigma = kv.get_double("ensemble_sigma", base.ensemble_sigma);
  base.ensemble_samples = kv.get_int("ensemble_samples", base.ensemble_samples);
  base.seed = static_cast<std::uint64_t>(kv.get_double("seed", static_cast<double>(base.seed)));
  base.validate();
  return base;
}

/// A symmetric-detuning gate with the requested phase, choosing the solution
/// whose duration is nearest the nominal one. Results are memoized.
inline GateSpec calibrated_kick(const SpinModel& model, double phase, int cycles, double nominal_duration_us,
                                const SimConfig& config) {
  static std::mutex mutex;
  static std::map<std::string, GateSpec> cache;
  const std::string key = std::to_string(model.params().hash()) + "/" + format_shortest(phase) + "/" +
                          std::to_string(cycles) + "/" + format_shortest(nominal_duration_us) + "/" +
                          format_shortest(config.steps_per_cycle) + "/" + format_shortest(config.dt_max_us) + "/" +
                          format_shortest(config.mw_cutoff_MHz);
  {
    std::lock_guard lock(mutex);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
  }
  SolveOptions opt;
  opt.nominal_duration_us = nominal_duration_us;
  opt.grid_points = 240;
  GateSpec gate = solve_amplitude_for_phase(model, phase, cycles, config, opt).gate;
  std::lock_guard lock(mutex);
  cache.emplace(key, gate);
  return gate;
}

struct Metric {
  std::string name;
  double value = 0.0;
};

struct ExperimentResult {
  std::string experiment;
  PulseProgram program;
  Trajectory trajectory;
  std::vector<Metric> metrics;
  std::vector<double> kick_times;
  /// Calibrated kick pulse, when one was used.
  std::optional<GateSpec> kick_gate;

  double metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m.value;
    throw std::out_of_range("no metric named " + name);
  }
  void add(std::string name, double value) { metrics.push_back({std::move(name), value}); }

  /// One line: experiment=<id> key=value ...
  std::string summary() const {
    std::string out = "experiment=" + experiment;
    for (const auto& m : metrics) out += " " + m.name + "=" + format_fixed(m.value);
    return out;
  }
};

namespace detail {

inline bool on_grid(double t, double step) {
  const double k = std::round(t / step);
  return std::abs(k * step - t) <= 1e-9 * std::max(1.0, std::abs(t));
}

inline std::vector<double> kick_schedule(const ExperimentSpec& spec) {
  std::vector<double> times;
  if (spec.kick_period_us <= 0.0 || spec.kick_count == 0) return times;
  const double first = std::isnan(spec.kick_first_us) ? spec.window_start_us + spec.kick_period_us : spec.kick_first_us;
  const double last = std::min(spec.window_end_us, spec.total_us);
  for (long long m = 0;; ++m) {
    const double t = first + static_cast<double>(m) * spec.kick_period_us;
    if (t > last + time_epsilon_us || t >= spec.total_us - time_epsilon_us) break;
    if (spec.kick_count >= 0 && static_cast<int>(times.size()) >= spec.kick_count) break;
    if (t >= spec.window_start_us - time_epsilon_us) times.push_back(t);
  }
  return times;
}

}  // namespace detail

/// Program for `spec`: one resonant RF segment on |00>-|01> plus the kicks.
inline PulseProgram build_program(const SpinModel& model, const ExperimentSpec& spec, const std::string& name,
                                  std::vector<double>* kick_times_out = nullptr,
                                  std::optional<GateSpec>* gate_out = nullptr) {
  spec.validate();
  PulseProgram p;
  p.name = name;
  p.total_duration = spec.total_us;
  p.sample_every = spec.sample_us;
  const double rabi_MHz = spec.rf_rabi_kHz * 1e-3;
  p.segments.push_back({"RF", 0.0, spec.total_us, model.nuclear_qubit_frequency(),
                        rabi_MHz / (2.0 * model.nuclear_qubit_element()), 0.0});

  const auto times = detail::kick_schedule(spec);
  for (double t : times)
    if (!detail::on_grid(t, spec.sample_us))
      throw std::invalid_argument("experiment: kick at " + format_shortest(t) + " us is not on the sample grid");

  if (spec.kick_kind == KickKind::ideal) {
    for (double t : times) p.kicks.push_back({t, canonical_phase(spec.kick_phase_rad)});
  } else if (!times.empty()) {
    const GateSpec gate =
        calibrated_kick(model, spec.kick_phase_rad, spec.kick_cycles, spec.kick_duration_us, spec.sim);
    if (spec.kick_period_us <= gate.duration_us)
      throw std::invalid_argument("experiment: kick period shorter than the calibrated kick");
    for (double t : times) {
      const double start = t - 0.5 * gate.duration_us;
      if (start < 0.0 || start + gate.duration_us > spec.total_us)
        throw std::invalid_argument("experiment: calibrated kick at " + format_shortest(t) + " us leaves the record");
      p.segments.push_back(gate.segment(start));
    }
    if (gate_out) *gate_out = gate;
  }
  if (kick_times_out) *kick_times_out = times;
  validate_program(p);
  return p;
}

/// Runs a program with the drivers' initial state and ensemble settings.
inline Trajectory run_program(const SpinModel& model, const ExperimentSpec& spec, const PulseProgram& program) {
  const QuantumState initial = prepare_initial(model, spec.initial, spec.sim);
  if (spec.ensemble_sigma > 0.0) {
    EnsembleSpec ens{spec.ensemble_sigma, spec.ensemble_samples, spec.seed, "RF"};
    return ensemble_average(model, initial, program, spec.sim, ens);
  }
  return evolve(model, initial, program, spec.sim);
}

inline ExperimentResult run_experiment(const SpinModel& model, const ExperimentSpec& spec, const std::string& name) {
  ExperimentResult r;
  r.experiment = name;
  r.program = build_program(model, spec, name, &r.kick_times, &r.kick_gate);
  r.trajectory = run_program(model, spec, r.program);
  return r;
}

namespace detail {

/// Samples within [a, b] of P(|01>).
inline std::pair<double, double> p01_range(const Trajectory& tr, double a, double b) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t s = 0; s < tr.size(); ++s)
    if (tr.times[s] >= a - time_epsilon_us && tr.times[s] <= b + time_epsilon_us) {
      lo = std::min(lo, tr.p01(s));
      hi = std::max(hi, tr.p01(s));
    }
  return {lo, hi};
}

inline double max_p01(const Trajectory& tr) {
  double m = 0.0;
  for (std::size_t s = 0; s < tr.size(); ++s) m = std::max(m, tr.p01(s));
  return m;
}

/// Half the kick duration rounded up to the sample grid (zero for ideal kicks).
inline double kick_guard(const ExperimentResult& r, double sample_us) {
  if (!r.kick_gate) return 0.0;
  return std::ceil(0.5 * r.kick_gate->duration_us / sample_us - 1e-9) * sample_us;
}

inline std::size_t sample_index(const Trajectory& tr, double t) {
  const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t - 1e-9);
  if (it == tr.times.end() || std::abs(*it - t) > 1e-6) throw std::out_of_range("no sample at t");
  return static_cast<std::size_t>(it - tr.times.begin());
}

}  // namespace detail

/// Unkicked nuclear Rabi oscillation.
inline ExperimentResult rabi(const SpinModel& model, ExperimentSpec spec) {
  spec.kick_period_us = 0.0;
  auto r = run_experiment(model, spec, "rabi");
  const auto& tr = r.trajectory;
  const auto p01 = tr.qubit_series(1);
  const double f = analysis::fit_frequency(tr.times, p01, spec.rf_rabi_kHz * 1e-3) * 1e3;
  r.add("fitted_frequency_kHz", f);
  r.add("frequency_rel_error", std::abs(f - spec.rf_rabi_kHz) / spec.rf_rabi_kHz);
  r.add("max_p01", detail::max_p01(tr));
  return r;
}

/// Largest |P(t_k + tau) - P(t_k - tau)| over kicks and admissible tau.
inline double reversal_score(const ExperimentResult& r, double sample_us) {
  const auto& tr = r.trajectory;
  const auto& kicks = r.kick_times;
  const double guard = detail::kick_guard(r, sample_us);
  double score = 0.0;
  for (std::size_t k = 0; k < kicks.size(); ++k) {
    const double left = k == 0 ? kicks[k] : kicks[k] - kicks[k - 1];
    const double right = (k + 1 < kicks.size() ? kicks[k + 1] : tr.times.back()) - kicks[k];
    const double reach = std::min(left, right) - (k + 1 < kicks.size() || k > 0 ? guard : 0.0);
    const std::size_t centre = detail::sample_index(tr, kicks[k]);
    for (std::size_t m = 0;; ++m) {
      const double tau = static_cast<double>(m) * sample_us;
      if (tau > reach + 1e-9) break;
      if (tau < guard - 1e-9) continue;
      if (centre < m || centre + m >= tr.size()) break;
      score = std::max(score, std::abs(tr.p01(centre + m) - tr.p01(centre - m)));
    }
  }
  return score;
}

/// Phase kicks at regular intervals; with phase pi each kick reverses the evolution.
inline ExperimentResult kicked_rabi(const SpinModel& model, const ExperimentSpec& spec) {
  auto r = run_experiment(model, spec, "kicked_rabi");
  r.add("reversal_score", reversal_score(r, spec.sample_us));
  r.add("max_p01", detail::max_p01(r.trajectory));
  r.add("kicks", static_cast<double>(r.kick_times.size()));
  if (r.kick_gate) {
    r.add("kick_duration_us", r.kick_gate->duration_us);
    r.add("kick_amplitude_MHz", r.kick_gate->amplitude_MHz);
  }
  return r;
}

struct OddEvenRanges {
  std::vector<double> ranges;  // interval i follows kick i (interval 0 precedes the first kick)
  std::vector<double> maxima;
  bool alternating = false;
  double min_even_recovery = std::numeric_limits<double>::quiet_NaN();
};

inline OddEvenRanges odd_even_ranges(const ExperimentResult& r, double sample_us, double unkicked_max) {
  const auto& tr = r.trajectory;
  const double guard = detail::kick_guard(r, sample_us);
  std::vector<double> edges{0.0};
  edges.insert(edges.end(), r.kick_times.begin(), r.kick_times.end());
  edges.push_back(tr.times.back());
  OddEvenRanges out;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const auto [lo, hi] = detail::p01_range(tr, edges[i] + (i > 0 ? guard : 0.0),
                                            edges[i + 1] - (i + 2 < edges.size() ? guard : 0.0));
    out.ranges.push_back(hi - lo);
    out.maxima.push_back(hi);
  }
  // After odd kicks the path is a lesser circle, after even kicks a great one.
  out.alternating = out.ranges.size() >= 3;
  for (std::size_t i = 1; i + 1 < out.ranges.size(); ++i) {
    const bool rising = out.ranges[i + 1] > out.ranges[i];
    if (rising != (i % 2 == 1)) out.alternating = false;
  }
  double recovery = std::numeric_limits<double>::infinity();
  for (std::size_t i = 2; i < out.maxima.size(); i += 2) recovery = std::min(recovery, out.maxima[i] / unkicked_max);
  if (std::isfinite(recovery)) out.min_even_recovery = recovery;
  return out;
}

/// Sub-pi phase kicks: lesser and greater circles alternate, and every second
/// kick restores a great circle.
inline ExperimentResult odd_even(const SpinModel& model, const ExperimentSpec& spec) {
  if (!(spec.kick_phase_rad > 0.0) || spec.kick_phase_rad > std::numbers::pi)
    throw std::invalid_argument("odd_even: kick phase must lie in (0, pi]");
  auto r = run_experiment(model, spec, "odd_even");
  ExperimentSpec free = spec;
  free.kick_period_us = 0.0;
  const double unkicked_max = detail::max_p01(run_experiment(model, free, "rabi").trajectory);
  const auto oe = odd_even_ranges(r, spec.sample_us, unkicked_max);
  r.add("alternating", oe.alternating ? 1.0 : 0.0);
  r.add("min_even_recovery", oe.min_even_recovery);
  for (std::size_t i = 0; i < oe.ranges.size(); ++i) r.add("range_" + std::to_string(i), oe.ranges[i]);
  return r;
}

/// Dense pi kicks inside [window_start, window_end] hold the state where the
/// window begins; outside it the Rabi oscillation runs freely.
inline ExperimentResult lock_release(const SpinModel& model, const ExperimentSpec& spec) {
  auto r = run_experiment(model, spec, "lock_release");
  const auto& tr = r.trajectory;
  const double rate = spec.rf_rabi_kHz * 1e-3;
  const double t_lock = spec.window_start_us;
  const double t_release = std::min(spec.window_end_us, spec.total_us);
  const double p_lock = tr.p01(detail::sample_index(tr, std::round(t_lock / spec.sample_us) * spec.sample_us));
  const auto [lo, hi] = detail::p01_range(tr, t_lock, t_release);
  r.add("lock_residual", std::max(hi - p_lock, p_lock - lo));
  r.add("lock_max_p01", hi);
  const double s = std::sin(std::numbers::pi * rate * spec.kick_period_us);
  r.add("lock_bound", s * s);
  r.add("kicks", static_cast<double>(r.kick_times.size()));

  const double period = spec.rabi_period_us();
  if (spec.total_us - t_release >= 1.5 * period) {
    std::vector<double> t, y;
    for (std::size_t i = 0; i < tr.size(); ++i)
      if (tr.times[i] >= t_release) {
        t.push_back(tr.times[i]);
        y.push_back(tr.p01(i));
      }
    const double f = analysis::fit_frequency(t, y, rate);
    r.add("release_period_us", 1.0 / f);
    r.add("release_period_rel_error", std::abs(1.0 / f - period) / period);
    const double peak = analysis::peak_time(tr.times, tr.qubit_series(1), t_release, t_release + 0.75 * period);
    r.add("release_first_max_us", peak - t_release);
    r.add("release_first_max_rel_error", std::abs(peak - t_release - 0.5 * period) / (0.5 * period));
  }
  return r;
}

struct SuppressionRow {
  double kick_period_us = 0.0;
  double residual = 0.0;     // max P(|01>) over the record
  double bound = 0.0;        // sin^2(pi nu T_k)
  double suppression = 0.0;  // unkicked residual / residual
};

struct SuppressionScan {
  double coupling_MHz = 0.0;
  double unkicked_residual = 0.0;
  std::vector<SuppressionRow> rows;  // in the order given
  bool monotone = true;              // residual non-increasing as T_k shrinks

  double slope() const {
    std::vector<double> x, y;
    for (const auto& r : rows) {
      x.push_back(r.kick_period_us);
      y.push_back(r.residual);
    }
    return analysis::loglog_slope(x, y);
  }
};

/// Residual amplitude of a resonant coupling of `coupling_MHz` (two-level Rabi
/// frequency) under pi kicks of each period, over `record_us`.
inline SuppressionScan suppression_scan(const SpinModel& model, double coupling_MHz,
                                        const std::vector<double>& kick_periods_us, double record_us,
                                        ExperimentSpec base = {}) {
  if (!(coupling_MHz > 0.0)) throw std::invalid_argument("suppression_scan: coupling must be > 0");
  base.rf_rabi_kHz = coupling_MHz * 1e3;
  base.total_us = record_us;
  base.kick_phase_rad = std::numbers::pi;
  base.window_start_us = 0.0;
  base.window_end_us = std::numeric_limits<double>::infinity();
  base.kick_first_us = std::numeric_limits<double>::quiet_NaN();
  base.kick_count = -1;

  SuppressionScan scan;
  scan.coupling_MHz = coupling_MHz;
  {
    ExperimentSpec free = base;
    free.kick_period_us = 0.0;
    free.sample_us = std::min(base.sample_us, 0.01 / coupling_MHz);
    scan.unkicked_residual = detail::max_p01(run_experiment(model, free, "suppression_free").trajectory);
  }
  scan.rows.resize(kick_periods_us.size());
  parallel_for(kick_periods_us.size(), [&](std::size_t i) {
    ExperimentSpec s = base;
    s.kick_period_us = kick_periods_us[i];
    s.sample_us = kick_periods_us[i] / 4.0;
    const auto r = run_experiment(model, s, "suppression");
    const double sn = std::sin(std::numbers::pi * coupling_MHz * kick_periods_us[i]);
    const double residual = detail::max_p01(r.trajectory);
    scan.rows[i] = {kick_periods_us[i], residual, sn * sn, scan.unkicked_residual / residual};
  });
  std::vector<std::size_t> order(scan.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scan.rows[a].kick_period_us < scan.rows[b].kick_period_us; });
  for (std::size_t k = 1; k < order.size(); ++k)
    if (scan.rows[order[k - 1]].residual > scan.rows[order[k]].residual + 1e-12) scan.monotone = false;
  return scan;
}

/// Log-spaced periods from lo to hi inclusive.
inline std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i)
    out.push_back(lo * std::pow(hi / lo, count == 1 ? 0.0 : static_cast<double>(i) / (count - 1)));
  return out;
}

}  // namespace endosim

#endif  // ENDOSIM_BANGBANG_HPP
