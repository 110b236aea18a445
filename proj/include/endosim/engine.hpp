#ifndef ENDOSIM_ENGINE_HPP
#define ENDOSIM_ENGINE_HPP

// Time evolution under a pulse program in the interaction frame of H0.
//
// Every drive couples the eigenlevel pairs whose transition frequency lies
// within the channel's cutoff of its carrier:
//
//   H_I(t) = sum  nu1 * X_jk * exp(-i (2 pi (nu_jk - f) t + phi)) |j><k| + h.c.
//
// with X the electron Sx (MW) or nuclear Ix (RF) in the eigenbasis. Stepping
// is the fourth-order commutator-free Magnus scheme by default (two
// exponentials per step at the Gauss-Legendre nodes) or the exponential
// midpoint rule. Both are exactly unitary per step. Reported
// phases are interaction-frame phases, so free evolution leaves every
// amplitude unchanged.

#include "endosim/model.hpp"
#include "endosim/parallel.hpp"
#include "endosim/pulse.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace endosim {

/// A run that violated a physical invariant or could not be integrated.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coherence too small for its phase to mean anything.
class UndefinedPhase : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class QuantumState {
 public:
  static QuantumState ket(Ket amplitudes) {
    QuantumState s;
    s.data_ = std::move(amplitudes);
    return s;
  }
  static QuantumState density(Operator rho) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("density matrix must be square");
    QuantumState s;
    s.data_ = std::move(rho);
    return s;
  }
  static QuantumState basis(Eigen::Index dim, int level) {
    Ket k = Ket::Zero(dim);
    k(level) = 1.0;
    return ket(std::move(k));
  }
  /// Equal-weight superposition of two levels with relative phase on `b`.
  static QuantumState superposition(Eigen::Index dim, int a, int b, double phase_b = 0.0) {
    Ket k = Ket::Zero(dim);
    k(a) = 1.0 / std::sqrt(2.0);
    k(b) = std::polar(1.0 / std::sqrt(2.0), phase_b);
    return ket(std::move(k));
  }

  bool is_ket() const { return std::holds_alternative<Ket>(data_); }
  Eigen::Index dim() const { return is_ket() ? std::get<Ket>(data_).size() : std::get<Operator>(data_).rows(); }
  const Ket& amplitudes() const { return std::get<Ket>(data_); }
  const Operator& density_matrix() const { return std::get<Operator>(data_); }

  Operator to_density() const {
    if (!is_ket()) return density_matrix();
    const Ket& k = amplitudes();
    return k * k.adjoint();
  }

  Eigen::VectorXd populations() const {
    if (is_ket()) return amplitudes().cwiseAbs2();
    return density_matrix().diagonal().real();
  }

  /// rho_ij = <i|rho|j>.
  cplx coherence(int i, int j) const {
    if (is_ket()) return amplitudes()(i) * std::conj(amplitudes()(j));
    return density_matrix()(i, j);
  }

  void apply(const Operator& u) {
    if (is_ket()) {
      Ket& k = std::get<Ket>(data_);
      k = u * k;
    } else {
      Operator& r = std::get<Operator>(data_);
      r = u * r * u.adjoint();
    }
  }

  /// |level> -> exp(i phase) |level>.
  void apply_phase(int level, double phase) {
    const cplx f = std::polar(1.0, phase);
    if (is_ket()) {
      std::get<Ket>(data_)(level) *= f;
    } else {
      Operator& r = std::get<Operator>(data_);
      r.row(level) *= f;
      r.col(level) *= std::conj(f);
    }
  }

  /// |<psi|psi> - 1| for kets, |tr rho - 1| for density matrices.
  double norm_error() const {
    if (is_ket()) return std::abs(amplitudes().squaredNorm() - 1.0);
    return std::abs(density_matrix().trace().real() - 1.0);
  }

  /// Physical validity to `tol`.
  void validate(double tol = 1e-9) const {
    if (norm_error() > tol) throw SimulationError("state norm deviates from 1");
    if (is_ket()) return;
    const Operator& r = density_matrix();
    if (hermiticity_error(r) > tol) throw SimulationError("density matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Operator> solver(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -tol) throw SimulationError("density matrix is not positive");
  }

 private:
  std::variant<Ket, Operator> data_;
};

/// arg(rho_ij) in (-pi, pi].
inline double coherence_phase(const QuantumState& state, int level_i, int level_j, double floor = 1e-6) {
  const cplx c = state.coherence(level_i, level_j);
  if (!(std::abs(c) > floor)) throw UndefinedPhase("coherence below phase floor");
  const double phi = std::arg(c);
  return phi <= -std::numbers::pi ? std::numbers::pi : phi;
}

enum class Integrator { magnus4, midpoint };

struct SimConfig {
  /// magnus4: fourth-order commutator-free Magnus; midpoint: exponential midpoint.
  Integrator integrator = Integrator::magnus4;
  double dt_max_us = 1.0;
  /// Steps per period of the fastest kept detuning or drive amplitude.
  double steps_per_cycle = 20.0;
  double mw_cutoff_MHz = 100.0;
  double rf_cutoff_MHz = 10.0;
  std::map<std::string, double> channel_cutoffs;  // per-channel overrides
  double leakage_threshold = 1e-2;
  double phase_floor = 1e-6;
  double min_dt_us = 1e-9;
  double norm_tolerance = 1e-9;
  /// Rabi frequency of the selective electron pi pulse in thermal preparation.
  double prep_amplitude_MHz = 0.25;

  double cutoff_for(const Drive& d) const {
    if (const auto it = channel_cutoffs.find(d.channel); it != channel_cutoffs.end()) return it->second;
    return d.kind == ChannelKind::microwave ? mw_cutoff_MHz : rf_cutoff_MHz;
  }

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(dt_max_us)) throw std::invalid_argument("dt_max_us must be > 0");
    if (!positive(steps_per_cycle)) throw std::invalid_argument("steps_per_cycle must be > 0");
    if (!positive(mw_cutoff_MHz) || !positive(rf_cutoff_MHz))
      throw std::invalid_argument("RWA cutoffs must be > 0");
    for (const auto& [ch, c] : channel_cutoffs)
      if (!positive(c)) throw std::invalid_argument("cutoff for " + ch + " must be > 0");
    if (!positive(min_dt_us)) throw std::invalid_argument("min_dt_us must be > 0");
    if (!positive(prep_amplitude_MHz)) throw std::invalid_argument("prep_amplitude_MHz must be > 0");
  }
};

/// Reads integrator, dt_max_us, steps_per_cycle, mw_cutoff_MHz, rf_cutoff_MHz,
/// cutoff.<CHANNEL>, leakage_threshold, phase_floor, prep_amplitude_MHz.
inline SimConfig sim_config_from(const KeyValues& kv, SimConfig base = {}) {
  const std::string integrator =
      kv.get_string("integrator", base.integrator == Integrator::magnus4 ? "magnus4" : "midpoint");
  if (integrator == "magnus4")
    base.integrator = Integrator::magnus4;
  else if (integrator == "midpoint")
    base.integrator = Integrator::midpoint;
  else
    throw std::invalid_argument("integrator must be magnus4 or midpoint");
  base.dt_max_us = kv.get_double("dt_max_us", base.dt_max_us);
  base.steps_per_cycle = kv.get_double("steps_per_cycle", base.steps_per_cycle);
  base.mw_cutoff_MHz = kv.get_double("mw_cutoff_MHz", base.mw_cutoff_MHz);
  base.rf_cutoff_MHz = kv.get_double("rf_cutoff_MHz", base.rf_cutoff_MHz);
  base.leakage_threshold = kv.get_double("leakage_threshold", base.leakage_threshold);
  base.phase_floor = kv.get_double("phase_floor", base.phase_floor);
  base.prep_amplitude_MHz = kv.get_double("prep_amplitude_MHz", base.prep_amplitude_MHz);
  for (const auto& [key, value] : kv.entries())
    if (key.starts_with("cutoff.")) base.channel_cutoffs[key.substr(7)] = kv.get_double(key, 0.0);
  base.validate();
  return base;
}

/// One kept RWA term: H_I(t)[lower, upper] = coupling * exp(-i 2 pi detuning t).
struct DriveTerm {
  int lower = 0;
  int upper = 0;
  cplx coupling;
  double detuning_MHz = 0.0;  // nu_transition - f_carrier
};

inline std::vector<DriveTerm> drive_terms(const SpinModel& model, std::span<const Drive> drives,
                                          const SimConfig& config, std::vector<std::string>* warnings = nullptr) {
  constexpr double element_floor = 1e-9;
  std::vector<DriveTerm> terms;
  const Eigen::Index d = model.dim();
  for (const auto& drive : drives) {
    const Operator& axis = drive.kind == ChannelKind::microwave ? model.electron_drive() : model.nuclear_drive();
    const double cutoff = config.cutoff_for(drive);
    const cplx phase = std::polar(1.0, -drive.phase);
    bool any = false;
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = j + 1; k < d; ++k) {
        const cplx element = axis(j, k);
        if (std::abs(element) <= element_floor) continue;
        const double detuning = (model.energy(static_cast<int>(k)) - model.energy(static_cast<int>(j))) - drive.carrier;
        if (std::abs(detuning) > cutoff) continue;
        any = true;
        if (drive.amplitude > 0.0)
          terms.push_back({static_cast<int>(j), static_cast<int>(k), drive.amplitude * element * phase, detuning});
      }
    if (!any && warnings)
      warnings->push_back("channel " + drive.channel + " at " + format_shortest(drive.carrier) +
                          " MHz has no transition within its cutoff; pulse acts as identity");
  }
  return terms;
}

inline Operator interaction_hamiltonian(Eigen::Index dim, std::span<const DriveTerm> terms, double t_us) {
  Operator h = Operator::Zero(dim, dim);
  for (const auto& term : terms) {
    const cplx v = term.coupling * std::polar(1.0, -two_pi * term.detuning_MHz * t_us);
    h(term.lower, term.upper) += v;
    h(term.upper, term.lower) += std::conj(v);
  }
  return h;
}

inline Operator interaction_hamiltonian(const SpinModel& model, std::span<const Drive> drives, double t_us,
                                        const SimConfig& config = {}) {
  return interaction_hamiltonian(model.dim(), drive_terms(model, drives, config), t_us);
}

struct Trajectory {
  std::string program_name;
  std::uint64_t params_hash = 0;
  QubitEncoding encoding;
  double phase_floor = 1e-6;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> populations;  // all eigenlevels, one vector per sample
  std::vector<cplx> coherence01;             // rho(|01>, |00>) per sample
  std::vector<std::string> warnings;
  std::optional<QuantumState> final_state;

  std::size_t size() const { return times.size(); }

  /// Population of qubit state q (0 = |00> ... 3 = |11>) at a sample.
  double qubit(std::size_t sample, int q) const { return populations[sample](encoding.levels[q]); }
  double p00(std::size_t s) const { return qubit(s, 0); }
  double p01(std::size_t s) const { return qubit(s, 1); }

  double other(std::size_t sample) const {
    double sum = 0.0;
    const auto& p = populations[sample];
    for (Eigen::Index k = 0; k < p.size(); ++k)
      if (std::find(encoding.levels.begin(), encoding.levels.end(), k) == encoding.levels.end()) sum += p(k);
    return sum;
  }

  /// Population outside {|00>, |01>}.
  double leakage(std::size_t sample) const { return std::max(0.0, 1.0 - p00(sample) - p01(sample)); }

  /// Relative phase of |01> against |00>; NaN when the coherence is below the floor.
  double phase01(std::size_t sample) const {
    const cplx c = coherence01[sample];
    if (!(std::abs(c) > phase_floor)) return std::numeric_limits<double>::quiet_NaN();
    const double phi = std::arg(c);
    return phi <= -std::numbers::pi ? std::numbers::pi : phi;
  }

  std::vector<double> qubit_series(int q) const {
    std::vector<double> out(size());
    for (std::size_t s = 0; s < size(); ++s) out[s] = qubit(s, q);
    return out;
  }

  bool operator==(const Trajectory& o) const {
    if (program_name != o.program_name || params_hash != o.params_hash || times != o.times ||
        coherence01 != o.coherence01 || populations.size() != o.populations.size())
      return false;
    for (std::size_t i = 0; i < populations.size(); ++i)
      if (populations[i] != o.populations[i]) return false;
    return true;
  }
};

namespace detail {

inline void record_sample(Trajectory& traj, const QuantumState& state, double t, const SimConfig& config) {
  if (state.norm_error() > config.norm_tolerance)
    throw SimulationError("norm conservation violated at t=" + format_shortest(t) + " us");
  Eigen::VectorXd pops = state.populations();
  for (Eigen::Index k = 0; k < pops.size(); ++k) {
    if (pops(k) < -1e-9 || pops(k) > 1.0 + 1e-9)
      throw SimulationError("population out of [0,1] at t=" + format_shortest(t) + " us");
    pops(k) = std::clamp(pops(k), 0.0, 1.0);
  }
  if (std::abs(pops.sum() - 1.0) > 1e-6) throw SimulationError("populations do not sum to 1");
  traj.times.push_back(t);
  traj.populations.push_back(std::move(pops));
  traj.coherence01.push_back(state.coherence(traj.encoding.l01(), traj.encoding.l00()));
}

/// Integrates `state` over [a, b] with the configured scheme.
inline void integrate(QuantumState& state, const SpinModel& model, std::span<const DriveTerm> terms,
                      double max_amplitude, double a, double b, const SimConfig& config) {
  const double span = b - a;
  if (span <= time_epsilon_us || terms.empty()) return;
  double max_detuning = 0.0;
  for (const auto& t : terms) max_detuning = std::max(max_detuning, std::abs(t.detuning_MHz));

  // A resonant-only interval has a constant H_I; one exponential is exact.
  if (two_pi * max_detuning * span < 1e-12) {
    state.apply(herm_expm(interaction_hamiltonian(model.dim(), terms, a), span));
    return;
  }
  double dt = config.dt_max_us;
  if (max_detuning > 0.0) dt = std::min(dt, 1.0 / (config.steps_per_cycle * max_detuning));
  if (max_amplitude > 0.0) dt = std::min(dt, 1.0 / (config.steps_per_cycle * max_amplitude));
  if (dt < config.min_dt_us) throw SimulationError("step-size underflow: dt=" + format_shortest(dt) + " us");
  const auto n = static_cast<long long>(std::ceil(span / dt - 1e-9));
  const double h = span / static_cast<double>(n);
  if (config.integrator == Integrator::midpoint) {
    for (long long i = 0; i < n; ++i)
      state.apply(herm_expm(interaction_hamiltonian(model.dim(), terms, a + (static_cast<double>(i) + 0.5) * h), h));
    return;
  }
  const double c1 = 0.5 - std::sqrt(3.0) / 6.0, c2 = 0.5 + std::sqrt(3.0) / 6.0;
  const double w1 = (3.0 - 2.0 * std::sqrt(3.0)) / 12.0, w2 = (3.0 + 2.0 * std::sqrt(3.0)) / 12.0;
  for (long long i = 0; i < n; ++i) {
    const double t0 = a + static_cast<double>(i) * h;
    const Operator h1 = interaction_hamiltonian(model.dim(), terms, t0 + c1 * h);
    const Operator h2 = interaction_hamiltonian(model.dim(), terms, t0 + c2 * h);
    state.apply(herm_expm(w2 * h1 + w1 * h2, h));
    state.apply(herm_expm(w1 * h1 + w2 * h2, h));
  }
}

}  // namespace detail

/// Evolves `initial` (in the H0 eigenbasis) through `program`. Samples at a
/// time are taken after any ideal kick scheduled at that time.
inline Trajectory evolve(const SpinModel& model, QuantumState state, const PulseProgram& program,
                         const SimConfig& config = {}) {
  config.validate();
  validate_program(program);
  if (state.dim() != model.dim()) throw std::invalid_argument("evolve: state dimension does not match model");
  state.validate(config.norm_tolerance);

  Trajectory traj;
  traj.program_name = program.name;
  traj.params_hash = model.params().hash();
  traj.encoding = model.encoding();
  traj.phase_floor = config.phase_floor;

  struct Event {
    double time;
    int kind;  // 0 = kick, 1 = sample
    std::size_t index;
  };
  std::vector<Event> events;
  for (std::size_t i = 0; i < program.kicks.size(); ++i) events.push_back({program.kicks[i].time, 0, i});
  const auto samples = program.sample_points();
  for (std::size_t i = 0; i < samples.size(); ++i) events.push_back({samples[i], 1, i});
  std::stable_sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
    return x.time != y.time ? x.time < y.time : x.kind < y.kind;
  });

  std::size_t next = 0;
  auto fire = [&](const Event& e) {
    if (e.kind == 0)
      state.apply_phase(model.encoding().l01(), program.kicks[e.index].phase);
    else
      detail::record_sample(traj, state, samples[e.index], config);
  };
  while (next < events.size() && events[next].time <= time_epsilon_us) fire(events[next++]);

  for (const auto& iv : compile_intervals(program)) {
    const auto terms = drive_terms(model, iv.drives, config, &traj.warnings);
    double max_amplitude = 0.0;
    for (const auto& d : iv.drives) max_amplitude = std::max(max_amplitude, d.amplitude);
    double t = iv.t_start;
    while (next < events.size() && events[next].time <= iv.t_end + time_epsilon_us) {
      const double stop = std::clamp(events[next].time, t, iv.t_end);
      detail::integrate(state, model, terms, max_amplitude, t, stop, config);
      t = stop;
      fire(events[next++]);
    }
    detail::integrate(state, model, terms, max_amplitude, t, iv.t_end, config);
  }
  while (next < events.size()) fire(events[next++]);

  if (state.norm_error() > config.norm_tolerance) throw SimulationError("norm conservation violated");
  std::sort(traj.warnings.begin(), traj.warnings.end());
  traj.warnings.erase(std::unique(traj.warnings.begin(), traj.warnings.end()), traj.warnings.end());
  traj.final_state = std::move(state);
  return traj;
}

enum class InitialMode { pure, thermal };

/// Pure |00>, or the Boltzmann state at the preset temperature followed by a
/// selective electron pi pulse on the M_I = +1 manifold.
inline QuantumState prepare_initial(const SpinModel& model, InitialMode mode, const SimConfig& config = {}) {
  const int l00 = model.encoding().l00();
  if (mode == InitialMode::pure) return QuantumState::basis(model.dim(), l00);

  const double temperature = model.params().temperature_K;
  if (std::isnan(temperature) || temperature <= 0.0)
    throw std::invalid_argument("prepare_initial: temperature must be positive");
  Eigen::VectorXd weights(model.dim());
  if (std::isinf(temperature)) {
    weights.setOnes();
  } else {
    const double kT = boltzmann_MHz_per_K * temperature;
    const double e_min = model.eigen().values.minCoeff();
    for (Eigen::Index k = 0; k < model.dim(); ++k) weights(k) = std::exp(-(model.energy(static_cast<int>(k)) - e_min) / kT);
  }
  weights /= weights.sum();
  Operator rho = Operator::Zero(model.dim(), model.dim());
  rho.diagonal() = weights.cast<cplx>();

  const double nu1 = config.prep_amplitude_MHz;
  PulseProgram prep;
  prep.name = "thermal-prep";
  prep.total_duration = 0.5 / nu1;
  prep.segments.push_back({"MW", 0.0, prep.total_duration, model.encoding().kick_frequency_00_10, nu1, 0.0});
  auto traj = evolve(model, QuantumState::density(std::move(rho)), prep, config);
  return std::move(*traj.final_state);
}

struct EnsembleSpec {
  double sigma = 0.0;  // relative standard deviation of the amplitude scale
  int samples = 64;
  std::uint64_t seed = 1;
  std::string channel_prefix = "RF";
};

/// Amplitude scale factors 1 + sigma * z with z drawn by stratified inverse-CDF
/// sampling: one uniform draw inside each of `samples` equal-probability bins.
inline std::vector<double> ensemble_scales(const EnsembleSpec& spec) {
  if (spec.samples < 1) throw std::invalid_argument("ensemble: need at least one sample");
  if (!std::isfinite(spec.sigma) || spec.sigma < 0.0) throw std::invalid_argument("ensemble: sigma must be >= 0");
  std::mt19937_64 rng(spec.seed);
  const boost::math::normal_distribution<double> normal;
  std::vector<double> scales;
  for (int i = 0; i < spec.samples; ++i) {
    // 53 random bits, kept strictly inside (0, 1).
    const double jitter = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    const double u = (static_cast<double>(i) + jitter) / static_cast<double>(spec.samples);
    scales.push_back(std::max(0.0, 1.0 + spec.sigma * boost::math::quantile(normal, u)));
  }
  return scales;
}

inline PulseProgram scale_amplitudes(PulseProgram program, const std::string& prefix, double factor) {
  for (auto& s : program.segments)
    if (s.channel.starts_with(prefix)) s.amplitude *= factor;
  return program;
}

/// Population and coherence curves averaged over drive-amplitude scale factors.
inline Trajectory ensemble_average(const SpinModel& model, const QuantumState& initial, const PulseProgram& program,
                                   const SimConfig& config, const EnsembleSpec& spec,
                                   unsigned threads = default_thread_count()) {
  const auto scales = ensemble_scales(spec);
  if (spec.sigma == 0.0) return evolve(model, initial, program, config);
  std::vector<Trajectory> members(scales.size());
  parallel_for(
      scales.size(),
      [&](std::size_t i) { members[i] = evolve(model, initial, scale_amplitudes(program, spec.channel_prefix, scales[i]), config); },
      threads);

  Trajectory avg = members.front();
  avg.final_state.reset();
  const double inv = 1.0 / static_cast<double>(members.size());
  std::set<std::string> warnings;
  for (std::size_t s = 0; s < avg.size(); ++s) {
    Eigen::VectorXd pops = Eigen::VectorXd::Zero(model.dim());
    cplx coh = 0.0;
    for (const auto& m : members) {
      pops += m.populations[s];
      coh += m.coherence01[s];
    }
    avg.populations[s] = pops * inv;
    avg.coherence01[s] = coh * inv;
  }
  for (const auto& m : members) warnings.insert(m.warnings.begin(), m.warnings.end());
  avg.warnings.assign(warnings.begin(), warnings.end());
  return avg;
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "time_us,p00,p01,p10,p11,other,phase01_rad\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    out += format_fixed(traj.times[s]);
    for (int q = 0; q < 4; ++q) out += "," + format_fixed(traj.qubit(s, q));
    out += "," + format_fixed(traj.other(s)) + "," + format_fixed(traj.phase01(s)) + "\n";
  }
  return out;
}

/// Writes to a sibling temporary and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace endosim

#endif  // ENDOSIM_ENGINE_HPP
