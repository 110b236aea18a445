#ifndef ENDOSIM_MODEL_HPP
#define ENDOSIM_MODEL_HPP

// Static Hamiltonian of the S=3/2, I=1 endohedral nitrogen spin system, its
// transition structure, and the four-level qubit encoding.
//
//   H0 = nu_e Sz + a S.I - nu_n Iz        (MHz)
//
// The isotropic S.I keeps its flip-flop terms, so second-order hyperfine
// shifts come out of exact diagonalization rather than a perturbative formula.

#include "endosim/keyvalue.hpp"
#include "endosim/spin_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace endosim {

/// Bohr magneton over Planck's constant, MHz per mT.
inline constexpr double bohr_MHz_per_mT = 13.996244936;
/// Boltzmann constant over Planck's constant, MHz per kelvin.
inline constexpr double boltzmann_MHz_per_K = 20836.61912;

inline double hyperfine_mT_to_MHz(double a_mT, double g) { return a_mT * g * bohr_MHz_per_mT; }

struct PhysicalParams {
  double g = 2.003;
  double a_MHz = 15.793;
  double B0_mT = 344.5;
  double nu_n_MHz = 1.092;
  double temperature_K = 190.0;

  /// g = 2.003 with a and nu_n back-fitted to the 22.598 / 24.782 MHz ENDOR
  /// lines; B0 puts the electron Larmor frequency in X-band.
  static PhysicalParams reference() { return {}; }

  double electron_larmor_MHz() const { return g * bohr_MHz_per_mT * B0_mT; }

  /// Checks the invariants a preset must satisfy.
  void validate() const {
    auto bad = [](const char* what) { throw std::invalid_argument(std::string("physical parameters: ") + what); };
    if (!std::isfinite(g) || g <= 0.0) bad("g must be positive");
    if (!std::isfinite(a_MHz) || a_MHz <= 0.0) bad("a_MHz must be positive");
    if (!std::isfinite(B0_mT) || B0_mT <= 0.0) bad("B0_mT must be positive");
    if (!std::isfinite(nu_n_MHz) || nu_n_MHz < 0.0) bad("nu_n_MHz must be non-negative");
    if (std::isnan(temperature_K) || temperature_K <= 0.0) bad("temperature_K must be positive");
  }

  std::string serialize() const {
    return "g=" + format_shortest(g) + "\na_MHz=" + format_shortest(a_MHz) +
           "\nB0_mT=" + format_shortest(B0_mT) + "\nnu_n_MHz=" + format_shortest(nu_n_MHz) +
           "\ntemperature_K=" + format_shortest(temperature_K) + "\n";
  }

  /// FNV-1a of the canonical text; tags trajectories with their parameters.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : serialize()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }
};

/// Reads g, a_MHz, B0_mT, nu_n_MHz, temperature_K.
inline PhysicalParams params_from(const KeyValues& kv, PhysicalParams base = PhysicalParams::reference()) {
  base.g = kv.get_double("g", base.g);
  base.a_MHz = kv.get_double("a_MHz", base.a_MHz);
  base.B0_mT = kv.get_double("B0_mT", base.B0_mT);
  base.nu_n_MHz = kv.get_double("nu_n_MHz", base.nu_n_MHz);
  base.temperature_K = kv.get_double("temperature_K", base.temperature_K);
  base.validate();
  return base;
}

inline const std::array<SpinSite, 2>& nitrogen_fullerene_sites() {
  static const std::array<SpinSite, 2> sites{SpinSite{"S", SpinQuantum(1.5)},
                                             SpinSite{"I", SpinQuantum(1.0)}};
  return sites;
}

inline Operator static_hamiltonian(const PhysicalParams& p) {
  if (!std::isfinite(p.g) || !std::isfinite(p.a_MHz) || !std::isfinite(p.B0_mT) ||
      !std::isfinite(p.nu_n_MHz))
    throw std::invalid_argument("static_hamiltonian: non-finite parameter");
  const auto& sites = nitrogen_fullerene_sites();
  const auto s = spin_operators(sites[0].spin);
  const auto i = spin_operators(sites[1].spin);
  const Operator sx = embed(s.x, 0, sites), sy = embed(s.y, 0, sites), sz = embed(s.z, 0, sites);
  const Operator ix = embed(i.x, 1, sites), iy = embed(i.y, 1, sites), iz = embed(i.z, 1, sites);
  return p.electron_larmor_MHz() * sz + p.a_MHz * (sx * ix + sy * iy + sz * iz) - p.nu_n_MHz * iz;
}

/// Electron and nuclear x-axis drive operators in the product basis.
inline Operator electron_drive_axis() {
  return embed(spin_operators(1.5).x, 0, nitrogen_fullerene_sites());
}
inline Operator nuclear_drive_axis() {
  return embed(spin_operators(1.0).x, 1, nitrogen_fullerene_sites());
}

/// Product-basis index of |M_S, M_I> (both ladders run from +s down to -s).
inline int product_index(double ms, double mi) {
  const int is = static_cast<int>(std::lround(1.5 - ms));
  const int ii = static_cast<int>(std::lround(1.0 - mi));
  if (is < 0 || is > 3 || ii < 0 || ii > 2) throw std::out_of_range("product_index: projection out of range");
  return is * 3 + ii;
}

struct LevelCharacter {
  double ms = 0.0;
  double mi = 0.0;
  double weight = 0.0;  // |<M_S, M_I|level>|^2 of the dominant product state
};

inline std::vector<LevelCharacter> level_characters(const EigenData& eig) {
  std::vector<LevelCharacter> out;
  for (Eigen::Index k = 0; k < eig.vectors.cols(); ++k) {
    Eigen::Index best = 0;
    const double weight = eig.vectors.col(k).cwiseAbs2().maxCoeff(&best);
    out.push_back({1.5 - static_cast<double>(best / 3), 1.0 - static_cast<double>(best % 3), weight});
  }
  return out;
}

struct Transition {
  int lower = 0;
  int upper = 0;
  double frequency_MHz = 0.0;
  double electron_element = 0.0;  // |<lower|Sx|upper>|
  double nuclear_element = 0.0;   // |<lower|Ix|upper>|
};

using TransitionTable = std::vector<Transition>;

inline TransitionTable transition_table(const EigenData& eig, const Operator& electron_eig,
                                        const Operator& nuclear_eig, double threshold = 1e-6) {
  TransitionTable rows;
  const Eigen::Index d = eig.values.size();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double freq = eig.values(j) - eig.values(i);
      const double e = std::abs(electron_eig(i, j));
      const double n = std::abs(nuclear_eig(i, j));
      if (freq > 0.0 && (e > threshold || n > threshold))
        rows.push_back({static_cast<int>(i), static_cast<int>(j), freq, e, n});
    }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Transition& a, const Transition& b) { return a.frequency_MHz < b.frequency_MHz; });
  return rows;
}

/// Transition table of a product-basis Hamiltonian under the given drive axes.
inline TransitionTable transition_table(const Operator& h0, const Operator& electron_axis,
                                        const Operator& nuclear_axis, double threshold = 1e-6) {
  const EigenData eig = eigenbasis(h0);
  return transition_table(eig, eig.vectors.adjoint() * electron_axis * eig.vectors,
                          eig.vectors.adjoint() * nuclear_axis * eig.vectors, threshold);
}

/// Eigenlevels carrying the two-qubit encoding. The electron qubit is
/// M_S = +3/2 (0) / -3/2 (1); the nuclear qubit is M_I = +1 (0) / 0 (1).
struct QubitEncoding {
  std::array<int, 4> levels{};  // |00>, |01>, |10>, |11>
  /// Mean single-quantum EPR frequency of the M_I = 0 manifold, |01> <-> |11>.
  double kick_frequency_01_11 = 0.0;
  /// Same for the M_I = +1 manifold, |00> <-> |10>.
  double kick_frequency_00_10 = 0.0;

  int l00() const { return levels[0]; }
  int l01() const { return levels[1]; }
  int l10() const { return levels[2]; }
  int l11() const { return levels[3]; }
  double kick_splitting() const { return kick_frequency_01_11 - kick_frequency_00_10; }
};

inline QubitEncoding qubit_encoding(const EigenData& eig) {
  const auto chars = level_characters(eig);
  const std::array<std::array<double, 2>, 4> targets{{{1.5, 1.0}, {1.5, 0.0}, {-1.5, 1.0}, {-1.5, 0.0}}};
  QubitEncoding enc;
  for (std::size_t q = 0; q < 4; ++q) {
    int found = -1;
    for (std::size_t k = 0; k < chars.size(); ++k) {
      if (chars[k].ms != targets[q][0] || chars[k].mi != targets[q][1]) continue;
      if (chars[k].weight <= 0.5)
        throw std::runtime_error("qubit_encoding: level character is ambiguous (mixing > 0.5)");
      if (found >= 0) throw std::runtime_error("qubit_encoding: two levels share one dominant character");
      found = static_cast<int>(k);
    }
    if (found < 0) throw std::runtime_error("qubit_encoding: no level with the required character");
    enc.levels[q] = found;
  }
  const auto& e = eig.values;
  enc.kick_frequency_01_11 = std::abs(e(enc.l01()) - e(enc.l11())) / 3.0;
  enc.kick_frequency_00_10 = std::abs(e(enc.l00()) - e(enc.l10())) / 3.0;
  const double scale = std::max(1.0, std::abs(enc.kick_frequency_01_11));
  if (std::abs(enc.kick_splitting()) < 1e-9 * scale)
    throw std::runtime_error("qubit_encoding: electron manifolds are degenerate (no hyperfine splitting)");
  return enc;
}

inline QubitEncoding qubit_encoding(const Operator& h0) { return qubit_encoding(eigenbasis(h0)); }

/// Everything the engine needs about the static system, computed once.
class SpinModel {
 public:
  explicit SpinModel(const PhysicalParams& params = PhysicalParams::reference())
      : params_(params),
        h0_(static_hamiltonian(params)),
        eig_(eigenbasis(h0_)),
        electron_(eig_.vectors.adjoint() * electron_drive_axis() * eig_.vectors),
        nuclear_(eig_.vectors.adjoint() * nuclear_drive_axis() * eig_.vectors),
        characters_(level_characters(eig_)),
        encoding_(qubit_encoding(eig_)),
        transitions_(transition_table(eig_, electron_, nuclear_)) {}

  const PhysicalParams& params() const { return params_; }
  const Operator& hamiltonian() const { return h0_; }
  const EigenData& eigen() const { return eig_; }
  Eigen::Index dim() const { return eig_.values.size(); }
  double energy(int level) const { return eig_.values(level); }
  /// Sx (electron) and Ix (nuclear) expressed in the H0 eigenbasis.
  const Operator& electron_drive() const { return electron_; }
  const Operator& nuclear_drive() const { return nuclear_; }
  const std::vector<LevelCharacter>& characters() const { return characters_; }
  const QubitEncoding& encoding() const { return encoding_; }
  const TransitionTable& transitions() const { return transitions_; }

  int level_of(double ms, double mi) const {
    for (std::size_t k = 0; k < characters_.size(); ++k)
      if (characters_[k].ms == ms && characters_[k].mi == mi) return static_cast<int>(k);
    throw std::out_of_range("level_of: no such level");
  }

  /// |E(upper) - E(lower)| between two eigenlevels.
  double frequency(int a, int b) const { return std::abs(eig_.values(a) - eig_.values(b)); }

  /// Nuclear qubit transition |00> <-> |01>.
  double nuclear_qubit_frequency() const { return frequency(encoding_.l00(), encoding_.l01()); }
  double nuclear_qubit_element() const { return std::abs(nuclear_(encoding_.l00(), encoding_.l01())); }

 private:
  PhysicalParams params_;
  Operator h0_;
  EigenData eig_;
  Operator electron_;
  Operator nuclear_;
  std::vector<LevelCharacter> characters_;
  QubitEncoding encoding_;
  TransitionTable transitions_;
};

}  // namespace endosim

#endif  // ENDOSIM_MODEL_HPP
