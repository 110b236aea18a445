#ifndef ENDOSIM_SPIN_CORE_HPP
#define ENDOSIM_SPIN_CORE_HPP

// Spin-operator algebra and dense complex-matrix numerics.
//
// Hamiltonians are in linear frequency (MHz) and times in microseconds, so
// every propagator is exp(-i 2 pi H t).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace endosim {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using Ket = Eigen::VectorXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Largest Hilbert-space dimension the dense routines accept.
inline constexpr Eigen::Index max_dimension = 64;

inline double max_abs(const Operator& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermiticity_error(const Operator& a) {
  return max_abs(a - a.adjoint());
}

inline double unitarity_error(const Operator& u) {
  return max_abs(u.adjoint() * u - Operator::Identity(u.rows(), u.cols()));
}

/// Hermitian to 1e-12, relative to the largest entry once that exceeds one.
inline bool is_hermitian(const Operator& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  return hermiticity_error(a) <= tol * std::max(1.0, max_abs(a));
}

inline void require_hermitian(const Operator& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw std::invalid_argument(std::string(who) + ": operator must be square and non-empty");
  if (a.rows() > max_dimension)
    throw std::invalid_argument(std::string(who) + ": dimension exceeds dense limit");
  if (!a.allFinite())
    throw std::invalid_argument(std::string(who) + ": operator has non-finite entries");
  if (!is_hermitian(a))
    throw std::invalid_argument(std::string(who) + ": operator is not Hermitian");
}

/// A spin quantum number stored as the integer 2s.
class SpinQuantum {
 public:
  explicit SpinQuantum(double s) {
    const double twice = 2.0 * s;
    if (!std::isfinite(s) || s < 0.0 || std::abs(twice - std::round(twice)) > 1e-12)
      throw std::invalid_argument("spin quantum number must be a non-negative half-integer");
    two_s_ = static_cast<int>(std::lround(twice));
  }
  static SpinQuantum from_twice(int two_s) { return SpinQuantum(0.5 * two_s); }

  int two_s() const { return two_s_; }
  double value() const { return 0.5 * two_s_; }
  Eigen::Index dim() const { return two_s_ + 1; }
  bool half_integer() const { return two_s_ % 2 == 1; }

 private:
  int two_s_ = 0;
};

struct SpinSite {
  std::string label;
  SpinQuantum spin;
  Eigen::Index dim() const { return spin.dim(); }
};

struct SpinOperators {
  Operator x, y, z, plus, minus;
};

/// Angular-momentum matrices in the |s, m> basis ordered m = s, s-1, ..., -s.
inline SpinOperators spin_operators(SpinQuantum spin) {
  const double s = spin.value();
  const Eigen::Index d = spin.dim();
  SpinOperators ops;
  ops.z = Operator::Zero(d, d);
  ops.plus = Operator::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double m = s - static_cast<double>(i);
    ops.z(i, i) = m;
    // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>, and |m+1> sits one row above.
    if (i > 0) ops.plus(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  ops.minus = ops.plus.adjoint();
  ops.x = 0.5 * (ops.plus + ops.minus);
  ops.y = (ops.plus - ops.minus) / cplx(0.0, 2.0);
  return ops;
}

inline SpinOperators spin_operators(double s) { return spin_operators(SpinQuantum(s)); }

inline Operator kron(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Eigen::Index system_dimension(std::span<const SpinSite> system) {
  Eigen::Index d = 1;
  for (const auto& site : system) d *= site.dim();
  return d;
}

/// Lift a single-site operator into the product space of `system`.
inline Operator embed(const Operator& op, std::size_t site_index, std::span<const SpinSite> system) {
  if (site_index >= system.size())
    throw std::out_of_range("embed: site index out of range");
  const Eigen::Index d = system[site_index].dim();
  if (op.rows() != d || op.cols() != d)
    throw std::invalid_argument("embed: operator dimension does not match site '" +
                                system[site_index].label + "'");
  Operator out = Operator::Identity(1, 1);
  for (std::size_t k = 0; k < system.size(); ++k) {
    const Operator factor =
        k == site_index ? op : Operator::Identity(system[k].dim(), system[k].dim()).eval();
    out = kron(out, factor);
  }
  return out;
}

struct EigenData {
  Eigen::VectorXd values;  // ascending
  Operator vectors;        // column k belongs to values[k]
};

/// Fix each eigenvector's phase so its largest-magnitude component is real
/// and positive. Ties go to the lowest index.
inline void normalize_phases(Operator& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double mag = std::abs(vectors(i, k));
      if (mag > best_mag + 1e-12) {
        best_mag = mag;
        best = i;
      }
    }
    if (best_mag > 0.0) vectors.col(k) *= std::conj(vectors(best, k)) / best_mag;
  }
}

inline EigenData eigenbasis(const Operator& h) {
  require_hermitian(h, "eigenbasis");
  // Symmetrize so round-off asymmetry never reaches the solver.
  const Operator sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> solver(sym);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigenbasis: eigensolver did not converge");
  EigenData out{solver.eigenvalues(), solver.eigenvectors()};
  normalize_phases(out.vectors);
  return out;
}

/// exp(-i 2 pi H t) via the eigendecomposition of H.
inline Operator herm_expm(const EigenData& eig, double t_us) {
  const Eigen::Index d = eig.values.size();
  Eigen::VectorXcd phases(d);
  for (Eigen::Index k = 0; k < d; ++k)
    phases(k) = std::polar(1.0, -two_pi * eig.values(k) * t_us);
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

inline Operator herm_expm(const Operator& h, double t_us) {
  require_hermitian(h, "herm_expm");
  if (!std::isfinite(t_us)) throw std::invalid_argument("herm_expm: non-finite duration");
  if (t_us == 0.0) return Operator::Identity(h.rows(), h.cols());
  const Operator sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Operator> solver(sym);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("herm_expm: eigensolver did not converge");
  return herm_expm(EigenData{solver.eigenvalues(), solver.eigenvectors()}, t_us);
}

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

}  // namespace endosim

#endif  // ENDOSIM_SPIN_CORE_HPP
