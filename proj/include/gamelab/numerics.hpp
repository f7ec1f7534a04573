#pragma once

// Small dense kernel shared by the replicator, nlmarkov and rainbow modules.
// Everything here is a pure function of its arguments.

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <sstream>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "gamelab/error.hpp"

namespace gamelab::numerics {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

inline constexpr Eigen::Index kMaxDetDim = 8;
inline constexpr Eigen::Index kMaxEigenDim = 6;

/// Pivots below this fraction of the largest pivot are treated as zero.
inline constexpr double kDefaultSingularity = 1e-12;

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* op) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << op << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::Dimension, os.str());
  }
}

template <typename Derived>
typename Derived::Scalar det(const Eigen::MatrixBase<Derived>& m) {
  require_square(m, "det");
  if (m.rows() > kMaxDetDim) {
    throw Error(ErrorKind::Unsupported, "det: dimension above 8 is not supported");
  }
  using Scalar = typename Derived::Scalar;
  if (m.rows() == 0) return Scalar(1);
  Matrix<Scalar> a = m;
  return a.partialPivLu().determinant();
}

/// All eigenvalues with multiplicity (real Schur / Francis QR under the hood).
template <typename Derived>
std::vector<std::complex<typename Derived::Scalar>> eigenvalues(
    const Eigen::MatrixBase<Derived>& m) {
  require_square(m, "eigenvalues");
  if (m.rows() > kMaxEigenDim) {
    throw Error(ErrorKind::Unsupported, "eigenvalues: dimension above 6 is not supported");
  }
  using Scalar = typename Derived::Scalar;
  std::vector<std::complex<Scalar>> out;
  if (m.rows() == 0) return out;
  Matrix<Scalar> a = m;
  Eigen::EigenSolver<Matrix<Scalar>> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::Contract, "eigenvalues: QR iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  out.reserve(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) out.push_back(ev(i));
  return out;
}

template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> solve_linear(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b,
                                               double singularity = kDefaultSingularity) {
  require_square(a, "solve_linear");
  using Scalar = typename DerivedA::Scalar;
  if (b.size() != a.rows()) {
    throw Error(ErrorKind::Dimension, "solve_linear: right-hand side has the wrong length");
  }
  Matrix<Scalar> am = a;
  Eigen::PartialPivLU<Matrix<Scalar>> lu(am);
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const Scalar largest = pivots.size() ? pivots.maxCoeff() : Scalar(0);
  if (pivots.size() && (largest == Scalar(0) || pivots.minCoeff() <= Scalar(singularity) * largest)) {
    throw Error(ErrorKind::Singular, "solve_linear: matrix is singular to working precision");
  }
  Vector<Scalar> rhs = b;
  return lu.solve(rhs);
}

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<Vector<Scalar>> states;

  const Vector<Scalar>& back() const { return states.back(); }
};

template <typename Scalar>
using VectorField = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

template <typename Scalar>
Vector<Scalar> checked_eval(const VectorField<Scalar>& field, const Vector<Scalar>& x,
                            Scalar t) {
  Vector<Scalar> v = field(x);
  if (!v.allFinite()) {
    std::ostringstream os;
    os << "integrate_rk4: non-finite field value at t=" << t;
    throw Error(ErrorKind::BlowUp, os.str());
  }
  return v;
}

/// One classical Runge-Kutta step.
template <typename Scalar>
Vector<Scalar> rk4_step(const VectorField<Scalar>& field, const Vector<Scalar>& x, Scalar t,
                        Scalar dt) {
  const Vector<Scalar> k1 = checked_eval(field, x, t);
  const Vector<Scalar> k2 = checked_eval<Scalar>(field, x + (dt / 2) * k1, t + dt / 2);
  const Vector<Scalar> k3 = checked_eval<Scalar>(field, x + (dt / 2) * k2, t + dt / 2);
  const Vector<Scalar> k4 = checked_eval<Scalar>(field, x + dt * k3, t + dt);
  return x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// Number of fixed steps needed so that steps*dt >= t_end.
template <typename Scalar>
std::size_t step_count(Scalar t_end, Scalar dt) {
  if (!(dt > Scalar(0))) throw Error(ErrorKind::Domain, "integrate_rk4: dt must be positive");
  if (!(t_end >= Scalar(0))) return 0;
  const Scalar ratio = t_end / dt;
  auto n = static_cast<std::size_t>(std::ceil(ratio - Scalar(1e-9) * std::max(Scalar(1), ratio)));
  while (static_cast<Scalar>(n) * dt < t_end * (Scalar(1) - Scalar(1e-15))) ++n;
  return n;
}

/// Fixed-step RK4. States are recorded every `record_every` steps plus the
/// final state.
template <typename Scalar>
Trajectory<Scalar> integrate_rk4(const VectorField<Scalar>& field,
                                 const std::type_identity_t<Vector<Scalar>>& x0,
                                 std::type_identity_t<Scalar> t_end,
                                 std::type_identity_t<Scalar> dt, std::size_t record_every = 1) {
  const std::size_t steps = step_count(t_end, dt);
  if (!x0.allFinite()) throw Error(ErrorKind::Domain, "integrate_rk4: non-finite initial state");
  if (record_every == 0) record_every = 1;
  Trajectory<Scalar> traj;
  traj.times.push_back(Scalar(0));
  traj.states.push_back(x0);
  Vector<Scalar> x = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Scalar t = static_cast<Scalar>(k) * dt;
    x = rk4_step(field, x, t, dt);
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "integrate_rk4: state blew up at t=" << t + dt;
      throw Error(ErrorKind::BlowUp, os.str());
    }
    if ((k + 1) % record_every == 0 || k + 1 == steps) {
      traj.times.push_back(static_cast<Scalar>(k + 1) * dt);
      traj.states.push_back(x);
    }
  }
  return traj;
}

}  // namespace gamelab::numerics
