// Copyright 2026 The qdsps Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QDSPS_HILBERT_HPP
#define QDSPS_HILBERT_HPP

#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "qdsps/common.hpp"

namespace qdsps {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Two-level emitter tensored with a Fock ladder truncated at `n_fock` photons.
/// Basis index = emitter * (n_fock + 1) + photons, emitter 0 = ground, 1 = excited.
struct HilbertConfig {
  int n_fock = 2;

  int levels() const { return n_fock + 1; }
  int dim() const { return 2 * levels(); }

  void validate() const { require(n_fock >= 1, "n_fock must be >= 1"); }

  int index(bool excited, int photons) const {
    require(photons >= 0 && photons <= n_fock, "photon number outside the Fock truncation");
    return (excited ? 1 : 0) * levels() + photons;
  }
};

struct Operator {
  Matrix matrix;
  std::string label;

  Eigen::Index dim() const { return matrix.rows(); }

  bool is_hermitian(double rel_tol = 1e-12) const {
    const double scale = std::max(matrix.norm(), 1.0);
    return (matrix - matrix.adjoint()).norm() <= rel_tol * scale;
  }

  Operator adjoint() const { return {matrix.adjoint(), label + "^dag"}; }
};

inline Operator operator*(const Operator& lhs, const Operator& rhs) {
  require(lhs.dim() == rhs.dim(), "operator dimension mismatch");
  return {lhs.matrix * rhs.matrix, lhs.label + "*" + rhs.label};
}

struct DensityMatrix {
  Matrix matrix;
  double time_ps = 0.0;

  Eigen::Index dim() const { return matrix.rows(); }
  double trace() const { return matrix.trace().real(); }

  static DensityMatrix pure(const StateVector& psi, double time_ps = 0.0) {
    const double norm2 = psi.squaredNorm();
    require(norm2 > 0.0, "state vector has zero norm");
    return {psi * psi.adjoint() / norm2, time_ps};
  }

  double hermiticity_error() const { return (matrix - matrix.adjoint()).norm() / std::max(matrix.norm(), 1e-300); }

  double min_eigenvalue() const {
    const Matrix herm = 0.5 * (matrix + matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
  }

  /// Throws unless trace, Hermiticity and positivity hold to the given tolerances.
  void check_valid(double trace_tol = 1e-9, double herm_tol = 1e-10, double eig_tol = 1e-8) const {
    require(matrix.rows() == matrix.cols(), "density matrix must be square");
    require(std::abs(trace() - 1.0) <= trace_tol, "density matrix trace differs from 1");
    require(hermiticity_error() <= herm_tol, "density matrix is not Hermitian");
    require(min_eigenvalue() >= -eig_tol, "density matrix has a negative eigenvalue");
  }
};

namespace ops {

inline Operator identity(const HilbertConfig& cfg) {
  return {Matrix::Identity(cfg.dim(), cfg.dim()), "I"};
}

/// Emitter lowering operator σ⁻ ⊗ 1.
inline Operator sigma_minus(const HilbertConfig& cfg) {
  Matrix m = Matrix::Zero(cfg.dim(), cfg.dim());
  for (int n = 0; n <= cfg.n_fock; ++n) m(cfg.index(false, n), cfg.index(true, n)) = 1.0;
  return {m, "sigma-"};
}

inline Operator sigma_plus(const HilbertConfig& cfg) { return {sigma_minus(cfg).matrix.adjoint(), "sigma+"}; }

/// Cavity annihilation operator 1 ⊗ a.
inline Operator annihilation(const HilbertConfig& cfg) {
  Matrix m = Matrix::Zero(cfg.dim(), cfg.dim());
  for (int e = 0; e < 2; ++e) {
    for (int n = 1; n <= cfg.n_fock; ++n) m(cfg.index(e == 1, n - 1), cfg.index(e == 1, n)) = std::sqrt(double(n));
  }
  return {m, "a"};
}

inline Operator excited_population(const HilbertConfig& cfg) {
  return {sigma_plus(cfg).matrix * sigma_minus(cfg).matrix, "sigma+sigma-"};
}

inline Operator photon_number(const HilbertConfig& cfg) {
  const Matrix a = annihilation(cfg).matrix;
  return {a.adjoint() * a, "a^dag a"};
}

inline StateVector basis_state(const HilbertConfig& cfg, bool excited, int photons) {
  StateVector psi = StateVector::Zero(cfg.dim());
  psi(cfg.index(excited, photons)) = 1.0;
  return psi;
}

}  // namespace ops

/// Tr(op ρ).
inline Complex expectation(const Operator& op, const DensityMatrix& rho) {
  require(op.dim() == rho.dim(), "operator and density matrix dimensions differ");
  return (op.matrix * rho.matrix).trace();
}

/// Real expectation of a Hermitian observable; the imaginary part must vanish.
inline double expectation_real(const Operator& op, const DensityMatrix& rho) {
  const Complex value = expectation(op, rho);
  if (std::abs(value.imag()) >= 1e-10) {
    throw std::domain_error("expectation of " + op.label + " has a non-negligible imaginary part");
  }
  return value.real();
}

}  // namespace qdsps

#endif  // QDSPS_HILBERT_HPP
