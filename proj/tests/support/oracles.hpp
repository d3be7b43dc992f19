#pragma once

// Independent reference implementations used only by tests. Everything here
// is built from explicit 2x2 matrices and Kronecker products, diagonalized
// by cyclic Jacobi rotations and propagated by direct fixed-step RK4, so it
// shares no algorithmic path with the library under test.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qmag/spin_chain.hpp"

namespace qmag::oracles {

Eigen::Matrix2cd pauli_x();
Eigen::Matrix2cd pauli_y();
Eigen::Matrix2cd pauli_z();
Eigen::Matrix2cd sigma_minus();

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Single-site operator embedded in an n-site chain, site 1 leftmost.
ComplexMatrix op_at(int n_sites, int site, const Eigen::Matrix2cd& op);

/// Chain Hamiltonian assembled purely from Kronecker products.
ComplexMatrix chain_hamiltonian(const SpinChainModel& model);

struct JacobiResult {
  Eigen::VectorXd eigenvalues;   // ascending
  ComplexMatrix eigenvectors;    // columns, matching order
};

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
JacobiResult jacobi_hermitian(ComplexMatrix a, double tol = 1e-13,
                              int max_sweeps = 100);

/// Fixed-step RK4 integration of d psi/dt = -i H psi, sampled at `times`.
std::vector<ComplexVector> rk4_schrodinger(const ComplexMatrix& h,
                                           const ComplexVector& psi0,
                                           const std::vector<double>& times,
                                           double step = 1e-3);

/// Fixed-step RK4 integration of the master equation with dense operators.
std::vector<ComplexMatrix> rk4_lindblad(const ComplexMatrix& h,
                                        const std::vector<ComplexMatrix>& jumps,
                                        double gamma,
                                        const ComplexMatrix& rho0,
                                        const std::vector<double>& times,
                                        double step = 1e-3);

/// Observable value (sigma+1)/2 at a site from a state or density matrix.
double curve_value(const ComplexVector& psi, const ComplexMatrix& sigma_op);
double curve_value(const ComplexMatrix& rho, const ComplexMatrix& sigma_op);

}  // namespace qmag::oracles
