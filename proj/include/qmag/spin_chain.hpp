#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

namespace qmag {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Ferromagnetic XXZ chain with open boundaries in a transverse field,
///   H = -sum_i (sx_i sx_{i+1} + sy_i sy_{i+1} + j_z sz_i sz_{i+1})
///       + g_x sum_i sx_i + g_y sum_i sy_i.
///
/// Basis convention (fixed so stored fixtures are bit-exact): computational
/// basis index k holds site i (1-based) in bit (n_sites - i); bit value 0 is
/// the spin-up eigenstate |0> of sz, and sigma_minus|0> = |1>. Site 1 is the
/// leftmost tensor factor.
struct SpinChainModel {
  int n_sites = 2;
  double j_z = 0.0;
  double g_x = 0.0;
  double g_y = 0.0;
};

inline constexpr int kDefaultUnitaryCap = 12;
inline constexpr int kDefaultLindbladCap = 6;

/// Rejects odd, too-small, too-large or non-finite models.
void validate_model(const SpinChainModel& model, int site_cap);

enum class ObservableAxis { X, Y };

/// Expectation values of a projector-valued local observable (sigma+1)/2 at a
/// grid of time instants. Values live in [0, 1]; times strictly increase.
struct ObservableCurve {
  std::vector<double> times;
  std::vector<double> values;
};

/// The protocol time grid {0, dt, ..., t_final}; defaults give 101 instants
/// on [0, 5].
std::vector<double> make_time_grid(double t_final = 5.0, int n_t = 101);

/// Dense Hamiltonian matrix of the model, dimension 2^n_sites. Hermitian to
/// machine precision by construction.
ComplexMatrix build_hamiltonian(const SpinChainModel& model,
                                int site_cap = kDefaultUnitaryCap);

/// Eigenvector of the smallest eigenvalue of a Hermitian matrix, with a
/// deterministic selection among eigenvectors within 1e-10 of the minimum
/// (the one whose largest-magnitude amplitude sits at the lowest basis
/// index) and the global phase fixed so that amplitude is real and >= 0.
ComplexVector ground_state(const ComplexMatrix& h);

/// Fixes the global phase in place: the largest-magnitude amplitude becomes
/// real and non-negative.
void fix_global_phase(ComplexVector& state);

/// State at time t under exp(-iHt) from the zero-field critical ground state,
/// computed through one eigendecomposition of H. `times` may hold any grid.
std::vector<ComplexVector> evolved_states(const SpinChainModel& model,
                                          const std::vector<double>& times,
                                          int site_cap = kDefaultUnitaryCap);

/// <(sigma_axis at site n_sites/2 + 1)/2> along unitary evolution from the
/// zero-field ground state.
ObservableCurve evolve_expectation(const SpinChainModel& model,
                                   ObservableAxis axis,
                                   const std::vector<double>& times,
                                   int site_cap = kDefaultUnitaryCap);

/// Same curve with the observable on an arbitrary 1-based site (used for the
/// reflection-symmetry checks; evolve_expectation pins site = n_sites/2).
ObservableCurve expectation_curve_at_site(const SpinChainModel& model,
                                          ObservableAxis axis, int site,
                                          const std::vector<double>& times,
                                          int site_cap = kDefaultUnitaryCap);

/// Raised when the fixed-step master-equation integrator cannot meet its
/// accuracy target (half-step check disagrees).
struct StepSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Generic Lindblad problem: drho/dt = -i[H,rho]
///   + gamma * sum_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}).
struct LindbladProblem {
  ComplexMatrix h;
  std::vector<ComplexMatrix> jumps;
  double gamma = 0.0;
};

inline constexpr double kLindbladStep = 5e-3;
inline constexpr double kLindbladStepTolerance = 1e-5;

/// Fixed-step RK4 propagation of a Lindblad problem, reporting the density
/// matrix at each requested instant. Runs at `step` and step/2 and returns
/// the Richardson combination; if the two runs disagree beyond
/// kLindbladStepTolerance entrywise the step is too coarse and a
/// StepSizeError is thrown. Trace is never renormalized.
std::vector<ComplexMatrix> lindblad_propagate(const LindbladProblem& problem,
                                              const ComplexMatrix& rho0,
                                              const std::vector<double>& times,
                                              double step = kLindbladStep);

/// Observable curve under decoherence: per-site sigma_minus jumps at equal
/// rate gamma, chain-specialized right-hand side, initial state the
/// zero-field ground state.
ObservableCurve evolve_lindblad(const SpinChainModel& model, double gamma,
                                ObservableAxis axis,
                                const std::vector<double>& times,
                                int site_cap = kDefaultLindbladCap);

/// Dense 2^n x 2^n matrix of a single-site Pauli operator (axis in {X, Y})
/// or lowering operator; site is 1-based.
ComplexMatrix site_pauli(int n_sites, int site, char which);

/// out = (sigma_axis at site) * in, via bit arithmetic.
void apply_site_pauli(ObservableAxis axis, int n_sites, int site,
                      const ComplexVector& in, ComplexVector& out);

}  // namespace qmag
