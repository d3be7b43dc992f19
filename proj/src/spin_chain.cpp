#include "qmag/spin_chain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <sstream>

namespace qmag {

namespace {

constexpr Complex kI{0.0, 1.0};

int site_bit(int n_sites, int site) { return n_sites - site; }

void check_times(const std::vector<double>& times) {
  if (times.empty()) {
    throw std::invalid_argument("time grid is empty");
  }
  if (times.front() < 0.0) {
    throw std::invalid_argument("time grid starts before t = 0");
  }
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) {
      throw std::invalid_argument("time grid must be strictly increasing");
    }
  }
}

// The zero-field ground state depends only on (n_sites, j_z) and is needed
// once per curve; cache it across calls. Guarded for concurrent callers.
ComplexVector zero_field_ground_state(int n_sites, double j_z, int site_cap) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, ComplexVector> cache;
  const std::pair<int, double> key{n_sites, j_z};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  SpinChainModel critical;
  critical.n_sites = n_sites;
  critical.j_z = j_z;
  ComplexVector psi0 = ground_state(build_hamiltonian(critical, site_cap));
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, std::move(psi0)).first->second;
}

double observable_value(double sigma_expectation, double tolerance) {
  double value = 0.5 * (sigma_expectation + 1.0);
  if (value < -tolerance || value > 1.0 + tolerance) {
    std::ostringstream msg;
    msg << "observable value " << value << " out of [0,1] beyond tolerance "
        << tolerance;
    throw std::runtime_error(msg.str());
  }
  return std::clamp(value, 0.0, 1.0);
}

// Term-wise action of the chain Hamiltonian; avoids dense matvecs in the
// master-equation right-hand side.
struct ChainAction {
  int n_sites;
  int dim;
  double g_x;
  double g_y;
  Eigen::VectorXd zz_diag;

  explicit ChainAction(const SpinChainModel& model)
      : n_sites(model.n_sites),
        dim(1 << model.n_sites),
        g_x(model.g_x),
        g_y(model.g_y),
        zz_diag(Eigen::VectorXd::Zero(1 << model.n_sites)) {
    for (int k = 0; k < dim; ++k) {
      double d = 0.0;
      for (int i = 1; i < n_sites; ++i) {
        int bp = site_bit(n_sites, i);
        int bq = site_bit(n_sites, i + 1);
        double zp = 1.0 - 2.0 * ((k >> bp) & 1);
        double zq = 1.0 - 2.0 * ((k >> bq) & 1);
        d += -model.j_z * zp * zq;
      }
      zz_diag(k) = d;
    }
  }

  void apply(const ComplexVector& in, ComplexVector& out) const {
    out.setZero();
    for (int k = 0; k < dim; ++k) {
      const Complex c = in(k);
      out(k) += zz_diag(k) * c;
      for (int i = 1; i < n_sites; ++i) {
        int bp = site_bit(n_sites, i);
        int bq = site_bit(n_sites, i + 1);
        if (((k >> bp) & 1) != ((k >> bq) & 1)) {
          out(k ^ (1 << bp) ^ (1 << bq)) += -2.0 * c;
        }
      }
      for (int i = 1; i <= n_sites; ++i) {
        int bp = site_bit(n_sites, i);
        int flipped = k ^ (1 << bp);
        if (g_x != 0.0) out(flipped) += g_x * c;
        if (g_y != 0.0) {
          double zs = 1.0 - 2.0 * ((k >> bp) & 1);
          out(flipped) += g_y * kI * zs * c;
        }
      }
    }
  }

  // out = H * in, column by column.
  void apply_matrix(const ComplexMatrix& in, ComplexMatrix& out,
                    ComplexVector& scratch_in, ComplexVector& scratch_out) const {
    for (int j = 0; j < in.cols(); ++j) {
      scratch_in = in.col(j);
      apply(scratch_in, scratch_out);
      out.col(j) = scratch_out;
    }
  }
};

// dr/dt = -i[H, r] + gamma sum_k (s-_k r s+_k - 1/2 {s+_k s-_k, r}) with the
// per-site lowering operators written as bit operations.
struct ChainLindbladRhs {
  ChainAction action;
  double gamma;
  Eigen::VectorXd up_count;
  mutable ComplexMatrix hr;
  mutable ComplexMatrix rh_adj;
  mutable ComplexVector scratch_in;
  mutable ComplexVector scratch_out;

  ChainLindbladRhs(const SpinChainModel& model, double gamma_in)
      : action(model),
        gamma(gamma_in),
        up_count(Eigen::VectorXd::Zero(action.dim)),
        hr(action.dim, action.dim),
        rh_adj(action.dim, action.dim),
        scratch_in(action.dim),
        scratch_out(action.dim) {
    for (int k = 0; k < action.dim; ++k) {
      up_count(k) = action.n_sites - std::popcount(static_cast<unsigned>(k));
    }
  }

  void operator()(const ComplexMatrix& rho, ComplexMatrix& out) const {
    const int dim = action.dim;
    action.apply_matrix(rho, hr, scratch_in, scratch_out);
    ComplexMatrix rho_adj = rho.adjoint();
    action.apply_matrix(rho_adj, rh_adj, scratch_in, scratch_out);
    out = -kI * (hr - rh_adj.adjoint());
    if (gamma == 0.0) return;
    for (int b = 0; b < dim; ++b) {
      for (int a = 0; a < dim; ++a) {
        Complex sandwich{0.0, 0.0};
        for (int i = 1; i <= action.n_sites; ++i) {
          int bp = site_bit(action.n_sites, i);
          if (((a >> bp) & 1) && ((b >> bp) & 1)) {
            sandwich += rho(a ^ (1 << bp), b ^ (1 << bp));
          }
        }
        out(a, b) +=
            gamma * (sandwich - 0.5 * (up_count(a) + up_count(b)) * rho(a, b));
      }
    }
  }
};

// Generic dense right-hand side for arbitrary (H, jumps).
struct DenseLindbladRhs {
  ComplexMatrix h;
  std::vector<ComplexMatrix> jumps;
  std::vector<ComplexMatrix> jump_adjoints;
  ComplexMatrix damping;  // gamma * sum L^dag L
  double gamma;

  explicit DenseLindbladRhs(const LindbladProblem& problem)
      : h(problem.h), jumps(problem.jumps), gamma(problem.gamma) {
    damping = ComplexMatrix::Zero(h.rows(), h.cols());
    for (const auto& jump : jumps) {
      jump_adjoints.push_back(jump.adjoint());
      damping += gamma * jump.adjoint() * jump;
    }
  }

  void operator()(const ComplexMatrix& rho, ComplexMatrix& out) const {
    out = -kI * (h * rho - rho * h);
    if (gamma == 0.0 || jumps.empty()) return;
    for (std::size_t k = 0; k < jumps.size(); ++k) {
      out += gamma * (jumps[k] * rho * jump_adjoints[k]);
    }
    out -= 0.5 * (damping * rho + rho * damping);
  }
};

template <typename Rhs>
void rk4_step(const Rhs& rhs, ComplexMatrix& rho, double h, ComplexMatrix& k1,
              ComplexMatrix& k2, ComplexMatrix& k3, ComplexMatrix& k4,
              ComplexMatrix& tmp) {
  rhs(rho, k1);
  tmp = rho + (0.5 * h) * k1;
  rhs(tmp, k2);
  tmp = rho + (0.5 * h) * k2;
  rhs(tmp, k3);
  tmp = rho + h * k3;
  rhs(tmp, k4);
  rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Rhs>
std::vector<ComplexMatrix> rk4_trajectory(const Rhs& rhs,
                                          const ComplexMatrix& rho0,
                                          const std::vector<double>& times,
                                          double step) {
  const auto dim = rho0.rows();
  ComplexMatrix rho = rho0;
  ComplexMatrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim),
      tmp(dim, dim);
  std::vector<ComplexMatrix> out;
  out.reserve(times.size());
  double t = 0.0;
  for (double target : times) {
    double remaining = target - t;
    while (remaining > 1e-12) {
      double h = std::min(step, remaining);
      rk4_step(rhs, rho, h, k1, k2, k3, k4, tmp);
      t += h;
      remaining = target - t;
    }
    out.push_back(rho);
  }
  return out;
}

template <typename Rhs>
std::vector<ComplexMatrix> propagate_with_check(const Rhs& rhs,
                                                const ComplexMatrix& rho0,
                                                const std::vector<double>& times,
                                                double step) {
  check_times(times);
  if (!(step > 0.0)) {
    throw std::invalid_argument("integrator step must be positive");
  }
  auto coarse = rk4_trajectory(rhs, rho0, times, step);
  auto fine = rk4_trajectory(rhs, rho0, times, 0.5 * step);
  double worst = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    worst = std::max(worst,
                     (coarse[j] - fine[j]).cwiseAbs().maxCoeff());
  }
  if (worst > kLindbladStepTolerance) {
    std::ostringstream msg;
    msg << "integrator step " << step << " too coarse: half-step check "
        << worst << " exceeds " << kLindbladStepTolerance
        << "; retry with step <= " << step / 4.0;
    throw StepSizeError(msg.str());
  }
  // Richardson combination of the two runs; kills the leading h^4 error.
  std::vector<ComplexMatrix> result;
  result.reserve(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    result.push_back((16.0 * fine[j] - coarse[j]) / 15.0);
  }
  return result;
}

}  // namespace

void validate_model(const SpinChainModel& model, int site_cap) {
  if (model.n_sites < 2) {
    throw std::invalid_argument("n_sites must be at least 2");
  }
  if (model.n_sites % 2 != 0) {
    throw std::invalid_argument(
        "n_sites must be even (the observable sits at site n_sites/2)");
  }
  if (model.n_sites > site_cap) {
    std::ostringstream msg;
    msg << "n_sites = " << model.n_sites << " exceeds the cap " << site_cap;
    throw std::invalid_argument(msg.str());
  }
  if (!std::isfinite(model.j_z) || !std::isfinite(model.g_x) ||
      !std::isfinite(model.g_y)) {
    throw std::invalid_argument("model couplings must be finite");
  }
}

std::vector<double> make_time_grid(double t_final, int n_t) {
  if (n_t < 2 || !(t_final > 0.0)) {
    throw std::invalid_argument("time grid needs n_t >= 2 and t_final > 0");
  }
  std::vector<double> times(n_t);
  for (int j = 0; j < n_t; ++j) {
    times[j] = t_final * j / (n_t - 1);
  }
  return times;
}

ComplexMatrix build_hamiltonian(const SpinChainModel& model, int site_cap) {
  validate_model(model, site_cap);
  const int n = model.n_sites;
  const int dim = 1 << n;
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    for (int i = 1; i < n; ++i) {
      int bp = site_bit(n, i);
      int bq = site_bit(n, i + 1);
      double zp = 1.0 - 2.0 * ((k >> bp) & 1);
      double zq = 1.0 - 2.0 * ((k >> bq) & 1);
      h(k, k) += -model.j_z * zp * zq;
      if (((k >> bp) & 1) != ((k >> bq) & 1)) {
        h(k ^ (1 << bp) ^ (1 << bq), k) += -2.0;
      }
    }
    for (int i = 1; i <= n; ++i) {
      int bp = site_bit(n, i);
      int flipped = k ^ (1 << bp);
      if (model.g_x != 0.0) h(flipped, k) += model.g_x;
      if (model.g_y != 0.0) {
        double zs = 1.0 - 2.0 * ((k >> bp) & 1);
        h(flipped, k) += model.g_y * kI * zs;
      }
    }
  }
  return h;
}

void fix_global_phase(ComplexVector& state) {
  Eigen::Index argmax = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    double mag = std::abs(state(i));
    if (mag > best) {
      best = mag;
      argmax = i;
    }
  }
  if (best <= 0.0) {
    throw std::invalid_argument("cannot phase-fix the zero vector");
  }
  Complex pivot = state(argmax);
  state *= std::conj(pivot) / std::abs(pivot);
}

ComplexVector ground_state(const ComplexMatrix& h) {
  if (h.rows() != h.cols() || h.rows() < 1) {
    throw std::invalid_argument("ground_state needs a square matrix");
  }
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("ground_state needs a Hermitian matrix");
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const auto& evals = solver.eigenvalues();
  const double cutoff = evals(0) + 1e-10;
  // Among near-degenerate candidates, pick the eigenvector whose
  // largest-magnitude amplitude has the lowest basis index.
  Eigen::Index chosen = 0;
  Eigen::Index chosen_peak = h.rows();
  for (Eigen::Index c = 0; c < evals.size() && evals(c) <= cutoff; ++c) {
    ComplexVector candidate = solver.eigenvectors().col(c);
    Eigen::Index peak = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < candidate.size(); ++i) {
      double mag = std::abs(candidate(i));
      if (mag > best) {
        best = mag;
        peak = i;
      }
    }
    if (peak < chosen_peak) {
      chosen_peak = peak;
      chosen = c;
    }
  }
  ComplexVector state = solver.eigenvectors().col(chosen);
  state.normalize();
  fix_global_phase(state);
  return state;
}

std::vector<ComplexVector> evolved_states(const SpinChainModel& model,
                                          const std::vector<double>& times,
                                          int site_cap) {
  validate_model(model, site_cap);
  check_times(times);
  ComplexVector psi0 =
      zero_field_ground_state(model.n_sites, model.j_z, site_cap);

  ComplexMatrix h = build_hamiltonian(model, site_cap);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const auto& basis = solver.eigenvectors();
  const auto& evals = solver.eigenvalues();
  ComplexVector coeffs = basis.adjoint() * psi0;

  std::vector<ComplexVector> states;
  states.reserve(times.size());
  ComplexVector rotated(coeffs.size());
  for (double t : times) {
    for (Eigen::Index m = 0; m < coeffs.size(); ++m) {
      rotated(m) = std::exp(-kI * evals(m) * t) * coeffs(m);
    }
    states.push_back(basis * rotated);
  }
  return states;
}

ObservableCurve expectation_curve_at_site(const SpinChainModel& model,
                                          ObservableAxis axis, int site,
                                          const std::vector<double>& times,
                                          int site_cap) {
  if (site < 1 || site > model.n_sites) {
    throw std::invalid_argument("observable site out of range");
  }
  auto states = evolved_states(model, times, site_cap);
  ObservableCurve curve;
  curve.times = times;
  curve.values.reserve(times.size());
  ComplexVector applied(states.front().size());
  for (const auto& psi : states) {
    apply_site_pauli(axis, model.n_sites, site, psi, applied);
    double sigma = psi.dot(applied).real();
    curve.values.push_back(observable_value(sigma, 1e-10));
  }
  return curve;
}

ObservableCurve evolve_expectation(const SpinChainModel& model,
                                   ObservableAxis axis,
                                   const std::vector<double>& times,
                                   int site_cap) {
  return expectation_curve_at_site(model, axis, model.n_sites / 2, times,
                                   site_cap);
}

std::vector<ComplexMatrix> lindblad_propagate(const LindbladProblem& problem,
                                              const ComplexMatrix& rho0,
                                              const std::vector<double>& times,
                                              double step) {
  if (problem.gamma < 0.0) {
    throw std::invalid_argument("decay rate gamma must be >= 0");
  }
  if (problem.h.rows() != problem.h.cols() || rho0.rows() != problem.h.rows() ||
      rho0.rows() != rho0.cols()) {
    throw std::invalid_argument("lindblad_propagate: dimension mismatch");
  }
  DenseLindbladRhs rhs(problem);
  return propagate_with_check(rhs, rho0, times, step);
}

ObservableCurve evolve_lindblad(const SpinChainModel& model, double gamma,
                                ObservableAxis axis,
                                const std::vector<double>& times,
                                int site_cap) {
  validate_model(model, site_cap);
  if (gamma < 0.0) {
    throw std::invalid_argument("decay rate gamma must be >= 0");
  }
  ComplexVector psi0 =
      zero_field_ground_state(model.n_sites, model.j_z, site_cap);
  ComplexMatrix rho0 = psi0 * psi0.adjoint();

  ChainLindbladRhs rhs(model, gamma);
  auto states = propagate_with_check(rhs, rho0, times, kLindbladStep);

  ComplexMatrix sigma = site_pauli(model.n_sites, model.n_sites / 2,
                                   axis == ObservableAxis::X ? 'x' : 'y');
  ObservableCurve curve;
  curve.times = times;
  curve.values.reserve(times.size());
  for (const auto& rho : states) {
    double trace_err = std::abs(rho.trace() - Complex{1.0, 0.0});
    if (trace_err > 1e-8) {
      std::ostringstream msg;
      msg << "trace drift " << trace_err << " exceeds 1e-8";
      throw StepSizeError(msg.str());
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8) {
      throw StepSizeError("density matrix lost hermiticity beyond 1e-8");
    }
    double value = (sigma * rho).trace().real();
    curve.values.push_back(observable_value(value, 1e-6));
  }
  return curve;
}

ComplexMatrix site_pauli(int n_sites, int site, char which) {
  if (site < 1 || site > n_sites) {
    throw std::invalid_argument("site index out of range");
  }
  const int dim = 1 << n_sites;
  const int bp = site_bit(n_sites, site);
  ComplexMatrix op = ComplexMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    int b = (k >> bp) & 1;
    switch (which) {
      case 'x':
        op(k ^ (1 << bp), k) = 1.0;
        break;
      case 'y':
        op(k ^ (1 << bp), k) = kI * (1.0 - 2.0 * b);
        break;
      case 'z':
        op(k, k) = 1.0 - 2.0 * b;
        break;
      case '-':  // lowering: |0> (up) -> |1> (down)
        if (b == 0) op(k ^ (1 << bp), k) = 1.0;
        break;
      default:
        throw std::invalid_argument("unknown operator tag");
    }
  }
  return op;
}

void apply_site_pauli(ObservableAxis axis, int n_sites, int site,
                      const ComplexVector& in, ComplexVector& out) {
  const int bp = site_bit(n_sites, site);
  const int dim = 1 << n_sites;
  if (in.size() != dim) {
    throw std::invalid_argument("apply_site_pauli: dimension mismatch");
  }
  out.resize(dim);
  if (axis == ObservableAxis::X) {
    for (int k = 0; k < dim; ++k) {
      out(k ^ (1 << bp)) = in(k);
    }
  } else {
    for (int k = 0; k < dim; ++k) {
      double zs = 1.0 - 2.0 * ((k >> bp) & 1);
      out(k ^ (1 << bp)) = kI * zs * in(k);
    }
  }
}

}  // namespace qmag
