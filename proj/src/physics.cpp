#include "wavecast/physics.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "wavecast/errors.hpp"

namespace wavecast::physics {

namespace {

// -i * c * z without going through the general complex multiply.
inline Complex minus_i_times(double c, const Complex& z) { return {c * z.imag(), -c * z.real()}; }

ComplexField step_or_throw(const ComplexField& psi, const RealField& potential, double dt, int step_index) {
  const ComplexField h1 = apply_hamiltonian(psi, potential);
  ComplexField mid(psi.grid());
  for (std::size_t i = 0; i < psi.size(); ++i) mid[i] = psi[i] + minus_i_times(0.5 * dt, h1[i]);
  const ComplexField h2 = apply_hamiltonian(mid, potential);
  ComplexField out(psi.grid());
  for (std::size_t i = 0; i < psi.size(); ++i) out[i] = psi[i] + minus_i_times(dt, h2[i]);
  if (!all_finite(out)) {
    std::string where = step_index >= 0 ? " at step " + std::to_string(step_index) : std::string();
    throw NumericError("predictor-corrector produced a non-finite value" + where + " (dt=" +
                       std::to_string(dt) + ")");
  }
  return out;
}

}  // namespace

void EvolutionConfig::validate() const {
  if (unroll_steps < 1) throw ArgumentError("unroll steps must be >= 1");
  if (dt && !(*dt > 0.0 && std::isfinite(*dt))) throw ArgumentError("dt must be positive");
  if (!potential_static) throw ArgumentError("time-dependent potentials are not supported");
}

namespace {

// Visits every voxel with its periodic Laplacian, summed over axes in order.
template <int R, class Emit>
void laplacian_rows(const ComplexField& f, Emit&& emit) {
  const auto& g = f.grid();
  std::array<double, kMaxRank> inv_h2{};
  for (int a = 0; a < R; ++a) inv_h2[static_cast<std::size_t>(a)] = 1.0 / (g.spacing(a) * g.spacing(a));
  const Complex* src = f.values().data();
  const auto n = static_cast<std::size_t>(g.extent(R - 1));
  const std::size_t rows = g.size() / n;
  std::array<std::size_t, kMaxRank> coord{};
  std::array<const Complex*, kMaxRank> up{};
  std::array<const Complex*, kMaxRank> down{};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    for (int a = 0; a + 1 < R; ++a) {
      const auto ext = static_cast<std::ptrdiff_t>(g.extent(a));
      const auto j = static_cast<std::ptrdiff_t>(coord[static_cast<std::size_t>(a)]);
      const auto stride = static_cast<std::ptrdiff_t>(g.stride(a));
      up[static_cast<std::size_t>(a)] = src + base + (j + 1 == ext ? -j : 1) * stride;
      down[static_cast<std::size_t>(a)] = src + base + (j == 0 ? ext - 1 : -1) * stride;
    }
    const Complex* row = src + base;
    for (std::size_t k = 0; k < n; ++k) {
      const Complex two_f = 2.0 * row[k];
      Complex sum = 0.0;
      for (int a = 0; a + 1 < R; ++a) {
        const auto aa = static_cast<std::size_t>(a);
        sum += (up[aa][k] + down[aa][k] - two_f) * inv_h2[aa];
      }
      const std::size_t kn = k + 1 == n ? 0 : k + 1;
      const std::size_t kp = k == 0 ? n - 1 : k - 1;
      sum += (row[kn] + row[kp] - two_f) * inv_h2[static_cast<std::size_t>(R - 1)];
      emit(base + k, sum);
    }
    for (int a = R - 1; a-- > 0;) {
      const auto aa = static_cast<std::size_t>(a);
      if (++coord[aa] < static_cast<std::size_t>(g.extent(a))) break;
      coord[aa] = 0;
    }
  }
}

template <class Emit>
void laplacian_visit(const ComplexField& f, Emit&& emit) {
  switch (f.grid().rank()) {
    case 1: laplacian_rows<1>(f, emit); break;
    case 2: laplacian_rows<2>(f, emit); break;
    default: laplacian_rows<3>(f, emit); break;
  }
}

}  // namespace

ComplexField laplacian_periodic(const ComplexField& f) {
  ComplexField out(f.grid());
  Complex* dst = out.values().data();
  laplacian_visit(f, [dst](std::size_t i, const Complex& v) { dst[i] = v; });
  return out;
}

ComplexField apply_hamiltonian(const ComplexField& psi, const RealField& potential) {
  require_same_grid(psi.grid(), potential.grid(), "apply_hamiltonian");
  ComplexField out(psi.grid());
  Complex* dst = out.values().data();
  const Complex* p = psi.values().data();
  const double* v = potential.values().data();
  laplacian_visit(psi, [=](std::size_t i, const Complex& lap) { dst[i] = -0.5 * lap + v[i] * p[i]; });
  return out;
}

ComplexField step_predictor_corrector(const ComplexField& psi, const RealField& potential, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
  return step_or_throw(psi, potential, dt, -1);
}

Evolution evolve(const ComplexField& psi0, const RealField& potential, const EvolutionConfig& cfg) {
  cfg.validate();
  require_same_grid(psi0.grid(), potential.grid(), "evolve");
  const double dt = cfg.step();
  Evolution ev{psi0, {}};
  ev.norm_trace.reserve(static_cast<std::size_t>(cfg.unroll_steps) + 1);
  ev.norm_trace.push_back(l2_norm(psi0));
  for (int n = 0; n < cfg.unroll_steps; ++n) {
    ev.psi = step_or_throw(ev.psi, potential, dt, n);
    ev.norm_trace.push_back(l2_norm(ev.psi));
  }
  return ev;
}

ComplexLU::ComplexLU(std::vector<Complex> matrix, std::size_t n) : n_(n), lu_(std::move(matrix)), pivot_(n) {
  if (lu_.size() != n * n) throw ArgumentError("ComplexLU: matrix is not n x n");
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_[k * n + k]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double v = std::abs(lu_[r * n + k]);
      if (v > best) {
        best = v;
        p = r;
      }
    }
    if (!(best > 0.0)) throw NumericError("ComplexLU: singular matrix at column " + std::to_string(k));
    pivot_[k] = p;
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(lu_[k * n + c], lu_[p * n + c]);
    }
    const Complex inv = 1.0 / lu_[k * n + k];
    for (std::size_t r = k + 1; r < n; ++r) {
      Complex& l = lu_[r * n + k];
      if (l == Complex{}) continue;
      l *= inv;
      const Complex* urow = &lu_[k * n];
      Complex* row = &lu_[r * n];
      for (std::size_t c = k + 1; c < n; ++c) row[c] -= l * urow[c];
    }
  }
}

std::vector<Complex> ComplexLU::solve(std::vector<Complex> b) const {
  if (b.size() != n_) throw ArgumentError("ComplexLU: rhs size mismatch");
  for (std::size_t k = 0; k < n_; ++k) {
    if (pivot_[k] != k) std::swap(b[k], b[pivot_[k]]);
  }
  for (std::size_t r = 1; r < n_; ++r) {
    Complex acc = b[r];
    for (std::size_t c = 0; c < r; ++c) acc -= lu_[r * n_ + c] * b[c];
    b[r] = acc;
  }
  for (std::size_t r = n_; r-- > 0;) {
    Complex acc = b[r];
    for (std::size_t c = r + 1; c < n_; ++c) acc -= lu_[r * n_ + c] * b[c];
    b[r] = acc / lu_[r * n_ + r];
  }
  return b;
}

std::vector<double> assemble_hamiltonian(const RealField& potential) {
  const auto& g = potential.grid();
  const std::size_t m = g.size();
  if (m > kMaxDenseVoxels) {
    throw CapabilityError("dense Hamiltonian limited to " + std::to_string(kMaxDenseVoxels) +
                          " voxels, grid " + g.describe() + " has " + std::to_string(m));
  }
  std::vector<double> h(m * m, 0.0);
  for (std::size_t idx = 0; idx < m; ++idx) {
    auto c = g.coords(idx);
    h[idx * m + idx] += potential[idx];
    for (int a = 0; a < g.rank(); ++a) {
      const auto ai = static_cast<std::size_t>(a);
      const double w = 0.5 / (g.spacing(a) * g.spacing(a));
      const auto n = g.extent(a);
      const auto orig = c[ai];
      h[idx * m + idx] += 2.0 * w;
      for (std::int64_t d : {-1, 1}) {
        c[ai] = (orig + d + n) % n;
        h[idx * m + g.flat_index(c)] -= w;
      }
      c[ai] = orig;
    }
  }
  return h;
}

namespace {

std::vector<Complex> cn_lhs(const std::vector<double>& h, std::size_t m, double dt) {
  std::vector<Complex> a(m * m);
  for (std::size_t i = 0; i < m * m; ++i) a[i] = Complex(0.0, 0.5 * dt * h[i]);
  for (std::size_t i = 0; i < m; ++i) a[i * m + i] += 1.0;
  return a;
}

}  // namespace

CrankNicolsonSolver::CrankNicolsonSolver(const RealField& potential, double dt)
    : grid_(potential.grid()),
      dt_(dt),
      hamiltonian_(assemble_hamiltonian(potential)),
      lhs_(cn_lhs(hamiltonian_, potential.size(), dt), potential.size()) {
  if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
}

ComplexField CrankNicolsonSolver::step(const ComplexField& psi) const {
  require_same_grid(psi.grid(), grid_, "crank_nicolson");
  const std::size_t m = psi.size();
  std::vector<Complex> rhs(m);
  for (std::size_t r = 0; r < m; ++r) {
    Complex hpsi{};
    const double* row = &hamiltonian_[r * m];
    for (std::size_t c = 0; c < m; ++c) {
      if (row[c] != 0.0) hpsi += row[c] * psi[c];
    }
    rhs[r] = psi[r] + minus_i_times(0.5 * dt_, hpsi);
  }
  return ComplexField(grid_, lhs_.solve(std::move(rhs)));
}

ComplexField CrankNicolsonSolver::run(const ComplexField& psi0, int steps) const {
  ComplexField psi = psi0;
  for (int n = 0; n < steps; ++n) psi = step(psi);
  return psi;
}

ComplexField crank_nicolson_reference(const ComplexField& psi0, const RealField& potential, double dt,
                                      int steps) {
  require_same_grid(psi0.grid(), potential.grid(), "crank_nicolson_reference");
  return CrankNicolsonSolver(potential, dt).run(psi0, steps);
}

double spectral_bound(double v_max_abs, const GridSpec& grid) {
  double lambda = std::abs(v_max_abs);
  for (int a = 0; a < grid.rank(); ++a) lambda += 2.0 / (grid.spacing(a) * grid.spacing(a));
  return lambda;
}

double norm_drift_bound(double v_max_abs, const GridSpec& grid, double dt, int steps) {
  if (steps <= 0) return 0.0;
  const double z = spectral_bound(v_max_abs, grid) * dt;
  const double z2 = z * z;
  return std::expm1(0.5 * steps * std::log1p(0.25 * z2 * z2));
}

RealField energy_density(const ComplexField& psi, const RealField& potential) {
  return squared_modulus(apply_hamiltonian(psi, potential));
}

}  // namespace wavecast::physics
