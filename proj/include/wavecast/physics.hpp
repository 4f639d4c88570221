#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "wavecast/field.hpp"

namespace wavecast::physics {

// Unrolled evolution settings. The step defaults to 1/N so the unroll always spans unit time.
struct EvolutionConfig {
  int unroll_steps = 50;
  std::optional<double> dt;
  bool potential_static = true;

  double step() const { return dt ? *dt : 1.0 / static_cast<double>(unroll_steps); }
  void validate() const;
};

// Sum over axes of (f[x+e_a] + f[x-e_a] - 2 f[x]) / h_a^2 with periodic wrap.
ComplexField laplacian_periodic(const ComplexField& f);

// H psi = -1/2 laplacian(psi) + V psi.
ComplexField apply_hamiltonian(const ComplexField& psi, const RealField& potential);

// psi - i dt H (psi - i dt/2 H psi). Throws NumericError on a non-finite result.
ComplexField step_predictor_corrector(const ComplexField& psi, const RealField& potential, double dt);

struct Evolution {
  ComplexField psi;
  // norms[0] is the initial norm, norms[n] the norm after step n.
  std::vector<double> norm_trace;
};

Evolution evolve(const ComplexField& psi0, const RealField& potential, const EvolutionConfig& cfg);

// Dense LU with partial pivoting, used by the Crank-Nicolson oracle.
class ComplexLU {
 public:
  // Factors the row-major n x n matrix. Throws NumericError if a pivot vanishes.
  ComplexLU(std::vector<Complex> matrix, std::size_t n);
  std::vector<Complex> solve(std::vector<Complex> rhs) const;
  std::size_t order() const { return n_; }

 private:
  std::size_t n_;
  std::vector<Complex> lu_;
  std::vector<std::size_t> pivot_;
};

inline constexpr std::size_t kMaxDenseVoxels = 4096;

// Row-major dense matrix of the periodic stencil Hamiltonian, size^2 entries.
std::vector<double> assemble_hamiltonian(const RealField& potential);

// Exact implicit reference: (I + i dt/2 H) psi' = (I - i dt/2 H) psi, factored once.
class CrankNicolsonSolver {
 public:
  CrankNicolsonSolver(const RealField& potential, double dt);
  ComplexField step(const ComplexField& psi) const;
  ComplexField run(const ComplexField& psi0, int steps) const;

 private:
  GridSpec grid_;
  double dt_;
  std::vector<double> hamiltonian_;
  ComplexLU lhs_;
};

ComplexField crank_nicolson_reference(const ComplexField& psi0, const RealField& potential, double dt,
                                      int steps);

// Largest |eigenvalue| bound of H: sum_a 2/h_a^2 + max|V|.
double spectral_bound(double v_max_abs, const GridSpec& grid);

// A-priori relative norm growth of N predictor-corrector steps:
// (1 + (lambda_max dt)^4 / 4)^(N/2) - 1.
double norm_drift_bound(double v_max_abs, const GridSpec& grid, double dt, int steps);

// |H psi|^2 per voxel.
RealField energy_density(const ComplexField& psi, const RealField& potential);

}  // namespace wavecast::physics
