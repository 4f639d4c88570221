#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <unsupported/Eigen/MatrixFunctions>

#include "test_support.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/physics.hpp"

using namespace wavecast;
using namespace wavecast::physics;
using wavecast::testing::max_abs_diff;
using wavecast::testing::random_complex;
using wavecast::testing::random_real;

namespace {

// cos(2 pi k x / L) along `axis`, constant along the others.
ComplexField cosine_mode(const GridSpec& g, int axis, int k) {
  ComplexField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto c = g.coords(i);
    f[i] = std::cos(2.0 * std::numbers::pi * k * static_cast<double>(c[axis]) / static_cast<double>(g.extent(axis)));
  }
  return f;
}

// Dense -1/2 laplacian + diag(V) built by enumerating each voxel's axis neighbours.
Eigen::MatrixXcd dense_hamiltonian(const RealField& v) {
  const auto& g = v.grid();
  const auto m = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m, m);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = g.coords(i);
    const auto row = static_cast<Eigen::Index>(i);
    h(row, row) += v[i] + static_cast<double>(g.rank());
    for (int a = 0; a < g.rank(); ++a) {
      for (int d : {-1, 1}) {
        auto n = c;
        n[a] = (c[a] + d + g.extent(a)) % g.extent(a);
        h(row, static_cast<Eigen::Index>(g.flat_index(n))) -= 0.5;
      }
    }
  }
  return h;
}

Eigen::VectorXcd to_vec(const ComplexField& f) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v(static_cast<Eigen::Index>(i)) = f[i];
  return v;
}

double max_abs_diff(const ComplexField& f, const Eigen::VectorXcd& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i] - v(static_cast<Eigen::Index>(i))));
  return m;
}

}  // namespace

TEST_CASE("periodic laplacian") {
  SUBCASE("constant field maps to zero") {
    const ComplexField f(GridSpec{5, 6, 7}, Complex(2.0, -1.0));
    const auto l = laplacian_periodic(f);
    for (const auto& z : l.values()) CHECK(std::abs(z) == 0.0);
  }
  SUBCASE("7-point stencil of an impulse") {
    const GridSpec g{6, 6, 6};
    ComplexField f(g);
    const std::array<std::int64_t, 3> at{0, 2, 5};
    f[g.flat_index(at)] = 1.0;
    const auto l = laplacian_periodic(f);
    int plus_ones = 0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (i == g.flat_index(at)) {
        CHECK(l[i] == Complex(-6.0, 0.0));
      } else if (l[i] == Complex(1.0, 0.0)) {
        ++plus_ones;
      } else {
        CHECK(l[i] == Complex(0.0, 0.0));
      }
    }
    CHECK(plus_ones == 6);
  }
  SUBCASE("cosine eigenfield") {
    const GridSpec g{8, 5, 4};
    const auto f = cosine_mode(g, 0, 1);
    const double eig = 2.0 * std::cos(2.0 * std::numbers::pi / 8.0) - 2.0;
    CHECK(eig == doctest::Approx(-0.585786).epsilon(1e-6));
    const auto l = laplacian_periodic(f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(l[i] - eig * f[i]) < 1e-12);
  }
}

TEST_CASE("hamiltonian") {
  SUBCASE("constant psi sees only the potential") {
    const GridSpec g{4, 6};
    const auto h = apply_hamiltonian(ComplexField(g, 1.0), RealField(g, 0.3));
    for (const auto& z : h.values()) CHECK(std::abs(z - Complex(0.3, 0.0)) < 1e-15);
  }
  SUBCASE("free cosine mode") {
    const GridSpec g{10, 4};
    for (int k : {1, 2, 3}) {
      const auto f = cosine_mode(g, 0, k);
      const double lam = 1.0 - std::cos(2.0 * std::numbers::pi * k / 10.0);
      const auto h = apply_hamiltonian(f, RealField(g));
      for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(h[i] - lam * f[i]) < 1e-12);
    }
  }
  SUBCASE("matches the dense matrix on 6^3") {
    const GridSpec g{6, 6, 6};
    const auto psi = random_complex(g, 4);
    const auto v = random_real(g, 4);
    const Eigen::VectorXcd ref = dense_hamiltonian(v) * to_vec(psi);
    CHECK(max_abs_diff(apply_hamiltonian(psi, v), ref) < 1e-12);
  }
  SUBCASE("grid mismatch") {
    CHECK_THROWS_AS(apply_hamiltonian(ComplexField(GridSpec{4, 4}), RealField(GridSpec{4, 5})), ArgumentError);
  }
}

TEST_CASE("predictor-corrector step") {
  SUBCASE("constant psi with zero potential is a fixed point") {
    const ComplexField psi(GridSpec{4, 4, 4}, Complex(0.3, 0.1));
    CHECK(step_predictor_corrector(psi, RealField(psi.grid()), 0.1) == psi);
  }
  SUBCASE("eigenfield amplification factor") {
    const GridSpec g{8, 6};
    const double v = 0.4, dt = 0.05;
    const auto psi = cosine_mode(g, 0, 1);
    const double lam = 1.0 - std::cos(2.0 * std::numbers::pi / 8.0) + v;
    const Complex factor(1.0 - 0.5 * lam * dt * lam * dt, -lam * dt);
    const auto out = step_predictor_corrector(psi, RealField(g, v), dt);
    for (std::size_t i = 0; i < psi.size(); ++i) CHECK(std::abs(out[i] - factor * psi[i]) < 1e-12);
    const double ratio = l2_norm(out) / l2_norm(psi);
    CHECK(std::abs(ratio - std::sqrt(1.0 + std::pow(lam * dt, 4) / 4.0)) < 1e-12);
  }
  SUBCASE("non-finite input is reported") {
    ComplexField psi(GridSpec{4, 4});
    psi[3] = Complex(std::numeric_limits<double>::infinity(), 0.0);
    CHECK_THROWS_AS(step_predictor_corrector(psi, RealField(psi.grid()), 0.1), NumericError);
    CHECK_THROWS_AS(step_predictor_corrector(ComplexField(GridSpec{4, 4}), RealField(GridSpec{4, 4}), 0.0),
                    ArgumentError);
  }
}

TEST_CASE("evolve") {
  const GridSpec g{6, 6, 6};
  SUBCASE("single step equals one predictor-corrector call") {
    const auto psi = random_complex(g, 1);
    const auto v = random_real(g, 1);
    EvolutionConfig cfg;
    cfg.unroll_steps = 1;
    const auto ev = evolve(psi, v, cfg);
    CHECK(ev.psi == step_predictor_corrector(psi, v, 1.0));
    REQUIRE(ev.norm_trace.size() == 2);
    CHECK(ev.norm_trace[0] == l2_norm(psi));
  }
  SUBCASE("default dt spans unit time") {
    EvolutionConfig cfg;
    cfg.unroll_steps = 40;
    CHECK(cfg.step() * 40 == 1.0);
    cfg.unroll_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  }
  SUBCASE("eigenfield norm trace") {
    const GridSpec g2{8, 4};
    const auto psi = cosine_mode(g2, 0, 1);
    const double v = -0.3;
    const double lam = 1.0 - std::cos(2.0 * std::numbers::pi / 8.0) + v;
    EvolutionConfig cfg;
    cfg.unroll_steps = 25;
    const double dt = cfg.step();
    const auto ev = evolve(psi, RealField(g2, v), cfg);
    for (int n = 0; n <= 25; ++n) {
      const double expected = ev.norm_trace[0] * std::pow(1.0 + std::pow(lam * dt, 4) / 4.0, n / 2.0);
      CHECK(std::abs(ev.norm_trace[static_cast<std::size_t>(n)] - expected) < 1e-12 * expected);
      if (n > 0) CHECK(ev.norm_trace[static_cast<std::size_t>(n)] >= ev.norm_trace[static_cast<std::size_t>(n - 1)]);
    }
  }
  SUBCASE("halving dt shrinks the gap to Crank-Nicolson about fourfold") {
    const GridSpec g8{8, 8, 8};
    const auto psi = random_complex(g8, 21);
    const auto v = random_real(g8, 21);
    EvolutionConfig a, b;
    a.unroll_steps = 50;
    b.unroll_steps = 100;
    const double e1 = max_abs_diff(evolve(psi, v, a).psi, crank_nicolson_reference(psi, v, 0.02, 50));
    const double e2 = max_abs_diff(evolve(psi, v, b).psi, crank_nicolson_reference(psi, v, 0.01, 100));
    const double c = e1 / (0.02 * 0.02);
    MESSAGE("measured constant C = " << c << ", ratio = " << e1 / e2);
    CHECK(e1 <= c * 0.02 * 0.02);
    CHECK(e1 / e2 >= 3.5);
    CHECK(e1 / e2 <= 4.5);
  }
}

TEST_CASE("crank-nicolson reference") {
  SUBCASE("unitary over 100 steps") {
    const GridSpec g{6, 6, 6};
    const auto psi = random_complex(g, 8);
    const auto v = random_real(g, 8);
    const auto out = crank_nicolson_reference(psi, v, 0.05, 100);
    CHECK(std::abs(l2_norm(out) / l2_norm(psi) - 1.0) < 1e-10);
  }
  SUBCASE("Cayley factor on an eigenfield") {
    const GridSpec g{8, 4};
    const auto psi = cosine_mode(g, 0, 1);
    const double lam = 1.0 - std::cos(2.0 * std::numbers::pi / 8.0);
    const double dt = 0.1;
    const Complex factor = Complex(1.0, -0.5 * lam * dt) / Complex(1.0, 0.5 * lam * dt);
    const auto out = crank_nicolson_reference(psi, RealField(g), dt, 3);
    const Complex f3 = factor * factor * factor;
    for (std::size_t i = 0; i < psi.size(); ++i) CHECK(std::abs(out[i] - f3 * psi[i]) < 1e-10);
  }
  SUBCASE("one step agrees with the exact propagator to third order") {
    const GridSpec g{6, 6, 6};
    const auto psi = random_complex(g, 13);
    const auto v = random_real(g, 13);
    const Eigen::MatrixXcd h = dense_hamiltonian(v);
    auto err = [&](double dt) {
      const Eigen::MatrixXcd u = (Complex(0.0, -dt) * h).exp();
      return max_abs_diff(crank_nicolson_reference(psi, v, dt, 1), u * to_vec(psi));
    };
    const double e1 = err(0.02), e2 = err(0.01);
    MESSAGE("local error ratio " << e1 / e2);
    CHECK(e1 / e2 > 6.5);
    CHECK(e1 / e2 < 9.5);
  }
  SUBCASE("capability limit") {
    CHECK_THROWS_AS(crank_nicolson_reference(ComplexField(GridSpec{17, 16, 16}), RealField(GridSpec{17, 16, 16}), 0.1, 1),
                    CapabilityError);
  }
}

TEST_CASE("norm drift bound") {
  const GridSpec g3{8, 8, 8};
  CHECK(norm_drift_bound(1.0, g3, 0.02, 0) == 0.0);
  const double b = norm_drift_bound(1.0, g3, 0.02, 50);
  CHECK(b == doctest::Approx(std::pow(1.0 + std::pow(0.14, 4) / 4.0, 25.0) - 1.0).epsilon(1e-12));
  CHECK(b == doctest::Approx(2.40e-3).epsilon(5e-3));

  SUBCASE("bounds measured drift on random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const GridSpec g = seed % 2 ? GridSpec{6, 6, 6} : GridSpec{12, 12};
      const auto psi = random_complex(g, seed);
      const auto v = random_real(g, seed + 1000);
      EvolutionConfig cfg;
      cfg.unroll_steps = 50;
      const auto ev = evolve(psi, v, cfg);
      const double drift = std::abs(ev.norm_trace.back() / ev.norm_trace.front() - 1.0);
      CHECK(drift <= norm_drift_bound(1.0, g, 0.02, 50));
    }
  }
}

TEST_CASE("energy density") {
  const GridSpec g{5, 6};
  CHECK(energy_density(ComplexField(g), RealField(g, 0.5)) == RealField(g));
  const auto e = energy_density(ComplexField(g, 1.0), RealField(g, 0.5));
  for (double v : e.values()) CHECK(v == doctest::Approx(0.25));
  const auto psi = random_complex(g, 2);
  const auto v = random_real(g, 2);
  const auto h = apply_hamiltonian(psi, v);
  const auto ed = energy_density(psi, v);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(ed[i] == std::norm(h[i]));
}

TEST_CASE("evolution properties") {
  const GridSpec g{6, 6, 6};
  EvolutionConfig cfg;
  cfg.unroll_steps = 20;
  SUBCASE("linearity in psi") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto psi = random_complex(g, seed);
      const auto v = random_real(g, seed);
      rng::CounterStream s(seed, rng::Purpose::Check, 5);
      const Complex alpha(s.uniform(-2, 2), s.uniform(-2, 2));
      ComplexField scaled = psi;
      for (auto& z : scaled.values()) z *= alpha;
      auto ref = evolve(psi, v, cfg).psi;
      for (auto& z : ref.values()) z *= alpha;
      CHECK(max_abs_diff(evolve(scaled, v, cfg).psi, ref) < 1e-10 * wavecast::testing::max_abs(ref));
    }
  }
  SUBCASE("translation equivariance") {
    const auto psi = random_complex(g, 3);
    const auto v = random_real(g, 3);
    const std::vector<std::int64_t> shift{2, -1, 3};
    const auto a = evolve(roll(psi, shift), roll(v, shift), cfg).psi;
    const auto b = roll(evolve(psi, v, cfg).psi, shift);
    CHECK(max_abs_diff(a, b) < 1e-12);
  }
  SUBCASE("global second order against Crank-Nicolson") {
    const GridSpec g8{8, 8, 8};
    const auto psi = random_complex(g8, 77);
    const auto v = random_real(g8, 77);
    std::vector<double> log_dt, log_err;
    for (int n : {10, 20, 40, 80}) {
      EvolutionConfig c;
      c.unroll_steps = n;
      const double err = max_abs_diff(evolve(psi, v, c).psi, crank_nicolson_reference(psi, v, 1.0 / n, n));
      log_dt.push_back(std::log(1.0 / n));
      log_err.push_back(std::log(err));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      mx += log_dt[i] / 4;
      my += log_err[i] / 4;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      sxy += (log_dt[i] - mx) * (log_err[i] - my);
      sxx += (log_dt[i] - mx) * (log_dt[i] - mx);
    }
    const double slope = sxy / sxx;
    MESSAGE("log-log slope " << slope);
    CHECK(slope >= 1.7);
    CHECK(slope <= 2.3);
  }
}
