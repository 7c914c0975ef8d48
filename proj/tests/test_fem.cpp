#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "doctest.h"

#include "augsub/errors.hpp"
#include "augsub/fem.hpp"
#include "augsub/linalg.hpp"
#include "support.hpp"

using namespace augsub;
using testsupport::make_rng;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Hat function of vertex (a, b) on build_uniform(n), evaluated cell by cell
/// without going through the library.
double uniform_hat(int n, int a, int b, double x, double y) {
  const int i = std::min(static_cast<int>(std::floor(x * n)), n - 1);
  const int j = std::min(static_cast<int>(std::floor(y * n)), n - 1);
  const double s = x * n - i;
  const double t = y * n - j;
  double value = 0.0;
  auto add = [&](int vi, int vj, double w) {
    if (vi == a && vj == b) value += w;
  };
  if (s >= t) {
    add(i, j, 1.0 - s);
    add(i + 1, j, s - t);
    add(i + 1, j + 1, t);
  } else {
    add(i, j, 1.0 - t);
    add(i + 1, j + 1, s);
    add(i, j + 1, t - s);
  }
  return value;
}

double bubble(double x, double y) { return x * (1.0 - x) * y * (1.0 - y); }

CoefficientField constant_field(const Eigen::Matrix2d& d, double rho) {
  return {[d](double, double) { return d; }, [rho](double, double) { return rho; }};
}

}  // namespace

TEST_CASE("interior DOF counts") {
  CHECK(build_space(build_uniform(2), 1).num_interior() == 1);
  CHECK(build_space(build_uniform(8), 4).num_interior() == 961);
  CHECK(build_space(build_uniform(256), 1).num_interior() == 65025);
  for (int n = 1; n <= 5; ++n)
    for (int k = 1; k <= 4; ++k) {
      const auto space = build_space(build_uniform(n), k);
      CHECK(space.num_nodes() == static_cast<std::size_t>((n * k + 1) * (n * k + 1)));
      CHECK(space.num_interior() == static_cast<std::size_t>((n * k - 1) * (n * k - 1)));
    }
}

TEST_CASE("unsupported degree") {
  CHECK_THROWS_AS(build_space(build_uniform(2), 0), ConfigError);
  CHECK_THROWS_AS(build_space(build_uniform(2), 5), ConfigError);
  CHECK_THROWS_AS(LagrangeBasis(7), ConfigError);
}

TEST_CASE("quadrature integrates barycentric monomials exactly") {
  // Mean over the reference triangle of l1^a l2^b is 2 a! b! / (a+b+2)!.
  for (int degree = 0; degree <= 10; ++degree) {
    const auto rule = triangle_rule(degree);
    CHECK(rule.exact_degree >= degree);
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        double q = 0.0;
        for (std::size_t p = 0; p < rule.points.size(); ++p)
          q += rule.weights[p] * std::pow(rule.points[p][1], a) * std::pow(rule.points[p][2], b);
        const double exact = 2.0 * std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
        CHECK(q == doctest::Approx(exact).epsilon(1e-14));
      }
  }
}

TEST_CASE("Lagrange basis is nodal and sums to one") {
  auto rng = make_rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 1; k <= 4; ++k) {
    const LagrangeBasis basis(k);
    CHECK(basis.size() == (k + 1) * (k + 2) / 2);
    std::vector<double> values(basis.size());
    for (int j = 0; j < basis.size(); ++j) {
      const auto& m = basis.nodes()[j];
      basis.values({m[0] / double(k), m[1] / double(k), m[2] / double(k)}, values);
      for (int i = 0; i < basis.size(); ++i) CHECK(values[i] == doctest::Approx(i == j ? 1.0 : 0.0));
    }
    std::vector<std::array<double, 3>> grads(basis.size());
    for (int trial = 0; trial < 20; ++trial) {
      double l1 = u(rng), l2 = u(rng);
      if (l1 + l2 > 1.0) {
        l1 = 1.0 - l1;
        l2 = 1.0 - l2;
      }
      const std::array<double, 3> bary{1.0 - l1 - l2, l1, l2};
      basis.values(bary, values);
      double sum = 0.0;
      for (double v : values) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));

      // Central differences in each barycentric direction.
      basis.barycentric_gradients(bary, grads);
      const double h = 1e-6;
      std::vector<double> plus(basis.size()), minus(basis.size());
      for (int d = 0; d < 3; ++d) {
        auto bp = bary, bm = bary;
        bp[d] += h;
        bm[d] -= h;
        basis.values(bp, plus);
        basis.values(bm, minus);
        for (int i = 0; i < basis.size(); ++i) CHECK(grads[i][d] == doctest::Approx((plus[i] - minus[i]) / (2 * h)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("P1 on the 2x2 mesh: A = [4], B = [1/8]") {
  const auto forms = assemble_forms(build_space(build_uniform(2), 1), CoefficientField::laplace());
  REQUIRE(forms.stiffness.rows() == 1);
  CHECK(forms.stiffness.coeff(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(forms.mass.coeff(0, 0) == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
}

TEST_CASE("P4 reproduces the bubble energies exactly") {
  // u = x(1-x)y(1-y) lies in P4 and vanishes on the boundary:
  // int |grad u|^2 = 2 (1/3)(1/30) = 1/45, int u^2 = (1/30)^2.
  for (int n : {1, 2, 3, 5}) {
    const auto space = build_space(build_uniform(n), 4);
    const auto forms = assemble_forms(space, CoefficientField::laplace());
    const Vector u = interpolate_nodal(space, bubble);
    CHECK(u.dot(forms.stiffness * u) == doctest::Approx(1.0 / 45.0).epsilon(1e-13));
    CHECK(u.dot(forms.mass * u) == doctest::Approx(1.0 / 900.0).epsilon(1e-13));
  }
}

TEST_CASE("variable coefficients: D = diag(1+x, 1), rho = 1+x") {
  // int (1+x) u_x^2 + u_y^2 = 1/60 + 1/90, int (1+x) u^2 = (1/20)(1/30).
  const CoefficientField field{[](double x, double) { return Eigen::Matrix2d{{1.0 + x, 0.0}, {0.0, 1.0}}; },
                               [](double x, double) { return 1.0 + x; }};
  const auto space = build_space(build_uniform(3), 4);
  AssemblyOptions options;
  options.extra_quadrature_degree = 2;  // the mass integrand has degree 9
  const auto forms = assemble_forms(space, field, options);
  const Vector u = interpolate_nodal(space, bubble);
  CHECK(u.dot(forms.stiffness * u) == doctest::Approx(1.0 / 36.0).epsilon(1e-13));
  CHECK(u.dot(forms.mass * u) == doctest::Approx(1.0 / 600.0).epsilon(1e-13));
}

TEST_CASE("assembly symmetry and definiteness over seeded instances") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> pick_n(1, 6), pick_k(1, 4);
    std::uniform_real_distribution<double> u(0.2, 3.0), off(-0.5, 0.5);
    const int n = pick_n(rng);
    const int k = pick_k(rng);
    const double d11 = u(rng), d22 = u(rng), d12 = off(rng) * std::sqrt(d11 * d22);
    const double c0 = u(rng), c1 = off(rng);
    const CoefficientField field{[=](double x, double y) {
                                   const double s = 1.0 + c1 * x * y;
                                   return Eigen::Matrix2d{{s * d11, s * d12}, {s * d12, s * d22}};
                                 },
                                 [=](double x, double y) { return c0 + 0.3 * std::sin(x + 2 * y); }};
    CAPTURE(seed);
    const auto space = build_space(build_uniform(n), k);
    if (space.num_interior() == 0) continue;
    const auto forms = assemble_forms(space, field);
    const SparseMatrix at = forms.stiffness.transpose();
    const SparseMatrix bt = forms.mass.transpose();
    CHECK(max_abs(Matrix(forms.stiffness - at)) == 0.0);
    CHECK(max_abs(Matrix(forms.mass - bt)) == 0.0);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = testsupport::random_vector(rng, forms.stiffness.rows());
      CHECK(x.dot(forms.stiffness * x) > 0.0);
      CHECK(x.dot(forms.mass * x) > 0.0);
    }
    CHECK_NOTHROW(SpdSolver(forms.stiffness));
  }
}

TEST_CASE("partition of unity: total mass is the area") {
  AssemblyOptions options;
  options.eliminate_dirichlet = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = make_rng(100 + seed);
    std::uniform_int_distribution<int> pick_n(1, 7), pick_k(1, 4);
    const int n = pick_n(rng), k = pick_k(rng);
    CAPTURE(n);
    CAPTURE(k);
    const auto forms = assemble_forms(build_space(build_uniform(n), k), CoefficientField::laplace(), options);
    CHECK(Matrix(forms.mass).sum() == doctest::Approx(1.0).epsilon(1e-13));
    // Constants are in the kernel of the unconstrained stiffness matrix.
    CHECK((forms.stiffness * Vector::Ones(forms.stiffness.rows())).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("quadrature two degrees higher changes nothing for constant coefficients") {
  for (int k = 1; k <= 4; ++k) {
    const auto space = build_space(build_uniform(3), k);
    const auto field = constant_field(Eigen::Matrix2d{{2.0, 0.3}, {0.3, 1.0}}, 1.7);
    AssemblyOptions richer;
    richer.extra_quadrature_degree = 2;
    const auto base = assemble_forms(space, field);
    const auto more = assemble_forms(space, field, richer);
    CHECK(max_abs(Matrix(base.stiffness - more.stiffness)) <= 1e-13 * max_abs(Matrix(base.stiffness)));
    CHECK(max_abs(Matrix(base.mass - more.mass)) <= 1e-13 * max_abs(Matrix(base.mass)));
  }
}

TEST_CASE("non-positive coefficients are rejected") {
  const auto space = build_space(build_uniform(2), 1);
  CHECK_THROWS_AS(assemble_forms(space, constant_field(Eigen::Matrix2d::Identity(), 0.0)), ConfigError);
  CHECK_THROWS_AS(assemble_forms(space, constant_field(-Eigen::Matrix2d::Identity(), 1.0)), ConfigError);
}

TEST_CASE("prolongation onto the same space is the identity") {
  for (int k = 1; k <= 4; ++k) {
    const auto space = build_space(build_uniform(3), k);
    const Matrix p = Matrix(prolongation(space, space));
    CHECK(max_abs(p - Matrix::Identity(p.rows(), p.cols())) < 1e-14);
  }
}

TEST_CASE("P1 to P4 columns are hat values at the P4 nodes") {
  const int n = 4;
  const auto coarse = build_space(build_uniform(n), 1);
  const auto fine = build_space(build_uniform(n), 4);
  const Matrix p = Matrix(prolongation(coarse, fine));
  REQUIRE(p.rows() == static_cast<Eigen::Index>(fine.num_interior()));
  REQUIRE(p.cols() == static_cast<Eigen::Index>(coarse.num_interior()));
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const Point2 v = coarse.dof_coords[coarse.interior_dofs[j]];
    const int a = static_cast<int>(std::lround(v.x * n)), b = static_cast<int>(std::lround(v.y * n));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const Point2 q = fine.dof_coords[fine.interior_dofs[i]];
      CHECK(p(i, j) == doctest::Approx(uniform_hat(n, a, b, q.x, q.y)).epsilon(1e-13));
    }
  }
}

TEST_CASE("h-nesting: edge midpoints take the mean of the endpoints") {
  const int n = 3;
  const auto coarse = build_space(build_uniform(n), 1);
  const auto fine = build_space(refine_regular(build_uniform(n)), 1);
  const auto p = prolongation(coarse, fine);
  auto rng = make_rng(5);
  const Vector c = testsupport::random_vector(rng, p.cols());
  const Vector f = p * c;
  auto coarse_value = [&](int a, int b) {
    if (a <= 0 || b <= 0 || a >= n || b >= n) return 0.0;
    return c[(b - 1) * (n - 1) + (a - 1)];  // lexicographic by (y, x)
  };
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const Point2 q = fine.dof_coords[fine.interior_dofs[i]];
    const int fx = static_cast<int>(std::lround(q.x * 2 * n)), fy = static_cast<int>(std::lround(q.y * 2 * n));
    const double expected =
        0.5 * (coarse_value(fx / 2, fy / 2) + coarse_value((fx + 1) / 2, (fy + 1) / 2));
    CHECK(f[i] == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("Galerkin nesting over seeded instances") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto rng = make_rng(1000 + seed);
    std::uniform_int_distribution<int> pick_n(1, 4), pick_mode(0, 1), pick_k(1, 4), pick_r(1, 2);
    std::uniform_real_distribution<double> u(0.3, 3.0), off(-0.4, 0.4);
    const int n = pick_n(rng);
    const double d11 = u(rng), d22 = u(rng);
    const auto field = constant_field(Eigen::Matrix2d{{d11, off(rng)}, {0.0, d22}}, u(rng));
    const auto coarse_mesh = build_uniform(n);
    FeSpace coarse, fine;
    if (pick_mode(rng) == 0) {
      const int kf = pick_k(rng);
      std::uniform_int_distribution<int> pick_kc(1, kf);
      coarse = build_space(coarse_mesh, pick_kc(rng));
      fine = build_space(coarse_mesh, kf);
    } else {
      auto fine_mesh = coarse_mesh;
      for (int r = pick_r(rng); r > 0; --r) fine_mesh = refine_regular(fine_mesh);
      const int k = std::min(pick_k(rng), 2);
      coarse = build_space(coarse_mesh, k);
      fine = build_space(fine_mesh, k);
    }
    if (coarse.num_interior() == 0) continue;
    CAPTURE(seed);
    const auto p = prolongation(coarse, fine);
    const auto cf = assemble_forms(coarse, field);
    const auto ff = assemble_forms(fine, field);
    const Matrix a_nested = Matrix(p.transpose() * ff.stiffness * p);
    const Matrix b_nested = Matrix(p.transpose() * ff.mass * p);
    CHECK(max_abs(a_nested - Matrix(cf.stiffness)) <= 1e-10 * max_abs(Matrix(cf.stiffness)));
    CHECK(max_abs(b_nested - Matrix(cf.mass)) <= 1e-10 * max_abs(Matrix(cf.mass)));
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("non-nested spaces are rejected") {
  CHECK_THROWS_AS(prolongation(build_space(build_uniform(3), 1), build_space(build_uniform(4), 1)), ConfigError);
  CHECK_THROWS_AS(prolongation(build_space(build_uniform(2), 2), build_space(build_uniform(2), 1)), ConfigError);
  CHECK_THROWS_AS(prolongation(build_space(build_uniform(4), 1), build_space(build_uniform(2), 1)), ConfigError);
}

TEST_CASE("smallest eigenvalue decreases under refinement and degree increase") {
  const double continuum = 2.0 * kPi * kPi;
  auto lambda1 = [](int n, int k) {
    const auto forms = assemble_forms(build_space(build_uniform(n), k), CoefficientField::laplace());
    return smallest_eigenpairs(forms.stiffness, forms.mass, 1).eigenvalues[0];
  };
  double previous = lambda1(2, 1);
  CHECK(previous == doctest::Approx(32.0));
  for (int n : {4, 8, 16}) {
    const double current = lambda1(n, 1);
    CHECK(current <= previous);
    CHECK(current >= continuum);
    previous = current;
  }
  previous = lambda1(3, 1);
  for (int k = 2; k <= 4; ++k) {
    const double current = lambda1(3, k);
    CHECK(current <= previous);
    CHECK(current >= continuum);
    previous = current;
  }
}

TEST_CASE("nodal interpolation") {
  const auto p1 = build_space(build_uniform(2), 1);
  CHECK(interpolate_nodal(p1, [](double, double) { return 0.0; }).isZero());
  const Vector s = interpolate_nodal(p1, [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); });
  REQUIRE(s.size() == 1);
  CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-15));

  // Interior lattice points of P_k on build_uniform(n), enumerated by (y, x).
  for (int k = 1; k <= 4; ++k) {
    const int n = 3, m = n * k;
    const auto space = build_space(build_uniform(n), k);
    auto f = [](double x, double y) { return x * std::sin(kPi * y) + 0.25 * y * y; };
    const Vector v = interpolate_nodal(space, f);
    Eigen::Index i = 0;
    for (int b = 1; b < m; ++b)
      for (int a = 1; a < m; ++a) CHECK(v[i++] == doctest::Approx(f(double(a) / m, double(b) / m)).epsilon(1e-14));
  }
}

TEST_CASE("Matrix Market output") {
  const auto forms = assemble_forms(build_space(build_uniform(3), 1), CoefficientField::laplace());
  std::ostringstream out;
  write_matrix_market(forms.stiffness, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "%%MatrixMarket matrix coordinate real symmetric");
  int rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  CHECK(rows == 4);
  CHECK(cols == 4);
  Matrix rebuilt = Matrix::Zero(rows, cols);
  for (int e = 0; e < nnz; ++e) {
    int i = 0, j = 0;
    double v = 0.0;
    in >> i >> j >> v;
    CHECK(i >= j);
    rebuilt(i - 1, j - 1) = v;
    rebuilt(j - 1, i - 1) = v;
  }
  CHECK(max_abs(rebuilt - Matrix(forms.stiffness)) == 0.0);
}
