#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "oracles.hpp"
#include "rscrub/mcd.hpp"
#include "rscrub/simlab.hpp"

using namespace rscrub;

namespace {

McdOptions opts(std::uint64_t seed, int starts = 500) {
  McdOptions o;
  o.seed = seed;
  o.n_starts = starts;
  return o;
}

}  // namespace

TEST_CASE("robust distance of a unit example") {
  McdFit fit;
  fit.mean = Vector::Zero(2);
  fit.covariance = Eigen::Vector2d(9.0, 16.0).asDiagonal();
  fit.p = 2;
  Matrix x(1, 2);
  x << 3.0, 4.0;
  CHECK(robust_distances(x, fit).distances(0) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(robust_distances(Matrix(Matrix::Zero(1, 3)), fit), PreconditionError);
}

TEST_CASE("robust distances agree with the explicit-inverse oracle") {
  const Matrix x = gen_iid_gaussian(200, 4, 1) * Eigen::Matrix4d::Random().cwiseAbs() + Matrix::Ones(200, 4);
  const McdFit fit = fast_mcd(x, opts(2, 100));
  const RdSeries rd = robust_distances(x, fit);
  for (Index i = 0; i < x.rows(); i += 13)
    CHECK(rd.distances(i) == doctest::Approx(oracle::mahalanobis(x.row(i).transpose(), fit.mean, fit.covariance)));
}

TEST_CASE("fit structure") {
  const Matrix x = gen_iid_gaussian(101, 3, 3);
  const McdFit fit = fast_mcd(x, opts(4, 100));
  CHECK(fit.h == default_h(101, 3));
  CHECK(static_cast<Index>(fit.included.size()) == fit.h);
  CHECK(static_cast<Index>(fit.included.size() + fit.excluded.size()) == fit.n);
  CHECK(std::is_sorted(fit.included.begin(), fit.included.end()));
  IndexSet all = fit.included;
  all.insert(all.end(), fit.excluded.begin(), fit.excluded.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  // stored statistics are those of the included rows
  const Matrix raw = oracle::subset_covariance(x, fit.included);
  CHECK((fit.raw_covariance - raw).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.raw_log_determinant == doctest::Approx(std::log(raw.determinant())));
  CHECK((fit.covariance - fit.consistency_factor * raw).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("consistency factor") {
  CHECK(mcd_consistency_factor(100, 3, 100) == 1.0);
  // independent evaluation of (h/n) / P(chi2_{p+2} < chi2_p^{-1}(h/n))
  using boost::math::chi_squared;
  const double a = 503.0 / 1000.0;
  const double expected = a / boost::math::cdf(chi_squared(7.0), boost::math::quantile(chi_squared(5.0), a));
  CHECK(mcd_consistency_factor(1000, 5, 503) == doctest::Approx(expected));
  CHECK(mcd_consistency_factor(1000, 5, 503) > 1.0);
}

TEST_CASE("consistency-corrected RD^2 is roughly chi-square on Gaussian data") {
  const Matrix x = gen_iid_gaussian(4000, 3, 5);
  const RdSeries rd = robust_distances(x, fast_mcd(x, opts(6, 100)));
  const double median_rd2 = median(Vector(rd.distances.array().square()));
  const double chi2_median = boost::math::quantile(boost::math::chi_squared(3.0), 0.5);
  CHECK(median_rd2 == doctest::Approx(chi2_median).epsilon(0.1));
}

TEST_CASE("property: a C-step never increases the determinant") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = gen_iid_gaussian(40, 2, 300 + trial);
    IndexSet s(40);
    std::iota(s.begin(), s.end(), Index{0});
    std::shuffle(s.begin(), s.end(), rng);
    s.resize(21);
    std::sort(s.begin(), s.end());
    const double before = subset_determinant(x, s);
    const IndexSet next = c_step(x, s);
    CHECK(next.size() == s.size());
    CHECK(subset_determinant(x, next) <= before * (1.0 + 1e-12));
  }
}

TEST_CASE("fast_mcd matches exhaustive enumeration on small problems") {
  int exact = 0;
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    const Matrix x = gen_iid_gaussian(15, 2, 500 + trial);
    const auto best = oracle::exhaustive_mcd(x, 9);
    McdOptions o = opts(trial);
    o.h = 9;
    const McdFit fit = fast_mcd(x, o);
    CHECK(fit.raw_log_determinant <= best.log_det + std::log(1.05));
    exact += fit.included == best.subset;
  }
  CHECK(exact >= trials - 1);
}

TEST_CASE("property: affine equivariance") {
  const Matrix x = gen_iid_gaussian(150, 3, 9);
  Eigen::Matrix3d a;
  a << 2.0, 0.3, -0.5, 0.1, 1.5, 0.2, -0.4, 0.6, 3.0;
  const Eigen::Vector3d b(10.0, -5.0, 2.5);
  const Matrix y = (x * a.transpose()).rowwise() + b.transpose();
  const McdFit fx = fast_mcd(x, opts(10));
  const McdFit fy = fast_mcd(y, opts(10));
  CHECK(fx.included == fy.included);
  const Vector dx = robust_distances(x, fx).distances;
  const Vector dy = robust_distances(y, fy).distances;
  CHECK((dx - dy).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("contamination does not enter the MCD subset") {
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = gen_iid_gaussian(200, 2, 700 + trial);
    for (Index i = 0; i < 80; ++i) x.row(i).array() += 50.0;  // 40% gross contamination
    const McdFit fit = fast_mcd(x, opts(trial));
    CHECK(fit.included.front() >= 80);
  }
}

TEST_CASE("determinism and thread-count independence") {
  const Matrix x = gen_iid_gaussian(300, 4, 11);
  const McdFit a = fast_mcd(x, opts(12, 200));
  const McdFit b = fast_mcd(x, opts(12, 200));
  CHECK(a.included == b.included);
  CHECK(a.covariance == b.covariance);

  const char* old = std::getenv("RSCRUB_THREADS");
  const std::string saved = old ? old : "";
  setenv("RSCRUB_THREADS", "1", 1);
  const McdFit one = fast_mcd(x, opts(12, 200));
  setenv("RSCRUB_THREADS", "3", 1);
  const McdFit three = fast_mcd(x, opts(12, 200));
  if (old) setenv("RSCRUB_THREADS", saved.c_str(), 1); else unsetenv("RSCRUB_THREADS");
  CHECK(one.included == three.included);
  CHECK(one.covariance == three.covariance);
  CHECK(one.included == a.included);
}

TEST_CASE("h = n gives the classical estimate") {
  const Matrix x = gen_iid_gaussian(30, 2, 13);
  McdOptions o;
  o.h = 30;
  const McdFit fit = fast_mcd(x, o);
  CHECK(fit.excluded.empty());
  CHECK(fit.consistency_factor == 1.0);
  IndexSet all(30);
  std::iota(all.begin(), all.end(), Index{0});
  CHECK((fit.covariance - oracle::subset_covariance(x, all)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fast_mcd errors") {
  CHECK_THROWS_AS(fast_mcd(gen_iid_gaussian(3, 2, 1)), PreconditionError);
  CHECK_THROWS_AS(fast_mcd(Matrix(Matrix::Ones(50, 2))), DegenerateError);
  McdOptions bad;
  bad.h = 5;
  CHECK_THROWS_AS(fast_mcd(gen_iid_gaussian(50, 2, 1), bad), PreconditionError);
  Matrix nan = gen_iid_gaussian(50, 2, 1);
  nan(3, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fast_mcd(nan), PreconditionError);
}

TEST_CASE("single-precision instantiation") {
  const Eigen::MatrixXf x = gen_iid_gaussian(120, 2, 14).cast<float>();
  const auto fit = fast_mcd(x, opts(15, 100));
  const auto rd = robust_distances(x, fit);
  CHECK(rd.distances.size() == 120);
  CHECK(rd.distances.allFinite());
}
