// Writes the synthetic toy dataset shipped in data/: T = 145 component time
// courses with heavy-tailed, skewed and autocorrelated components, a handful of
// artifact volumes, and matching spatial maps over a 20 x 20 slice.
//
//   make_toy <out-dir>

#include <cmath>
#include <iostream>
#include <random>

#include "rscrub/matio.hpp"
#include "rscrub/rng.hpp"

int main(int argc, char** argv) {
  using namespace rscrub;
  if (argc != 2) {
    std::cerr << "usage: make_toy <out-dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  constexpr Index t = 145, q = 6, side = 20;
  constexpr std::uint64_t seed = 145;

  Rng rng = make_rng(seed, "toy-components");
  std::normal_distribution<double> normal;
  std::student_t_distribution<double> t3(3.0);
  std::chi_squared_distribution<double> chi2(2.0);

  DenseMatrix a;
  a.values.resize(t, q);
  for (Index j = 0; j < q; ++j) {
    a.col_labels.push_back("ic" + std::to_string(j + 1));
    double prev = 0.0;
    for (Index i = 0; i < t; ++i) {
      double v = 0.0;
      switch (j) {
        case 0: v = t3(rng) / std::sqrt(3.0); break;  // heavy tails
        case 1: v = (chi2(rng) - 2.0) / 2.0; break;  // skewed
        case 2: v = prev = 0.6 * prev + 0.8 * t3(rng) / std::sqrt(3.0); break;  // autocorrelated
        case 3: v = t3(rng) / std::sqrt(3.0) * (1.0 + 0.5 * std::sin(0.07 * static_cast<double>(i))); break;
        case 4: v = -(chi2(rng) - 2.0) / 2.0; break;
        default: v = normal(rng);  // close to Gaussian; usually not selected
      }
      a.values(i, j) = v + 0.004 * static_cast<double>(i) * ((j % 3) - 1.0);
    }
  }
  // Artifact volumes in two components.
  for (Index v : {17, 18, 64, 101, 130}) {
    for (Index j = 0; j < 2; ++j) a.values(v, j) += (j % 2 ? -1.0 : 1.0) * (5.0 + normal(rng));
  }

  // Spatial maps: a Gaussian blob per component on a 20 x 20 slice.
  Rng srng = make_rng(seed, "toy-spatial");
  std::uniform_real_distribution<double> centre(3.0, side - 3.0);
  DenseMatrix s;
  s.values.resize(q, side * side);
  for (Index v = 0; v < side * side; ++v) s.col_labels.push_back("v" + std::to_string(v));
  for (Index j = 0; j < q; ++j) {
    const double cx = centre(srng), cy = centre(srng);
    for (Index y = 0; y < side; ++y)
      for (Index x = 0; x < side; ++x) {
        const double d2 = std::pow(static_cast<double>(x) - cx, 2) + std::pow(static_cast<double>(y) - cy, 2);
        s.values(j, y * side + x) = std::exp(-d2 / 18.0) + 0.05 * normal(srng);
      }
  }

  std::filesystem::create_directories(dir);
  save_matrix(a, dir / "toy_components.csv", MatrixFormat::delimited);
  save_matrix(s, dir / "toy_spatial.csv", MatrixFormat::delimited);
  std::cout << "wrote " << (dir / "toy_components.csv").string() << " and " << (dir / "toy_spatial.csv").string()
            << "\n";
  return 0;
}
