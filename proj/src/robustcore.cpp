#include "rscrub/robustcore.hpp"

#include "rscrub/parallel.hpp"

namespace rscrub {

ImputedMatrix impute_matrix(const Matrix& x, double mad_cut) {
  if (x.rows() < 1 || x.cols() < 1) throw PreconditionError("impute_matrix: empty matrix");
  if (!(mad_cut > 0.0)) throw PreconditionError("impute_matrix: mad_cut must be positive");

  ImputedMatrix result;
  result.values = x;
  result.columns.resize(static_cast<std::size_t>(x.cols()));

  parallel_for(static_cast<std::size_t>(x.cols()), [&](std::size_t k) {
    const auto col = static_cast<Index>(k);
    ColumnImputation& info = result.columns[k];
    try {
      auto transformed = robust_transform(x.col(col));
      info.transform = transformed.params;
      info.outliers = detect_univariate_outliers(transformed.values, mad_cut);
      result.values.col(col) = impute_univariate(transformed.values, info.outliers);
    } catch (const Error& e) {
      info = ColumnImputation{};
      info.passed_through = true;
      info.message = e.what();
      result.values.col(col) = x.col(col);
    }
  });

  const bool all_failed = std::all_of(result.columns.begin(), result.columns.end(),
                                      [](const ColumnImputation& c) { return c.passed_through; });
  if (all_failed) throw DegenerateError("impute_matrix: every column is degenerate (" + result.columns.front().message + ")");
  return result;
}

}  // namespace rscrub
