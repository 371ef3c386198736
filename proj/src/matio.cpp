#include "rscrub/matio.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rscrub {

namespace {

using nlohmann::json;

constexpr char kMagic[] = {'R', 'S', 'C', 'R', 'U', 'B', '1'};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
  return r;
}

void put_u64(std::string& buf, std::uint64_t v) {
  v = to_le(v);
  char bytes[8];
  std::memcpy(bytes, &v, 8);
  buf.append(bytes, 8);
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return to_le(v);
}

// Non-finite numbers are stored as strings so the document stays valid JSON.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double get_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw ParseError("report: expected a number, got \"" + s + "\"");
}

json vec(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Vector get_vec(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = get_num(j[i]);
  return v;
}

std::vector<double> get_dvec(const json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(get_num(x));
  return v;
}

json mat(const Matrix& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vec(Vector(m.row(i).transpose())));
  return a;
}

Matrix get_mat(const json& j) {
  const auto r = static_cast<Index>(j.size());
  const Index c = r > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(j[static_cast<std::size_t>(i)].size()) != c) throw ParseError("report: ragged matrix");
    for (Index k = 0; k < c; ++k) m(i, k) = get_num(j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
  }
  return m;
}

std::string to_string(TransformFamily f) { return f == TransformFamily::yeo_johnson ? "yeo_johnson" : "identity"; }

TransformFamily transform_family_from_string(const std::string& s) {
  if (s == "yeo_johnson") return TransformFamily::yeo_johnson;
  if (s == "identity") return TransformFamily::identity;
  throw ParseError("report: unknown transform family " + s);
}

std::string to_string(IncludedDraws d) { return d == IncludedDraws::total ? "total" : "subset"; }

IncludedDraws included_draws_from_string(const std::string& s) {
  if (s == "total") return IncludedDraws::total;
  if (s == "subset") return IncludedDraws::subset;
  throw ParseError("report: unknown bootstrap draw scheme " + s);
}

json config_json(const RunConfig& c) {
  return {{"alpha", c.alpha},
          {"bootstrap_reps", c.bootstrap_reps},
          {"ci_levels", c.ci_levels},
          {"seed", c.seed},
          {"kurtosis_quantile", c.kurtosis_quantile},
          {"mad_cut", c.mad_cut},
          {"detrend_degree", c.detrend_degree},
          {"threshold_method", to_string(c.threshold_method)},
          {"select_components", c.select_components},
          {"detrend", c.detrend},
          {"mcd_starts", c.mcd_starts},
          {"consistency_correction", c.consistency_correction},
          {"bootstrap_draws", to_string(c.bootstrap_draws)}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.bootstrap_reps = j.at("bootstrap_reps").get<int>();
  c.ci_levels = j.at("ci_levels").get<std::vector<double>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.kurtosis_quantile = j.at("kurtosis_quantile").get<double>();
  c.mad_cut = j.at("mad_cut").get<double>();
  c.detrend_degree = j.at("detrend_degree").get<int>();
  c.threshold_method = threshold_selection_from_string(j.at("threshold_method").get<std::string>());
  c.select_components = j.at("select_components").get<bool>();
  c.detrend = j.at("detrend").get<bool>();
  c.mcd_starts = j.at("mcd_starts").get<int>();
  c.consistency_correction = j.at("consistency_correction").get<bool>();
  c.bootstrap_draws = included_draws_from_string(j.at("bootstrap_draws").get<std::string>());
  return c;
}

void check_report(const ScrubReport& r) {
  const auto t = r.flags.size();
  if (static_cast<std::size_t>(r.rds.distances.size()) != t)
    throw PreconditionError("report: flags length " + std::to_string(t) + " differs from RD count " +
                            std::to_string(r.rds.distances.size()));
  if (r.rds.fit.n != 0 && static_cast<std::size_t>(r.rds.fit.n) != t)
    throw PreconditionError("report: flags length differs from fitted observation count");
  if (r.thresholds.empty() || r.active_threshold >= r.thresholds.size())
    throw PreconditionError("report: active threshold index out of range");
  if (r.selected_components.empty()) throw PreconditionError("report: no selected components");
}

}  // namespace

MatrixFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".rsb") ? MatrixFormat::binary : MatrixFormat::delimited;
}

DenseMatrix parse_delimited(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    const std::size_t end = text.find('\n', start);
    lines.push_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  // Trailing blank lines are not rows.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw EmptyFileError(source);

  const char delim = lines.front().find('\t') != std::string_view::npos ? '\t' : ',';
  DenseMatrix m;
  std::size_t first = 0;
  {
    const auto cells = split(lines.front(), delim);
    bool any_numeric = false;
    double tmp = 0.0;
    for (auto c : cells) any_numeric = any_numeric || parse_double(c, tmp);
    if (!any_numeric) {
      for (auto c : cells) m.col_labels.emplace_back(c);
      first = 1;
    }
  }
  if (first == lines.size()) throw EmptyFileError(source + " (header only)");

  const std::size_t ncols = split(lines[first], delim).size();
  if (!m.col_labels.empty() && m.col_labels.size() != ncols)
    throw ParseError(source + ": header has " + std::to_string(m.col_labels.size()) + " columns but line 2 has " +
                         std::to_string(ncols),
                     2);
  m.values.resize(static_cast<Index>(lines.size() - first), static_cast<Index>(ncols));
  for (std::size_t l = first; l < lines.size(); ++l) {
    const std::size_t line_no = l + 1;
    const auto cells = split(lines[l], delim);
    if (cells.size() != ncols)
      throw ParseError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " columns, expected " + std::to_string(ncols),
                       line_no);
    for (std::size_t c = 0; c < ncols; ++c) {
      double v = 0.0;
      const std::string at = source + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1);
      if (cells[c].empty()) throw ParseError(at + ": missing value (missing data is not supported)", line_no, c + 1);
      if (!parse_double(cells[c], v))
        throw ParseError(at + ": not a number: \"" + std::string(cells[c]) + "\"", line_no, c + 1);
      if (!std::isfinite(v))
        throw ParseError(at + ": non-finite value (missing data is not supported)", line_no, c + 1);
      m.values(static_cast<Index>(l - first), static_cast<Index>(c)) = v;
    }
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw EmptyFileError(path.string());
  if (format == MatrixFormat::delimited) return parse_delimited(bytes, path.string());

  constexpr std::size_t header = sizeof(kMagic) + 16;
  if (bytes.size() < header || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path.string() + ": not an RSCRUB1 binary matrix");
  const std::uint64_t rows = get_u64(bytes.data() + sizeof(kMagic));
  const std::uint64_t cols = get_u64(bytes.data() + sizeof(kMagic) + 8);
  if (rows == 0 || cols == 0) throw ParseError(path.string() + ": zero dimension");
  if (rows > (bytes.size() - header) / 8 / cols || (bytes.size() - header) != rows * cols * 8)
    throw ParseError(path.string() + ": payload size does not match " + std::to_string(rows) + " x " +
                     std::to_string(cols));
  DenseMatrix m;
  m.values.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  const char* p = bytes.data() + header;
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j, p += 8) {
      const std::uint64_t u = get_u64(p);
      double v;
      std::memcpy(&v, &u, 8);
      if (!std::isfinite(v))
        throw ParseError(path.string() + ": non-finite value at row " + std::to_string(i + 1) + ", column " +
                             std::to_string(j + 1),
                         i + 1, j + 1);
      m.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
    }
  return m;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_number: conversion failed");
  return std::string(buf, ptr);
}

void save_matrix(const DenseMatrix& m, const std::filesystem::path& path, MatrixFormat format) {
  if (m.rows() < 1 || m.cols() < 1) throw PreconditionError("save_matrix: empty matrix");
  std::string out;
  if (format == MatrixFormat::binary) {
    out.append(kMagic, sizeof(kMagic));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) {
        std::uint64_t u;
        const double v = m.values(i, j);
        std::memcpy(&u, &v, 8);
        put_u64(out, u);
      }
  } else {
    if (!m.col_labels.empty()) {
      if (static_cast<Index>(m.col_labels.size()) != m.cols())
        throw PreconditionError("save_matrix: label count differs from column count");
      for (std::size_t j = 0; j < m.col_labels.size(); ++j) out += (j ? "," : "") + m.col_labels[j];
      out += '\n';
    }
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (j) out += ',';
        out += format_number(m.values(i, j));
      }
      out += '\n';
    }
  }
  write_file(path, out);
}

std::string report_to_string(const ScrubReport& r) {
  check_report(r);
  json j;
  j["schema"] = ScrubReport::kSchema;
  j["config"] = config_json(r.config);
  j["source"] = to_string(r.source);
  j["observations"] = r.flags.size();
  j["selected_components"] = r.selected_components;
  j["kurtosis_values"] = vec(r.kurtosis_values);
  j["kurtosis_cutoff"] = num(r.kurtosis_cutoff);

  const McdFit& f = r.rds.fit;
  j["fit"] = {{"n", f.n},
              {"p", f.p},
              {"h", f.h},
              {"included", f.included},
              {"excluded", f.excluded},
              {"mean", vec(f.mean)},
              {"covariance", mat(f.covariance)},
              {"raw_covariance", mat(f.raw_covariance)},
              {"determinant", num(f.determinant)},
              {"raw_log_determinant", num(f.raw_log_determinant)},
              {"consistency_factor", num(f.consistency_factor)}};
  j["rd"] = vec(r.rds.distances);
  j["flags"] = json::array();
  for (bool b : r.flags) j["flags"].push_back(b);

  j["thresholds"] = json::array();
  for (const auto& t : r.thresholds)
    j["thresholds"].push_back({{"method", to_string(t.method)},
                               {"cutoff", num(t.cutoff)},
                               {"alpha", t.alpha},
                               {"ci_level", t.ci_level},
                               {"dof", num(t.dof)},
                               {"replicates", vec(t.replicates)}});
  j["active_threshold"] = r.active_threshold;

  j["diagnostics"] = json::array();
  for (std::size_t k = 0; k < r.diagnostics.size(); ++k) {
    const auto& d = r.diagnostics[k];
    j["diagnostics"].push_back({{"outliers", d.outliers},
                                {"transform",
                                 {{"family", to_string(d.transform.family)},
                                  {"lambda", num(d.transform.lambda)},
                                  {"pre_center", num(d.transform.pre_center)},
                                  {"pre_scale", num(d.transform.pre_scale)},
                                  {"post_center", num(d.transform.post_center)},
                                  {"post_scale", num(d.transform.post_scale)},
                                  {"fallback", d.transform.fallback}}},
                                {"passed_through", d.passed_through},
                                {"message", d.message}});
  }
  j["warnings"] = r.warnings;
  if (r.artifact_map) j["artifact_map"] = vec(*r.artifact_map);
  return j.dump(1) + "\n";
}

ScrubReport report_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  try {
    if (j.at("schema").get<int>() != ScrubReport::kSchema)
      throw ParseError("report: unsupported schema " + j.at("schema").dump());
    ScrubReport r;
    r.config = config_from_json(j.at("config"));
    r.source = component_source_from_string(j.at("source").get<std::string>());
    r.selected_components = j.at("selected_components").get<std::vector<Index>>();
    r.kurtosis_values = get_dvec(j.at("kurtosis_values"));
    r.kurtosis_cutoff = get_num(j.at("kurtosis_cutoff"));

    const json& f = j.at("fit");
    McdFit& fit = r.rds.fit;
    fit.n = f.at("n").get<Index>();
    fit.p = f.at("p").get<Index>();
    fit.h = f.at("h").get<Index>();
    fit.included = f.at("included").get<IndexSet>();
    fit.excluded = f.at("excluded").get<IndexSet>();
    fit.mean = get_vec(f.at("mean"));
    fit.covariance = get_mat(f.at("covariance"));
    fit.raw_covariance = get_mat(f.at("raw_covariance"));
    fit.determinant = get_num(f.at("determinant"));
    fit.raw_log_determinant = get_num(f.at("raw_log_determinant"));
    fit.consistency_factor = get_num(f.at("consistency_factor"));
    r.rds.distances = get_vec(j.at("rd"));
    r.flags = j.at("flags").get<std::vector<bool>>();

    for (const auto& t : j.at("thresholds")) {
      ThresholdEstimate e;
      e.method = threshold_method_from_string(t.at("method").get<std::string>());
      e.cutoff = get_num(t.at("cutoff"));
      e.alpha = t.at("alpha").get<double>();
      e.ci_level = t.at("ci_level").get<double>();
      e.dof = get_num(t.at("dof"));
      e.replicates = get_dvec(t.at("replicates"));
      r.thresholds.push_back(std::move(e));
    }
    r.active_threshold = j.at("active_threshold").get<std::size_t>();

    for (const auto& d : j.at("diagnostics")) {
      ColumnImputation c;
      c.outliers = d.at("outliers").get<IndexSet>();
      const json& t = d.at("transform");
      c.transform.family = transform_family_from_string(t.at("family").get<std::string>());
      c.transform.lambda = get_num(t.at("lambda"));
      c.transform.pre_center = get_num(t.at("pre_center"));
      c.transform.pre_scale = get_num(t.at("pre_scale"));
      c.transform.post_center = get_num(t.at("post_center"));
      c.transform.post_scale = get_num(t.at("post_scale"));
      c.transform.fallback = t.at("fallback").get<bool>();
      c.passed_through = d.at("passed_through").get<bool>();
      c.message = d.at("message").get<std::string>();
      r.diagnostics.push_back(std::move(c));
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("artifact_map")) r.artifact_map = get_vec(j.at("artifact_map"));
    if (j.at("observations").get<std::size_t>() != r.flags.size())
      throw ParseError("report: observation count differs from flag count");
    check_report(r);
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ParseError(e.what());
  }
}

void save_report(const ScrubReport& report, const std::filesystem::path& path) {
  write_file(path, report_to_string(report));
}

ScrubReport load_report(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (text.empty()) throw EmptyFileError(path.string());
  return report_from_string(text);
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw PreconditionError("table: row width differs from header");
  rows.push_back(std::move(row));
}

std::string table_to_string(const Table& t) {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

void save_table(const Table& t, const std::filesystem::path& path) { write_file(path, table_to_string(t)); }

}  // namespace rscrub
