#include "robreg/core.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace robreg {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_finite: return "NonFinite";
    case Errc::degenerate_design: return "DegenerateDesign";
    case Errc::singular_weight_matrix: return "SingularWeightMatrix";
    case Errc::zero_iterate: return "ZeroIterate";
    case Errc::degenerate_residuals: return "DegenerateResiduals";
    case Errc::singular_h: return "SingularH";
    case Errc::insufficient_warmup: return "InsufficientWarmup";
    case Errc::missing_sigma: return "MissingSigma";
    case Errc::empty_grid: return "EmptyGrid";
    case Errc::parse_error: return "ParseError";
  }
  return "Unknown";
}

void ModelParams::validate() const {
  require(beta.size() > 0 && beta.allFinite(), Errc::invalid_argument, "beta must be non-empty and finite");
  if (!sigma) return;
  const Matrix& s = *sigma;
  require(s.rows() == beta.rows() && s.cols() == beta.rows(), Errc::dimension_mismatch,
          "sigma must be q×q");
  const double scale = std::max(s.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, Errc::invalid_argument,
          "sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 0, Errc::invalid_argument, "sigma is not positive definite");
}

void EstimatorConfig::validate() const {
  require(c_gamma > 0, Errc::invalid_argument, "c_gamma must be > 0");
  require(gamma > 0.5 && gamma < 1.0, Errc::invalid_argument, "gamma must lie in (0.5, 1)");
  require(w >= 0, Errc::invalid_argument, "w must be >= 0");
  require(ridge_lambda >= 0, Errc::invalid_argument, "ridge_lambda must be >= 0");
  require(max_iter > 0, Errc::invalid_argument, "max_iter must be > 0");
  require(tol > 0, Errc::invalid_argument, "tol must be > 0");
  require(denom_floor > 0, Errc::invalid_argument, "denom_floor must be > 0");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line, std::size_t col, const std::string& msg) {
  std::ostringstream os;
  os << "line " << line << ", column " << col << ": " << msg;
  throw Error(Errc::parse_error, os.str());
}

}  // namespace

DataSet read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) parse_fail(1, 1, "empty input, expected header x1..xp,y1..yq");
  const auto header = split_fields(line);
  Index p = 0;
  Index q = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    const std::string expect_x = "x" + std::to_string(p + 1);
    const std::string expect_y = "y" + std::to_string(q + 1);
    if (q == 0 && h == expect_x) {
      ++p;
    } else if (p > 0 && h == expect_y) {
      ++q;
    } else {
      parse_fail(1, c + 1, "unexpected column header '" + h + "', expected '" +
                               (q == 0 ? expect_x + "' or '" + expect_y : expect_y) + "'");
    }
  }
  if (p == 0) parse_fail(1, 1, "no x columns in header");
  if (q == 0) parse_fail(1, header.size(), "no y columns in header");

  std::vector<double> values;
  std::size_t lineno = 1;
  Index n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (static_cast<Index>(fields.size()) != p + q) {
      parse_fail(lineno, std::min(fields.size(), static_cast<std::size_t>(p + q)) + 1,
                 "expected " + std::to_string(p + q) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        parse_fail(lineno, c + 1, "not a number: '" + f + "'");
      if (!std::isfinite(v)) parse_fail(lineno, c + 1, "non-finite value");
      values.push_back(v);
    }
    ++n;
  }
  if (n == 0) parse_fail(lineno + 1, 1, "no observations");

  Matrix x(n, p);
  Matrix y(n, q);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) x(i, j) = values[static_cast<std::size_t>(i * (p + q) + j)];
    for (Index j = 0; j < q; ++j) y(i, j) = values[static_cast<std::size_t>(i * (p + q) + p + j)];
  }
  return DataSet(std::move(x), std::move(y));
}

DataSet load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::parse_error, "cannot open '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const DataSet& data) {
  for (Index j = 0; j < data.p(); ++j) out << (j ? "," : "") << 'x' << j + 1;
  for (Index j = 0; j < data.q(); ++j) out << ",y" << j + 1;
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.p(); ++j) out << (j ? "," : "") << data.x(i, j);
    for (Index j = 0; j < data.q(); ++j) out << ',' << data.y(i, j);
    out << '\n';
  }
}

}  // namespace robreg
