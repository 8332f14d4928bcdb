#include "robreg/serialize.hpp"

namespace robreg {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  require(j.is_array() && !j.empty() && j[0].is_array(), Errc::parse_error, "matrix must be a nested array");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Index>(row.size()) == cols, Errc::parse_error,
            "matrix rows must have equal length");
    for (Index k = 0; k < cols; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      require(v.is_number(), Errc::parse_error, "matrix entries must be numbers");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

nlohmann::json fit_to_json(const Fit& fit) {
  nlohmann::json j;
  j["beta_hat"] = matrix_to_json(fit.beta_hat);
  j["sigma_hat"] = fit.sigma_hat ? matrix_to_json(*fit.sigma_hat) : nlohmann::json(nullptr);
  j["diagnostics"] = {
      {"iterations", fit.iterations},
      {"converged", fit.converged},
      {"elapsed_seconds", fit.elapsed_seconds},
      {"loss_trace", fit.loss_trace},
  };
  return j;
}

}  // namespace robreg
