#pragma once

#include <json.hpp>

#include "robreg/core.hpp"

namespace robreg {

/// Nested row-major arrays.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);

/// {"beta_hat": [[…]], "sigma_hat": [[…]] | null, "diagnostics": {…}}
nlohmann::json fit_to_json(const Fit& fit);

}  // namespace robreg
