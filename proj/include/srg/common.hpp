#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace srg {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr cd I1{0.0, 1.0};

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : error { using error::error; };
struct model_error : error { using error::error; };
struct grid_mismatch : error { using error::error; };
struct invalid_kernel : error { using error::error; };
struct range_error : error { using error::error; };
struct domain_error : error { using error::error; };
struct convergence_error : error { using error::error; };
struct ungapped_error : error { using error::error; };
struct spectrum_error : error { using error::error; };

} // namespace srg
