#pragma once

#include <optional>
#include <span>

#include <Eigen/Core>

#include "skelgrasp/grasp_quality.hpp"

namespace skelgrasp::oracle {

/// max c.x subject to A x = b, x >= 0 (b >= 0) by two-phase simplex with Bland's rule.
/// Empty when infeasible or unbounded.
std::optional<double> solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

/// Origin strictly inside the hull iff the hull reaches beyond the origin along all 12 signed axes.
bool force_closure_oracle_lp(std::span<const Wrench> wrenches, double tol = 1e-9);

}  // namespace skelgrasp::oracle
