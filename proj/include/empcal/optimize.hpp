#pragma once

#include <functional>
#include <vector>

namespace empcal {

struct MinimizeOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;
    double function_tolerance = 1e-14;
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Objective writes the gradient into its second argument and returns the
// value. Non-finite values are treated as infeasible and the line search
// backtracks away from them.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

// BFGS with an inverse-Hessian update and backtracking Armijo line search.
MinimizeResult minimize_bfgs(const Objective& objective, std::vector<double> x0, const MinimizeOptions& options = {});

}  // namespace empcal
