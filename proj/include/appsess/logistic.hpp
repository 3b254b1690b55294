#pragma once

#include <span>
#include <vector>

namespace appsess {

struct FitResult {
    std::vector<double> weights;
    double intercept = 0.0;
    double C = 1.0;
    double objective = 0.0;
    int n_iter = 0;
    bool converged = false;

    // Objective after every accepted proximal step; monotone non-increasing.
    // Diagnostic only.
    std::vector<double> objective_trace;
};

// Smooth part of the objective, C * sum_i log(1 + exp(-y~_i (w.x_i + b)))
// with y~ = 2y - 1, and its gradient with respect to (w, b). Exposed so the
// gradient can be checked against finite differences independently of fit().
double logistic_smooth_loss(std::span<const double> X, int n, int d, std::span<const int> y,
                            double C, std::span<const double> w, double b);
void logistic_smooth_grad(std::span<const double> X, int n, int d, std::span<const int> y,
                          double C, std::span<const double> w, double b,
                          std::span<double> grad_w, double& grad_b);

// Minimizes C * logistic_loss + ||w||_1 (intercept unpenalized) by proximal
// gradient with backtracking line search, from w = 0, b = 0. Stops when the
// relative objective change drops below tol or after max_iter steps.
// Deterministic. Labels are {0 = healthy, 1 = symptomatic}; both classes
// must be present and X finite.
FitResult fit_l1_logistic(std::span<const double> X, int n, int d, std::span<const int> y,
                          double C, double tol = 1e-8, int max_iter = 10000);

// sigmoid(w.x + b): probability of the symptomatic class.
double predict_proba(const FitResult& fit, std::span<const double> x);

} // namespace appsess
