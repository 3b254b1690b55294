#include "appsess/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "appsess/error.hpp"

namespace appsess {

namespace {

// log(1 + exp(-z)) without overflow.
double log1p_exp_neg(double z) {
    return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double l1_norm(std::span<const double> w) {
    double s = 0.0;
    for (double x : w) s += std::abs(x);
    return s;
}

} // namespace

double logistic_smooth_loss(std::span<const double> X, int n, int d, std::span<const int> y,
                            double C, std::span<const double> w, double b) {
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* xi = X.data() + static_cast<std::size_t>(i) * d;
        double z = b;
        for (int j = 0; j < d; ++j) z += w[j] * xi[j];
        const double margin = (y[i] > 0 ? z : -z);
        loss += log1p_exp_neg(margin);
    }
    return C * loss;
}

void logistic_smooth_grad(std::span<const double> X, int n, int d, std::span<const int> y,
                          double C, std::span<const double> w, double b,
                          std::span<double> grad_w, double& grad_b) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    grad_b = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* xi = X.data() + static_cast<std::size_t>(i) * d;
        double z = b;
        for (int j = 0; j < d; ++j) z += w[j] * xi[j];
        const double r = sigmoid(z) - (y[i] > 0 ? 1.0 : 0.0);
        for (int j = 0; j < d; ++j) grad_w[j] += r * xi[j];
        grad_b += r;
    }
    for (int j = 0; j < d; ++j) grad_w[j] *= C;
    grad_b *= C;
}

FitResult fit_l1_logistic(std::span<const double> X, int n, int d, std::span<const int> y,
                          double C, double tol, int max_iter) {
    if (n < 2) throw ValidationError("fit_l1_logistic: need at least 2 samples");
    if (C <= 0.0) throw ValidationError("fit_l1_logistic: C must be > 0");
    if (X.size() != static_cast<std::size_t>(n) * d || y.size() != static_cast<std::size_t>(n))
        throw ValidationError("fit_l1_logistic: shape mismatch");
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) (y[i] > 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw ValidationError("fit_l1_logistic: both classes must be present");
    for (double x : X)
        if (!std::isfinite(x)) throw ValidationError("fit_l1_logistic: non-finite feature");

    FitResult fit;
    fit.C = C;

    // Monotone FISTA: proximal (soft-threshold) steps with backtracking
    // taken from an extrapolated point, keeping the best iterate so the
    // objective never increases. x = kept iterate, z = prox candidate,
    // yw/yb = extrapolation point.
    std::vector<double> xw(d, 0.0), xw_prev(d, 0.0), zw(d, 0.0), yw(d, 0.0);
    double xb = 0.0, xb_prev = 0.0, zb = 0.0, yb = 0.0;
    std::vector<double> grad_w(d);
    double grad_b = 0.0;
    double t_mom = 1.0;

    double obj_x = logistic_smooth_loss(X, n, d, y, C, xw, xb); // ||w||_1 = 0
    fit.objective_trace.push_back(obj_x);

    // Initial step from the Lipschitz bound of the smooth part,
    // L <= C/4 * sum_i ||(x_i, 1)||^2, then adapted by backtracking. Growing
    // it each iteration keeps steps effective when C is tiny.
    double lip = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* xi = X.data() + static_cast<std::size_t>(i) * d;
        double s = 1.0;
        for (int j = 0; j < d; ++j) s += xi[j] * xi[j];
        lip += s;
    }
    lip *= 0.25 * C;
    double step = lip > 0.0 ? 1.0 / lip : 1.0;

    for (int iter = 0; iter < max_iter; ++iter) {
        logistic_smooth_grad(X, n, d, y, C, yw, yb, grad_w, grad_b);
        const double f_y = logistic_smooth_loss(X, n, d, y, C, yw, yb);

        step *= 2.0;
        double f_z = 0.0;
        for (int bt = 0; bt < 200; ++bt) {
            for (int j = 0; j < d; ++j) {
                const double u = yw[j] - step * grad_w[j];
                const double mag = std::abs(u) - step;
                zw[j] = mag > 0.0 ? (u > 0.0 ? mag : -mag) : 0.0;
            }
            zb = yb - step * grad_b;

            f_z = logistic_smooth_loss(X, n, d, y, C, zw, zb);
            double lin = 0.0, quad = 0.0;
            for (int j = 0; j < d; ++j) {
                const double diff = zw[j] - yw[j];
                lin += grad_w[j] * diff;
                quad += diff * diff;
            }
            const double db = zb - yb;
            lin += grad_b * db;
            quad += db * db;
            if (f_z <= f_y + lin + quad / (2.0 * step) + 1e-15 * std::abs(f_y)) break;
            step *= 0.5;
        }

        const double obj_z = f_z + l1_norm(zw);
        const bool accepted = obj_z <= obj_x;
        const double obj_new = accepted ? obj_z : obj_x;

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
        xw_prev.swap(xw); // xw_prev now holds x_{k-1}
        xb_prev = xb;
        if (accepted) {
            xw = zw;
            xb = zb;
        } else {
            xw = xw_prev;
            xb = xb_prev;
        }
        for (int j = 0; j < d; ++j)
            yw[j] = xw[j] + (t_mom / t_next) * (zw[j] - xw[j]) +
                    ((t_mom - 1.0) / t_next) * (xw[j] - xw_prev[j]);
        yb = xb + (t_mom / t_next) * (zb - xb) + ((t_mom - 1.0) / t_next) * (xb - xb_prev);
        t_mom = t_next;

        fit.objective_trace.push_back(obj_new);
        fit.n_iter = iter + 1;

        const double scale = std::max(std::abs(obj_x), 1e-300);
        const double rel = std::abs(obj_x - obj_new) / scale;
        const double z_gap = std::abs(obj_z - obj_new) / scale;
        obj_x = obj_new;
        if (rel < tol && (accepted || z_gap < tol)) {
            fit.converged = true;
            break;
        }
    }
    fit.weights = std::move(xw);
    fit.intercept = xb;
    fit.objective = obj_x;
    if (!std::isfinite(fit.objective))
        throw std::runtime_error("fit_l1_logistic: non-finite objective");
    return fit;
}

double predict_proba(const FitResult& fit, std::span<const double> x) {
    if (x.size() != fit.weights.size())
        throw ValidationError("predict_proba: dimension mismatch");
    double z = fit.intercept;
    for (std::size_t j = 0; j < x.size(); ++j) z += fit.weights[j] * x[j];
    return sigmoid(z);
}

} // namespace appsess
