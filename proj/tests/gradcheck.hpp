#pragma once

#include <uvd/tape.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

// Central finite-difference gradient checking used across the test suites.
// The checker re-runs a user-supplied forward builder with perturbed inputs,
// so it is independent of the tape's backward implementation.

namespace uvd::test {

struct GradCheckResult {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// forward: maps a flat parameter vector to a scalar loss.
// analytic: gradient produced by the implementation under test.
inline GradCheckResult check_gradient(const std::function<double(const std::vector<double>&)>& forward,
                                      std::vector<double> theta, const std::vector<double>& analytic,
                                      double h = 1e-5, double floor = 1e-6) {
    GradCheckResult res;
    for (size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = forward(theta);
        theta[i] = saved - h;
        const double down = forward(theta);
        theta[i] = saved;
        const double num = (up - down) / (2.0 * h);
        const double err = rel_err(analytic[i], num, floor);
        if (err > res.max_rel_err) {
            res.max_rel_err = err;
            res.worst_analytic = analytic[i];
            res.worst_numeric = num;
        }
    }
    return res;
}

inline Mat<double> random_mat(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Mat<double> m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = dist(rng);
    return m;
}

inline std::vector<double> flatten(const Mat<double>& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

inline Mat<double> unflatten(const std::vector<double>& v, int r, int c) {
    Mat<double> m(r, c);
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

}  // namespace uvd::test
