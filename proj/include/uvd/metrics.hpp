#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

// Segmentation and reconstruction scoring: adjusted Rand index over pixel
// cluster assignments, its foreground-restricted variant, and MSE.

namespace uvd {

// Adjusted Rand index via the contingency-table closed form. Degenerate
// inputs (both labelings constant, or both all-singletons) score 1.0.
double ari(const std::vector<int>& labels_true, const std::vector<int>& labels_pred);

// ARI restricted to samples whose TRUE label differs from background_id.
// Throws std::invalid_argument when no foreground samples exist.
double f_ari(const std::vector<int>& labels_true, const std::vector<int>& labels_pred, int background_id);

double mse(const std::vector<double>& x, const std::vector<double>& x_hat);

// masks: K x D (column j = pixel); label = argmax over k, ties to the lowest
// slot index.
template <class Derived>
std::vector<int> assign_labels(const Eigen::MatrixBase<Derived>& masks) {
    std::vector<int> out(static_cast<size_t>(masks.cols()));
    for (Eigen::Index j = 0; j < masks.cols(); ++j) {
        int best = 0;
        for (Eigen::Index k = 1; k < masks.rows(); ++k)
            if (masks(k, j) > masks(best, j)) best = static_cast<int>(k);
        out[static_cast<size_t>(j)] = best;
    }
    return out;
}

struct LengthScores {
    double ari = 0.0;
    std::optional<double> f_ari;
    double mse = 0.0;
};

struct MetricsReport {
    std::map<int, LengthScores> per_length;

    std::string to_json() const;
};

}  // namespace uvd
