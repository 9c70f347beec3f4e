#pragma once

#include <uvd/scene_model.hpp>
#include <uvd/temporal_prior.hpp>

#include <map>
#include <vector>

// Training-loss arithmetic: reparameterized sampling, closed-form diagonal
// Gaussian KL, the mask entropy term, and the r/R-weighted spatio-temporal
// ELBO assembled from an inference trace.

namespace uvd {

// z = mu_q + exp(log_sigma_q) * eps; posterior is the 2M x N stack
// [mu_q; log_sigma_q], noise is M x N.
template <class S>
Var<S> sample_posterior(Var<S> posterior, Var<S> noise, int m) {
    Var<S> mu = slice_rows(posterior, 0, m);
    Var<S> log_sigma = slice_rows(posterior, m, m);
    return add(mu, cmul(exp_op(log_sigma), noise));
}

// diagonal KL(q || p) summed over the M latent dimensions: 1 x N per-slot row
template <class S>
Var<S> gaussian_kl(Var<S> mu_q, Var<S> log_sigma_q, Var<S> mu_p, Var<S> log_sigma_p) {
    for (const Var<S>* v : {&mu_q, &log_sigma_q, &mu_p, &log_sigma_p})
        if (!v->v().allFinite()) throw std::invalid_argument("gaussian_kl: non-finite parameters");
    Var<S> dls = sub(log_sigma_q, log_sigma_p);
    Var<S> ratio = exp_op(scale(dls, S(2)));  // sigma_q^2 / sigma_p^2
    Var<S> dmu = sub(mu_p, mu_q);
    Var<S> mah = cmul(cmul(dmu, dmu), exp_op(scale(log_sigma_p, S(-2))));
    Var<S> inner = sub(add(ratio, mah), // sigma ratio + mahalanobis
                       add_scalar(scale(dls, S(2)), S(1)));  // - 1 - 2(log_sigma_q - log_sigma_p)
    return sum_rows(scale(inner, S(0.5)));
}

// value-level convenience for scalar q/p pairs (tests, diagnostics)
template <class S>
S gaussian_kl_scalar(S mu_q, S sigma_q, S mu_p, S sigma_p) {
    if (sigma_q <= 0 || sigma_p <= 0) throw std::invalid_argument("gaussian_kl: nonpositive scale");
    const S r = sigma_q / sigma_p;
    const S d = (mu_p - mu_q) / sigma_p;
    return S(0.5) * (r * r + d * d - S(1)) + std::log(sigma_p / sigma_q);
}

// sum_i sum_k m log m with the 0 log 0 := 0 convention (clamp at 1e-12
// inside the log); masks are K x (B*D), result 1 x B
template <class S>
Var<S> mask_entropy_term(Var<S> masks, int pixels) {
    Var<S> logm = log_op(clamp(masks, S(1e-12), S(1)));
    return block_colsum(sum_rows(cmul(masks, logm)), pixels);
}

struct PerCellLoss {
    int t = 0;
    int r = 0;
    int r_hat = 0;
    double weight = 0.0;        // r / r_hat
    double log_likelihood = 0;  // batch mean, unweighted
    double kl = 0;              // batch mean, unweighted
    double entropy_term = 0;    // batch mean of sum m log m
};

template <class S>
struct LossBreakdown {
    Var<S> total;        // scalar node the trainer minimizes
    double nll = 0;      // weighted, before beta
    double kl = 0;       // weighted, before psi
    double entropy_term = 0;  // weighted, before gamma
    double total_value = 0;
    std::vector<PerCellLoss> per_cell;
};

}  // namespace uvd
