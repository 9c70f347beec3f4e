#pragma once

#include <uvd/model.hpp>

// Conditional prior network: maps the previous frame's final temporal hidden
// state to the Gaussian prior parameters of the current frame's latents. The
// network predicts log sigma for stability; the prior is computed once per
// frame and reused by every refinement cell of that frame.

namespace uvd {

template <class S>
struct PriorParams {
    Var<S> mu;         // M x N
    Var<S> log_sigma;  // M x N, clamped to [-6, 6]
    Var<S> sigma;      // exp(log_sigma) > 0
};

template <class S>
PriorParams<S> prior_params(Tape<S>& tape, Var<S> h_time, const PriorNetNodes<S>& net, int m) {
    if (!h_time.v().allFinite()) throw std::invalid_argument("prior_params: non-finite hidden state");
    Var<S> a1 = elu(apply(net.fc1, h_time));
    Var<S> out = apply(net.fc2, a1);  // 2M x N
    if (out.rows() != 2 * m) throw std::invalid_argument("prior_params: head width != 2M");
    PriorParams<S> p;
    p.mu = slice_rows(out, 0, m);
    p.log_sigma = clamp(slice_rows(out, m, m), S(-6), S(6));
    p.sigma = exp_op(p.log_sigma);
    return p;
}

}  // namespace uvd
