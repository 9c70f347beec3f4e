#pragma once

#include <uvd/layout.hpp>
#include <uvd/model.hpp>

#include <cmath>
#include <vector>

// Spatial-mixture scene model: per-slot broadcast decoding of latents
// (conditioned on the temporal hidden state) into masks and appearance means,
// frame reconstruction, and the mixture log-likelihood. All functions are
// pure in (inputs, params) and operate on the batched column layouts from
// layout.hpp.

namespace uvd {

template <class S>
struct SlotDecode {
    GridShapes shapes;
    Var<S> mask_logits;  // 1 x (N*D), image columns
    Var<S> log_masks;    // K x (B*D), per-pixel log-softmax over slots
    Var<S> masks;        // K x (B*D)
    Var<S> means;        // C x (N*D), image columns, squashed to [0, 1]
};

// z: M x N latents, h_time: Hh x N temporal hidden state (slot columns).
// The (z, h) pair runs through the pre-decoder MLP back to width M, is tiled
// over the padded grid with two coordinate channels, decoded by the conv
// trunk, projected to C+1 channels, and center-cropped.
template <class S>
SlotDecode<S> decode_slots(Tape<S>& tape, Var<S> z, Var<S> h_time, const DecoderNodes<S>& dec,
                           const GridShapes& s) {
    if (z.rows() != s.M || z.cols() != s.N()) throw std::invalid_argument("decode_slots: latent shape");
    if (h_time.rows() != s.Hh || h_time.cols() != s.N()) throw std::invalid_argument("decode_slots: hidden shape");
    if (!z.v().allFinite() || !h_time.v().allFinite())
        throw std::invalid_argument("decode_slots: non-finite input");

    Var<S> a1 = elu(apply(dec.mlp1, vstack<S>({z, h_time})));
    Var<S> code = apply(dec.mlp2, a1);

    Var<S> tiled = broadcast_spatial(code, s.Dp());
    Var<S> coords = tape.constant(layout::coord_channels<S>(s.Hp(), s.Wp(), s.N()));
    Var<S> x = vstack<S>({tiled, coords});

    for (const auto& conv : dec.trunk) x = elu(apply(conv, x, s.Hp(), s.Wp(), s.N()));
    Var<S> projected = apply(dec.proj, x);  // (C+1) x (N*Dp)

    Var<S> cropped = remap(projected, layout::crop_map(s, s.C + 1), s.C + 1, s.N() * s.D());

    SlotDecode<S> out;
    out.shapes = s;
    out.means = sigmoid(slice_rows(cropped, 0, s.C));
    out.mask_logits = slice_rows(cropped, s.C, 1);
    Var<S> logits_k = remap(out.mask_logits, layout::rows_from_images(s), s.K, s.B * s.D());
    out.log_masks = colwise_log_softmax(logits_k);
    out.masks = exp_op(out.log_masks);
    return out;
}

// slot-k extraction of the means: C x (B*D)
template <class S>
Var<S> slot_means(const SlotDecode<S>& d, int k) {
    return remap(d.means, layout::slot_block(d.shapes, d.shapes.C, k), d.shapes.C, d.shapes.B * d.shapes.D());
}

// x_tilde_i = sum_k m_i^(k) mu_i^(k): C x (B*D)
template <class S>
Var<S> reconstruct(const SlotDecode<S>& d) {
    const GridShapes& s = d.shapes;
    Var<S> acc;
    for (int k = 0; k < s.K; ++k) {
        Var<S> mk = slice_rows(d.masks, k, 1);
        if (s.C > 1) mk = remap(mk, layout::rep_rows_map(s.C, s.B * s.D()), s.C, s.B * s.D());
        Var<S> term = cmul(mk, slot_means(d, k));
        acc = k == 0 ? term : add(acc, term);
    }
    return acc;
}

// Per-slot Gaussian log-densities and the mixture terms reused by both the
// objective and the refinement inputs.
template <class S>
struct LikelihoodTerms {
    Var<S> log_gauss;      // K x (B*D): sum_c log N(x_c; mu_c, sigma^2)
    Var<S> log_weighted;   // K x (B*D): log m + log N
    Var<S> log_px;         // 1 x (B*D): logsumexp over slots
    Var<S> ll_per_elem;    // 1 x B: sum over pixels
};

template <class S>
LikelihoodTerms<S> likelihood_terms(Tape<S>& tape, Var<S> frame, const SlotDecode<S>& d, double sigma) {
    if (sigma <= 0) throw std::invalid_argument("log_likelihood: sigma must be positive");
    const GridShapes& s = d.shapes;
    if (frame.rows() != s.C || frame.cols() != static_cast<Eigen::Index>(s.B) * s.D())
        throw std::invalid_argument("log_likelihood: frame shape");

    const S inv2s2 = static_cast<S>(-0.5 / (sigma * sigma));
    const S log_norm = static_cast<S>(-s.C * (std::log(sigma) + 0.5 * std::log(2.0 * M_PI)));

    std::vector<Var<S>> rows;
    rows.reserve(static_cast<size_t>(s.K));
    for (int k = 0; k < s.K; ++k) {
        Var<S> diff = sub(slot_means(d, k), frame);
        Var<S> q = sum_rows(cmul(diff, diff));  // 1 x (B*D)
        rows.push_back(add_scalar(scale(q, inv2s2), log_norm));
    }
    LikelihoodTerms<S> t;
    t.log_gauss = vstack<S>(rows);
    t.log_weighted = add(d.log_masks, t.log_gauss);
    t.log_px = colwise_logsumexp(t.log_weighted);
    t.ll_per_elem = block_colsum(t.log_px, s.D());
    return t;
}

// scalar sum over pixels and batch of log p(x | decode)
template <class S>
Var<S> log_likelihood(Tape<S>& tape, Var<S> frame, const SlotDecode<S>& d, double sigma) {
    return sum_all(likelihood_terms(tape, frame, d, sigma).ll_per_elem);
}

// Decode with z[dim] := v for each requested value and return the
// reconstructed frames (values, C x D each); single-element, all-slot decode
// with only the chosen slot's latent dimension varied.
template <class S>
std::vector<Mat<S>> traverse_latent(const Mat<S>& latents /* M x K */, const Mat<S>& h_time /* Hh x K */,
                                    int slot, int dim, const std::vector<S>& values,
                                    const ModelParams<S>& params, const GridShapes& shapes) {
    if (dim < 0 || dim >= shapes.M) throw std::invalid_argument("traverse_latent: dim out of range");
    if (slot < 0 || slot >= shapes.K) throw std::invalid_argument("traverse_latent: slot out of range");
    GridShapes s = shapes;
    s.B = 1;
    std::vector<Mat<S>> frames;
    frames.reserve(values.size());
    for (S v : values) {
        Tape<S> tape;
        ModelNodes<S> nodes = upload(tape, params);
        Mat<S> z = latents;
        z(dim, slot) = v;
        SlotDecode<S> d = decode_slots(tape, tape.constant(z), tape.constant(h_time), nodes.dec, s);
        frames.push_back(reconstruct(d).v());
    }
    return frames;
}

}  // namespace uvd
