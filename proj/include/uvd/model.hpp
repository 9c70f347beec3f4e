#pragma once

#include <uvd/config.hpp>
#include <uvd/nn.hpp>

#include <random>
#include <string>

// Parameter groups: the broadcast decoder (shared across slots), the
// refinement network (conv encoder + 2D-LSTM + update head), and the
// conditional prior network. visit() walks every matrix in a fixed order for
// the optimizer, checkpoints, and gradient tests.

namespace uvd {

template <class S>
struct DecoderParams {
    Dense<S> mlp1, mlp2;              // (M + Hh) -> mlp_width -> M
    std::array<ConvWeights<S>, 4> trunk;
    Dense<S> proj;                    // 1x1 projection to C+1 channels

    template <class F>
    void visit(F&& f) {
        f("dec.mlp1.w", mlp1.w);
        f("dec.mlp1.b", mlp1.b);
        f("dec.mlp2.w", mlp2.w);
        f("dec.mlp2.b", mlp2.b);
        for (size_t i = 0; i < trunk.size(); ++i) {
            f("dec.trunk" + std::to_string(i) + ".w", trunk[i].w);
            f("dec.trunk" + std::to_string(i) + ".b", trunk[i].b);
        }
        f("dec.proj.w", proj.w);
        f("dec.proj.b", proj.b);
    }
};

template <class S>
struct RefinementParams {
    std::array<ConvWeights<S>, 3> enc;  // stride-2 convs
    Dense<S> enc_fc;                    // flattened conv features -> Hh
    Dense<S> lstm;                      // 5*Hh x (x_in + 2*Hh): i, f_ref, f_time, o, g
    Dense<S> head;                      // 2M x Hh, zero-initialized

    template <class F>
    void visit(F&& f) {
        for (size_t i = 0; i < enc.size(); ++i) {
            f("ref.enc" + std::to_string(i) + ".w", enc[i].w);
            f("ref.enc" + std::to_string(i) + ".b", enc[i].b);
        }
        f("ref.enc_fc.w", enc_fc.w);
        f("ref.enc_fc.b", enc_fc.b);
        f("ref.lstm.w", lstm.w);
        f("ref.lstm.b", lstm.b);
        f("ref.head.w", head.w);
        f("ref.head.b", head.b);
    }
};

template <class S>
struct PriorNetParams {
    Dense<S> fc1;  // Hh -> Hh
    Dense<S> fc2;  // Hh -> 2M, zero-initialized so training starts from N(0, I)

    template <class F>
    void visit(F&& f) {
        f("prior.fc1.w", fc1.w);
        f("prior.fc1.b", fc1.b);
        f("prior.fc2.w", fc2.w);
        f("prior.fc2.b", fc2.b);
    }
};

// image-scale refinement channels: x (C), mu (C), mask (1), mask logits (1),
// mask posterior (1), grad mu (C), grad mask (1), pixel likelihood (1),
// leave-one-out likelihood (1), coords (2)
inline int refinement_image_channels(int c) { return 3 * c + 8; }

template <class S>
struct ModelParams {
    DecoderParams<S> dec;
    RefinementParams<S> ref;
    PriorNetParams<S> prior;

    template <class F>
    void visit(F&& f) {
        dec.visit(f);
        ref.visit(f);
        prior.visit(f);
    }

    size_t parameter_count() {
        size_t n = 0;
        visit([&](const std::string&, Mat<S>& m) { n += static_cast<size_t>(m.size()); });
        return n;
    }
};

template <class S>
ModelParams<S> init_model(const ModelConfig& cfg) {
    if (cfg.height <= 0 || cfg.width <= 0)
        throw std::invalid_argument("init_model: height/width must be set (from the dataset)");
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x6d6f64656cull));
    ModelParams<S> p;

    p.dec.mlp1 = make_dense<S>(cfg.m + cfg.h_hid, cfg.dec_mlp_width, rng);
    p.dec.mlp2 = make_dense<S>(cfg.dec_mlp_width, cfg.m, rng);
    int cin = cfg.m + 2;
    for (auto& t : p.dec.trunk) {
        t = make_conv<S>(cin, cfg.dec_width, 3, 1, rng);
        cin = cfg.dec_width;
    }
    p.dec.proj = make_dense<S>(cfg.dec_width, cfg.channels + 1, rng);

    int ec = refinement_image_channels(cfg.channels);
    int eh = cfg.height, ew = cfg.width;
    for (size_t i = 0; i < p.ref.enc.size(); ++i) {
        p.ref.enc[i] = make_conv<S>(ec, cfg.enc_widths[i], 3, 2, rng);
        ec = cfg.enc_widths[i];
        eh = conv_out_dim(eh, 3, 2, 1);
        ew = conv_out_dim(ew, 3, 2, 1);
    }
    p.ref.enc_fc = make_dense<S>(ec * eh * ew, cfg.h_hid, rng);
    const int x_in = cfg.h_hid + 2 * cfg.lambda_dim();
    p.ref.lstm = make_dense<S>(x_in + 2 * cfg.h_hid, 5 * cfg.h_hid, rng);
    p.ref.head = make_dense<S>(cfg.h_hid, cfg.lambda_dim(), rng, /*zero_init=*/true);

    p.prior.fc1 = make_dense<S>(cfg.h_hid, cfg.h_hid, rng);
    p.prior.fc2 = make_dense<S>(cfg.h_hid, cfg.lambda_dim(), rng, /*zero_init=*/true);
    return p;
}

// tape-side mirror of ModelParams
template <class S>
struct DecoderNodes {
    DenseNodes<S> mlp1, mlp2;
    std::array<ConvNodes<S>, 4> trunk;
    DenseNodes<S> proj;
};

template <class S>
struct RefinementNodes {
    std::array<ConvNodes<S>, 3> enc;
    DenseNodes<S> enc_fc;
    DenseNodes<S> lstm;
    DenseNodes<S> head;
};

template <class S>
struct PriorNetNodes {
    DenseNodes<S> fc1, fc2;
};

template <class S>
struct ModelNodes {
    DecoderNodes<S> dec;
    RefinementNodes<S> ref;
    PriorNetNodes<S> prior;
};

template <class S>
ModelNodes<S> upload(Tape<S>& tape, const ModelParams<S>& p) {
    ModelNodes<S> n;
    n.dec.mlp1 = upload(tape, p.dec.mlp1);
    n.dec.mlp2 = upload(tape, p.dec.mlp2);
    for (size_t i = 0; i < p.dec.trunk.size(); ++i) n.dec.trunk[i] = upload(tape, p.dec.trunk[i]);
    n.dec.proj = upload(tape, p.dec.proj);
    for (size_t i = 0; i < p.ref.enc.size(); ++i) n.ref.enc[i] = upload(tape, p.ref.enc[i]);
    n.ref.enc_fc = upload(tape, p.ref.enc_fc);
    n.ref.lstm = upload(tape, p.ref.lstm);
    n.ref.head = upload(tape, p.ref.head);
    n.prior.fc1 = upload(tape, p.prior.fc1);
    n.prior.fc2 = upload(tape, p.prior.fc2);
    return n;
}

// Vars in the same visit() order as ModelParams, for reading gradients back
template <class S>
std::vector<Var<S>> parameter_vars(const ModelNodes<S>& n) {
    std::vector<Var<S>> out;
    out.push_back(n.dec.mlp1.w);
    out.push_back(n.dec.mlp1.b);
    out.push_back(n.dec.mlp2.w);
    out.push_back(n.dec.mlp2.b);
    for (const auto& t : n.dec.trunk) {
        out.push_back(t.w);
        out.push_back(t.b);
    }
    out.push_back(n.dec.proj.w);
    out.push_back(n.dec.proj.b);
    for (const auto& e : n.ref.enc) {
        out.push_back(e.w);
        out.push_back(e.b);
    }
    out.push_back(n.ref.enc_fc.w);
    out.push_back(n.ref.enc_fc.b);
    out.push_back(n.ref.lstm.w);
    out.push_back(n.ref.lstm.b);
    out.push_back(n.ref.head.w);
    out.push_back(n.ref.head.b);
    out.push_back(n.prior.fc1.w);
    out.push_back(n.prior.fc1.b);
    out.push_back(n.prior.fc2.w);
    out.push_back(n.prior.fc2.b);
    return out;
}

}  // namespace uvd
