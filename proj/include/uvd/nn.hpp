#pragma once

#include <uvd/tape.hpp>

#include <random>
#include <string>

// Parameter containers for the small set of layer types the model uses, and
// their tape-side application. Weights live in plain Eigen matrices so the
// optimizer, checkpointing, and finite-difference tests can walk them through
// the visit() functions.

namespace uvd {

// deterministic seed derivation for independent substreams
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

template <class S>
struct Dense {
    Mat<S> w;  // out x in
    Mat<S> b;  // out x 1
};

template <class S>
Dense<S> make_dense(int in, int out, std::mt19937_64& rng, bool zero_init = false) {
    Dense<S> d;
    d.w.setZero(out, in);
    d.b.setZero(out, 1);
    if (!zero_init) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (in + out)));
        for (Eigen::Index j = 0; j < d.w.cols(); ++j)
            for (Eigen::Index i = 0; i < d.w.rows(); ++i) d.w(i, j) = static_cast<S>(dist(rng));
    }
    return d;
}

template <class S>
struct ConvWeights {
    Mat<S> w;  // cout x (cin*k*k)
    Mat<S> b;  // cout x 1
    int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
};

template <class S>
ConvWeights<S> make_conv(int cin, int cout, int k, int stride, std::mt19937_64& rng) {
    ConvWeights<S> c;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.stride = stride;
    c.pad = k / 2;
    const int fan_in = cin * k * k, fan_out = cout * k * k;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
    c.w.setZero(cout, cin * k * k);
    for (Eigen::Index j = 0; j < c.w.cols(); ++j)
        for (Eigen::Index i = 0; i < c.w.rows(); ++i) c.w(i, j) = static_cast<S>(dist(rng));
    c.b.setZero(cout, 1);
    return c;
}

// tape-side handles
template <class S>
struct DenseNodes {
    Var<S> w, b;
};

template <class S>
struct ConvNodes {
    Var<S> w, b;
    int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
};

template <class S>
DenseNodes<S> upload(Tape<S>& tape, const Dense<S>& d) {
    return DenseNodes<S>{tape.param(d.w), tape.param(d.b)};
}

template <class S>
ConvNodes<S> upload(Tape<S>& tape, const ConvWeights<S>& c) {
    return ConvNodes<S>{tape.param(c.w), tape.param(c.b), c.cin, c.cout, c.k, c.stride, c.pad};
}

template <class S>
Var<S> apply(const DenseNodes<S>& d, Var<S> x) {
    return add_colvec(matmul(d.w, x), d.b);
}

// x: cin x (n*h*w) image batch
template <class S>
Var<S> apply(const ConvNodes<S>& c, Var<S> x, int h, int w, int n) {
    ConvSpec spec;
    spec.cin = c.cin;
    spec.h = h;
    spec.w = w;
    spec.n = n;
    spec.cout = c.cout;
    spec.k = c.k;
    spec.stride = c.stride;
    spec.pad = c.pad;
    return conv2d(x, c.w, c.b, spec);
}

inline int conv_out_dim(int size, int k, int stride, int pad) { return (size + 2 * pad - k) / stride + 1; }

}  // namespace uvd
