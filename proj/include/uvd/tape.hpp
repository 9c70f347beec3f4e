#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

// Reverse-mode autodiff over dense Eigen matrices. A Tape owns the nodes of
// one forward computation; nodes are created in topological order and
// backward() sweeps ids in reverse. Partial sweeps (a floor id) support
// gradients of intermediate losses w.r.t. recent nodes without touching the
// rest of the graph.

namespace uvd {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
class Tape;

template <class S>
struct Var {
    Tape<S>* tape = nullptr;
    int id = -1;

    const Mat<S>& v() const;
    Eigen::Index rows() const { return v().rows(); }
    Eigen::Index cols() const { return v().cols(); }
    explicit operator bool() const { return tape != nullptr && id >= 0; }
};

template <class S>
class Tape {
  public:
    class GradStore;
    // pull(g_out, self_value, grads): scatter g_out into the parents' slots.
    using Pull = std::function<void(const Mat<S>&, const Mat<S>&, GradStore&)>;

    struct Node {
        Mat<S> value;
        Pull pull;
        bool needs_grad = false;
        bool keep_grad = false;
    };

    class GradStore {
      public:
        GradStore(const Tape* tape, int floor)
            : tape_(tape), floor_(floor), g_(tape->size() - floor), has_(tape->size() - floor, 0) {}

        int floor() const { return floor_; }

        bool has(int id) const { return id >= floor_ && has_[id - floor_]; }

        // Accumulation slot for a node; zero-initialized on first touch.
        // Writes to nodes below the floor or without grad demand go to a
        // scratch buffer and are discarded.
        Mat<S>& acc(const Var<S>& var) {
            const Node& n = tape_->node(var.id);
            if (var.id < floor_ || !n.needs_grad) {
                scratch_.setZero(n.value.rows(), n.value.cols());
                return scratch_;
            }
            Mat<S>& slot = g_[var.id - floor_];
            if (!has_[var.id - floor_]) {
                slot.setZero(n.value.rows(), n.value.cols());
                has_[var.id - floor_] = 1;
            }
            return slot;
        }

        const Mat<S>& at(int id) const {
            if (!has(id)) throw std::logic_error("GradStore: no gradient at node");
            return g_[id - floor_];
        }

        // Gradient of the swept root w.r.t. var; zeros if the root does not
        // depend on it.
        Mat<S> grad(const Var<S>& var) const {
            if (has(var.id)) return g_[var.id - floor_];
            return Mat<S>::Zero(var.rows(), var.cols());
        }

        void release(int id) {
            if (id >= floor_ && has_[id - floor_]) {
                g_[id - floor_].resize(0, 0);
                has_[id - floor_] = 0;
            }
        }

      private:
        const Tape* tape_;
        int floor_ = 0;
        std::vector<Mat<S>> g_;
        std::vector<char> has_;
        Mat<S> scratch_;
    };

    Var<S> constant(Mat<S> v) { return push(std::move(v), false, false, nullptr); }

    // Gradient target that is not a model parameter (e.g. the initial
    // posterior): grads flow through it and are kept for inspection.
    Var<S> leaf(Mat<S> v) { return push(std::move(v), true, true, nullptr); }

    Var<S> param(Mat<S> v) { return push(std::move(v), true, true, nullptr); }

    Var<S> make(Mat<S> v, bool needs_grad, Pull pull) {
        return push(std::move(v), needs_grad, false, std::move(pull));
    }

    const Mat<S>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    GradStore grad_store(int floor = 0) const { return GradStore(this, floor); }

    // Reverse sweep from a scalar root down to gs.floor(). Non-kept grads are
    // released as soon as their node has been processed; ids in `retain` stay
    // readable afterwards.
    void backward(const Var<S>& root, GradStore& gs, const std::vector<int>& retain = {}) const {
        if (root.rows() != 1 || root.cols() != 1)
            throw std::invalid_argument("backward: root must be a 1x1 scalar");
        gs.acc(root)(0, 0) += S(1);
        for (int i = root.id; i >= gs.floor(); --i) {
            if (!gs.has(i)) continue;
            const Node& n = nodes_[static_cast<size_t>(i)];
            if (n.pull) n.pull(gs.at(i), n.value, gs);
            if (!n.keep_grad && std::find(retain.begin(), retain.end(), i) == retain.end()) gs.release(i);
        }
    }

  private:
    Var<S> push(Mat<S> v, bool needs_grad, bool keep, Pull pull) {
        nodes_.push_back(Node{std::move(v), std::move(pull), needs_grad, keep});
        return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
};

template <class S>
const Mat<S>& Var<S>::v() const {
    return tape->value(id);
}

namespace detail {
template <class S>
inline void check_same_tape(const Var<S>& a, const Var<S>& b) {
    if (a.tape != b.tape) throw std::invalid_argument("ops require vars on the same tape");
}
template <class S>
inline void check_same_shape(const Var<S>& a, const Var<S>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("shape mismatch");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise and linear ops

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b);
    return a.tape->make(a.v() + b.v(), a.tape->node(a.id).needs_grad || b.tape->node(b.id).needs_grad,
                        [a, b](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a) += g;
                            gs.acc(b) += g;
                        });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b);
    return a.tape->make(a.v() - b.v(), a.tape->node(a.id).needs_grad || b.tape->node(b.id).needs_grad,
                        [a, b](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a) += g;
                            gs.acc(b) -= g;
                        });
}

template <class S>
Var<S> cmul(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    detail::check_same_shape(a, b);
    return a.tape->make((a.v().array() * b.v().array()).matrix(),
                        a.tape->node(a.id).needs_grad || b.tape->node(b.id).needs_grad,
                        [a, b](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() += g.array() * b.v().array();
                            gs.acc(b).array() += g.array() * a.v().array();
                        });
}

template <class S>
Var<S> scale(Var<S> a, S c) {
    return a.tape->make(a.v() * c, a.tape->node(a.id).needs_grad,
                        [a, c](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a) += g * c;
                        });
}

template <class S>
Var<S> add_scalar(Var<S> a, S c) {
    return a.tape->make((a.v().array() + c).matrix(), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a) += g;
                        });
}

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
    detail::check_same_tape(a, b);
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims");
    return a.tape->make(a.v() * b.v(), a.tape->node(a.id).needs_grad || b.tape->node(b.id).needs_grad,
                        [a, b](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).noalias() += g * b.v().transpose();
                            gs.acc(b).noalias() += a.v().transpose() * g;
                        });
}

// column-broadcast bias add: a (m x n) + v (m x 1)
template <class S>
Var<S> add_colvec(Var<S> a, Var<S> v) {
    detail::check_same_tape(a, v);
    if (v.cols() != 1 || v.rows() != a.rows()) throw std::invalid_argument("add_colvec: v must be m x 1");
    Mat<S> out = a.v();
    out.colwise() += v.v().col(0);
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad || v.tape->node(v.id).needs_grad,
                        [a, v](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a) += g;
                            gs.acc(v).col(0) += g.rowwise().sum();
                        });
}

// ---------------------------------------------------------------------------
// nonlinearities

template <class S>
Var<S> sigmoid(Var<S> a) {
    Mat<S> out = (S(1) / (S(1) + (-a.v().array()).exp())).matrix();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() += g.array() * y.array() * (S(1) - y.array());
                        });
}

template <class S>
Var<S> tanh_op(Var<S> a) {
    Mat<S> out = a.v().array().tanh().matrix();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() += g.array() * (S(1) - y.array().square());
                        });
}

template <class S>
Var<S> elu(Var<S> a) {
    Mat<S> out = (a.v().array() > S(0)).select(a.v().array(), a.v().array().exp() - S(1)).matrix();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() +=
                                g.array() * (a.v().array() > S(0)).select(Mat<S>::Ones(y.rows(), y.cols()).array(),
                                                                          y.array() + S(1));
                        });
}

template <class S>
Var<S> exp_op(Var<S> a) {
    Mat<S> out = a.v().array().exp().matrix();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() += g.array() * y.array();
                        });
}

template <class S>
Var<S> log_op(Var<S> a) {
    Mat<S> out = a.v().array().log().matrix();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() += g.array() / a.v().array();
                        });
}

// hard clamp; gradient passes only inside [lo, hi]
template <class S>
Var<S> clamp(Var<S> a, S lo, S hi) {
    Mat<S> out = a.v().array().max(lo).min(hi).matrix();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a, lo, hi](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            auto inside = (a.v().array() >= lo && a.v().array() <= hi);
                            gs.acc(a).array() += inside.select(g.array(), Mat<S>::Zero(g.rows(), g.cols()).array());
                        });
}

// ---------------------------------------------------------------------------
// structural ops

template <class S>
Var<S> vstack(const std::vector<Var<S>>& parts) {
    if (parts.empty()) throw std::invalid_argument("vstack: empty");
    Tape<S>* t = parts.front().tape;
    Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    bool ng = false;
    for (const auto& p : parts) {
        if (p.tape != t || p.cols() != cols) throw std::invalid_argument("vstack: mismatched parts");
        rows += p.rows();
        ng = ng || t->node(p.id).needs_grad;
    }
    Mat<S> out(rows, cols);
    Eigen::Index r0 = 0;
    for (const auto& p : parts) {
        out.middleRows(r0, p.rows()) = p.v();
        r0 += p.rows();
    }
    return t->make(std::move(out), ng,
                   [parts](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                       Eigen::Index r0 = 0;
                       for (const auto& p : parts) {
                           gs.acc(p) += g.middleRows(r0, p.rows());
                           r0 += p.rows();
                       }
                   });
}

template <class S>
Var<S> slice_rows(Var<S> a, int r0, int nrows) {
    if (r0 < 0 || nrows < 1 || r0 + nrows > a.rows()) throw std::invalid_argument("slice_rows: range");
    return a.tape->make(a.v().middleRows(r0, nrows), a.tape->node(a.id).needs_grad,
                        [a, r0, nrows](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).middleRows(r0, nrows) += g;
                        });
}

// out(i, j) = a(flat[j * out_rows + i]) with column-major flat indices into a.
// Repeated indices accumulate in the backward pass, so remap covers crops,
// replication, and layout restacking with one op.
template <class S>
Var<S> remap(Var<S> a, std::shared_ptr<const std::vector<int>> flat, int out_rows, int out_cols) {
    if (static_cast<int>(flat->size()) != out_rows * out_cols)
        throw std::invalid_argument("remap: index count");
    Mat<S> out(out_rows, out_cols);
    const S* src = a.v().data();
    S* dst = out.data();
    const auto& idx = *flat;
    for (size_t i = 0; i < idx.size(); ++i) dst[i] = src[idx[i]];
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a, flat](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            Mat<S>& ga = gs.acc(a);
                            S* gdst = ga.data();
                            const S* gsrc = g.data();
                            const auto& idx2 = *flat;
                            for (size_t i = 0; i < idx2.size(); ++i) gdst[idx2[i]] += gsrc[i];
                        });
}

// tile each column of a (m x n) across hw spatial positions -> m x (n * hw)
template <class S>
Var<S> broadcast_spatial(Var<S> a, int hw) {
    const Eigen::Index m = a.rows(), n = a.cols();
    Mat<S> out(m, n * hw);
    for (Eigen::Index j = 0; j < n; ++j) out.middleCols(j * hw, hw).colwise() = a.v().col(j);
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a, hw](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            Mat<S>& ga = gs.acc(a);
                            for (Eigen::Index j = 0; j < a.cols(); ++j)
                                ga.col(j) += g.middleCols(j * hw, hw).rowwise().sum();
                        });
}

// ---------------------------------------------------------------------------
// reductions and per-column distributions

template <class S>
Var<S> sum_all(Var<S> a) {
    Mat<S> out(1, 1);
    out(0, 0) = a.v().sum();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).array() += g(0, 0);
                        });
}

template <class S>
Var<S> sum_rows(Var<S> a) {
    Mat<S> out = a.v().colwise().sum();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(a).rowwise() += g.row(0);
                        });
}

// sum consecutive column blocks of width `block`: m x (n*block) -> m x n
template <class S>
Var<S> block_colsum(Var<S> a, int block) {
    if (block < 1 || a.cols() % block != 0) throw std::invalid_argument("block_colsum: width");
    const Eigen::Index n = a.cols() / block;
    Mat<S> out(a.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) out.col(j) = a.v().middleCols(j * block, block).rowwise().sum();
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a, block](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            Mat<S>& ga = gs.acc(a);
                            for (Eigen::Index j = 0; j < g.cols(); ++j)
                                ga.middleCols(j * block, block).colwise() += g.col(j);
                        });
}

template <class S>
Var<S> colwise_softmax(Var<S> a) {
    Mat<S> out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        auto c = a.v().col(j).array();
        Eigen::Array<S, Eigen::Dynamic, 1> e = (c - c.maxCoeff()).exp();
        out.col(j) = (e / e.sum()).matrix();
    }
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            Mat<S>& ga = gs.acc(a);
                            for (Eigen::Index j = 0; j < g.cols(); ++j) {
                                S dot = (g.col(j).array() * y.col(j).array()).sum();
                                ga.col(j).array() += y.col(j).array() * (g.col(j).array() - dot);
                            }
                        });
}

template <class S>
Var<S> colwise_log_softmax(Var<S> a) {
    Mat<S> out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        auto c = a.v().col(j).array();
        S m = c.maxCoeff();
        S lse = m + std::log((c - m).exp().sum());
        out.col(j) = (c - lse).matrix();
    }
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            Mat<S>& ga = gs.acc(a);
                            for (Eigen::Index j = 0; j < g.cols(); ++j) {
                                S gsum = g.col(j).sum();
                                ga.col(j).array() += g.col(j).array() - y.col(j).array().exp() * gsum;
                            }
                        });
}

template <class S>
Var<S> colwise_logsumexp(Var<S> a) {
    Mat<S> out(1, a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        auto c = a.v().col(j).array();
        S m = c.maxCoeff();
        out(0, j) = m + std::log((c - m).exp().sum());
    }
    return a.tape->make(std::move(out), a.tape->node(a.id).needs_grad,
                        [a](const Mat<S>& g, const Mat<S>& y, typename Tape<S>::GradStore& gs) {
                            Mat<S>& ga = gs.acc(a);
                            for (Eigen::Index j = 0; j < g.cols(); ++j)
                                ga.col(j).array() += g(0, j) * (a.v().col(j).array() - y(0, j)).exp();
                        });
}

// ---------------------------------------------------------------------------
// convolution (im2col + GEMM)

struct ConvSpec {
    int cin = 0, h = 0, w = 0, n = 0;  // input: cin x (n*h*w)
    int cout = 0, k = 3, stride = 1, pad = 1;

    int ho() const { return (h + 2 * pad - k) / stride + 1; }
    int wo() const { return (w + 2 * pad - k) / stride + 1; }
};

template <class S>
Mat<S> im2col(const Mat<S>& x, const ConvSpec& c) {
    const int ho = c.ho(), wo = c.wo();
    Mat<S> col = Mat<S>::Zero(c.cin * c.k * c.k, static_cast<Eigen::Index>(c.n) * ho * wo);
    for (int n = 0; n < c.n; ++n) {
        const Eigen::Index xbase = static_cast<Eigen::Index>(n) * c.h * c.w;
        const Eigen::Index cbase = static_cast<Eigen::Index>(n) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                const Eigen::Index cc = cbase + static_cast<Eigen::Index>(oy) * wo + ox;
                for (int ky = 0; ky < c.k; ++ky) {
                    const int iy = oy * c.stride - c.pad + ky;
                    if (iy < 0 || iy >= c.h) continue;
                    for (int kx = 0; kx < c.k; ++kx) {
                        const int ix = ox * c.stride - c.pad + kx;
                        if (ix < 0 || ix >= c.w) continue;
                        col.block((ky * c.k + kx) * c.cin, cc, c.cin, 1) =
                            x.block(0, xbase + static_cast<Eigen::Index>(iy) * c.w + ix, c.cin, 1);
                    }
                }
            }
        }
    }
    return col;
}

template <class S>
void col2im_add(const Mat<S>& dcol, const ConvSpec& c, Mat<S>& dx) {
    const int ho = c.ho(), wo = c.wo();
    for (int n = 0; n < c.n; ++n) {
        const Eigen::Index xbase = static_cast<Eigen::Index>(n) * c.h * c.w;
        const Eigen::Index cbase = static_cast<Eigen::Index>(n) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                const Eigen::Index cc = cbase + static_cast<Eigen::Index>(oy) * wo + ox;
                for (int ky = 0; ky < c.k; ++ky) {
                    const int iy = oy * c.stride - c.pad + ky;
                    if (iy < 0 || iy >= c.h) continue;
                    for (int kx = 0; kx < c.k; ++kx) {
                        const int ix = ox * c.stride - c.pad + kx;
                        if (ix < 0 || ix >= c.w) continue;
                        dx.block(0, xbase + static_cast<Eigen::Index>(iy) * c.w + ix, c.cin, 1) +=
                            dcol.block((ky * c.k + kx) * c.cin, cc, c.cin, 1);
                    }
                }
            }
        }
    }
}

// x: cin x (n*h*w), w: cout x (cin*k*k), b: cout x 1 -> cout x (n*ho*wo).
// The im2col buffer is rebuilt in the backward pass instead of being stored.
template <class S>
Var<S> conv2d(Var<S> x, Var<S> w, Var<S> b, ConvSpec c) {
    if (x.rows() != c.cin || x.cols() != static_cast<Eigen::Index>(c.n) * c.h * c.w)
        throw std::invalid_argument("conv2d: input shape");
    if (w.rows() != c.cout || w.cols() != static_cast<Eigen::Index>(c.cin) * c.k * c.k)
        throw std::invalid_argument("conv2d: weight shape");
    Mat<S> col = im2col(x.v(), c);
    Mat<S> out = w.v() * col;
    out.colwise() += b.v().col(0);
    bool ng = x.tape->node(x.id).needs_grad || w.tape->node(w.id).needs_grad || b.tape->node(b.id).needs_grad;
    return x.tape->make(std::move(out), ng,
                        [x, w, b, c](const Mat<S>& g, const Mat<S>&, typename Tape<S>::GradStore& gs) {
                            gs.acc(b).col(0) += g.rowwise().sum();
                            Mat<S> col = im2col(x.v(), c);
                            gs.acc(w).noalias() += g * col.transpose();
                            if (x.tape->node(x.id).needs_grad) {
                                Mat<S> dcol = w.v().transpose() * g;
                                col2im_add(dcol, c, gs.acc(x));
                            }
                        });
}

}  // namespace uvd
