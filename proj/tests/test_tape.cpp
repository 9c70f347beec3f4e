#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <uvd/tape.hpp>

#include "gradcheck.hpp"

#include <memory>
#include <random>

using uvd::Mat;
using uvd::Tape;
using uvd::Var;
namespace T = uvd::test;

namespace {

// Generic check: build(tape, x) -> scalar var; gradient w.r.t. x via the tape
// must match central differences.
void check_op(const std::function<Var<double>(Tape<double>&, Var<double>)>& build, int r, int c,
              uint64_t seed, double tol = 1e-7, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    Mat<double> x0 = T::random_mat(rng, r, c, scale);

    auto forward = [&](const std::vector<double>& theta) {
        Tape<double> tape;
        Var<double> x = tape.leaf(T::unflatten(theta, r, c));
        return build(tape, x).v()(0, 0);
    };

    Tape<double> tape;
    Var<double> x = tape.leaf(x0);
    Var<double> loss = build(tape, x);
    auto gs = tape.grad_store();
    tape.backward(loss, gs);
    std::vector<double> analytic = T::flatten(gs.grad(x));

    auto res = T::check_gradient(forward, T::flatten(x0), analytic);
    CAPTURE(res.worst_analytic);
    CAPTURE(res.worst_numeric);
    CHECK(res.max_rel_err < tol);
}

// weights the output entries so reductions do not hide sign errors
Var<double> weighted_sum(Tape<double>& tape, Var<double> y, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Var<double> w = tape.constant(T::random_mat(rng, static_cast<int>(y.rows()), static_cast<int>(y.cols())));
    return uvd::sum_all(uvd::cmul(y, w));
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::sigmoid(x), 1); }, 4, 5, 11);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::tanh_op(x), 2); }, 4, 5, 12);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::elu(x), 3); }, 4, 5, 13);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::exp_op(x), 4); }, 3, 3, 14, 1e-7, 0.5);
    check_op(
        [](Tape<double>& t, Var<double> x) {
            return weighted_sum(t, uvd::log_op(uvd::add_scalar(uvd::cmul(x, x), 0.5)), 5);
        },
        3, 3, 15);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::clamp(x, -0.5, 0.5), 6); }, 4, 4, 16);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::scale(x, -2.5), 7); }, 2, 6, 17);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::add_scalar(x, 3.0), 8); }, 2, 2, 18);
}

TEST_CASE("binary op gradients match finite differences") {
    std::mt19937_64 rng(77);
    Mat<double> other = T::random_mat(rng, 4, 5);
    check_op(
        [&](Tape<double>& t, Var<double> x) {
            Var<double> o = t.leaf(other);
            return weighted_sum(t, uvd::add(x, o), 1);
        },
        4, 5, 21);
    check_op(
        [&](Tape<double>& t, Var<double> x) {
            Var<double> o = t.leaf(other);
            return weighted_sum(t, uvd::sub(x, o), 2);
        },
        4, 5, 22);
    check_op(
        [&](Tape<double>& t, Var<double> x) {
            Var<double> o = t.leaf(other);
            return weighted_sum(t, uvd::cmul(x, o), 3);
        },
        4, 5, 23);
}

TEST_CASE("matmul gradient w.r.t. both operands") {
    std::mt19937_64 rng(99);
    Mat<double> b0 = T::random_mat(rng, 5, 3);
    // grad w.r.t. left operand
    check_op(
        [&](Tape<double>& t, Var<double> x) {
            Var<double> b = t.constant(b0);
            return weighted_sum(t, uvd::matmul(x, b), 1);
        },
        4, 5, 31);
    // grad w.r.t. right operand
    Mat<double> a0 = T::random_mat(rng, 4, 5);
    check_op(
        [&](Tape<double>& t, Var<double> x) {
            Var<double> a = t.constant(a0);
            return weighted_sum(t, uvd::matmul(a, x), 2);
        },
        5, 3, 32);
}

TEST_CASE("structural op gradients") {
    check_op(
        [](Tape<double>& t, Var<double> x) {
            auto top = uvd::slice_rows(x, 0, 2);
            auto bot = uvd::slice_rows(x, 2, 3);
            return weighted_sum(t, uvd::vstack<double>({bot, top, bot}), 1);
        },
        5, 4, 41);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::add_colvec(x, uvd::slice_rows(x, 0, 4)), 2); },
             4, 1, 42);
    // remap with repeated indices (replication) accumulates
    check_op(
        [](Tape<double>& t, Var<double> x) {
            auto idx = std::make_shared<std::vector<int>>(std::vector<int>{0, 1, 2, 3, 0, 1, 2, 3, 5, 4});
            return weighted_sum(t, uvd::remap(x, idx, 2, 5), 3);
        },
        2, 3, 43);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::broadcast_spatial(x, 6), 4); }, 3, 2, 44);
}

TEST_CASE("reduction and distribution gradients") {
    check_op([](Tape<double>& t, Var<double> x) { return uvd::sum_all(x); }, 3, 7, 51);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::sum_rows(x), 1); }, 4, 3, 52);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::block_colsum(x, 3), 2); }, 2, 9, 53);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::colwise_softmax(x), 3); }, 5, 4, 54);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::colwise_log_softmax(x), 4); }, 5, 4, 55);
    check_op([](Tape<double>& t, Var<double> x) { return weighted_sum(t, uvd::colwise_logsumexp(x), 5); }, 5, 4, 56);
}

TEST_CASE("conv2d gradients: weights, bias, input, strides and padding") {
    std::mt19937_64 rng(123);
    for (int stride : {1, 2}) {
        uvd::ConvSpec spec;
        spec.cin = 3;
        spec.h = 5;
        spec.w = 4;
        spec.n = 2;
        spec.cout = 2;
        spec.k = 3;
        spec.stride = stride;
        spec.pad = 1;

        Mat<double> x0 = T::random_mat(rng, spec.cin, spec.n * spec.h * spec.w);
        Mat<double> w0 = T::random_mat(rng, spec.cout, spec.cin * spec.k * spec.k, 0.5);
        Mat<double> b0 = T::random_mat(rng, spec.cout, 1);

        // pack (x, w, b) into one flat vector for the checker
        auto sizes = std::vector<Eigen::Index>{x0.size(), w0.size(), b0.size()};
        std::vector<double> theta;
        for (const Mat<double>* m : {&x0, &w0, &b0}) {
            auto f = T::flatten(*m);
            theta.insert(theta.end(), f.begin(), f.end());
        }
        auto unpack = [&](const std::vector<double>& th) {
            std::vector<Mat<double>> out;
            size_t off = 0;
            out.push_back(T::unflatten({th.begin() + off, th.begin() + off + sizes[0]}, static_cast<int>(x0.rows()),
                                       static_cast<int>(x0.cols())));
            off += sizes[0];
            out.push_back(T::unflatten({th.begin() + off, th.begin() + off + sizes[1]}, static_cast<int>(w0.rows()),
                                       static_cast<int>(w0.cols())));
            off += sizes[1];
            out.push_back(T::unflatten({th.begin() + off, th.begin() + off + sizes[2]}, static_cast<int>(b0.rows()),
                                       static_cast<int>(b0.cols())));
            return out;
        };

        auto forward = [&](const std::vector<double>& th) {
            auto mats = unpack(th);
            Tape<double> tape;
            auto x = tape.leaf(mats[0]);
            auto w = tape.leaf(mats[1]);
            auto b = tape.leaf(mats[2]);
            auto y = uvd::conv2d(x, w, b, spec);
            std::mt19937_64 wr(5);
            auto wm = tape.constant(T::random_mat(wr, static_cast<int>(y.rows()), static_cast<int>(y.cols())));
            return uvd::sum_all(uvd::cmul(y, wm)).v()(0, 0);
        };

        Tape<double> tape;
        auto x = tape.leaf(x0);
        auto w = tape.leaf(w0);
        auto b = tape.leaf(b0);
        auto y = uvd::conv2d(x, w, b, spec);
        std::mt19937_64 wr(5);
        auto wm = tape.constant(T::random_mat(wr, static_cast<int>(y.rows()), static_cast<int>(y.cols())));
        auto loss = uvd::sum_all(uvd::cmul(y, wm));
        auto gs = tape.grad_store();
        tape.backward(loss, gs);

        std::vector<double> analytic;
        for (Var<double> v : {x, w, b}) {
            auto f = T::flatten(gs.grad(v));
            analytic.insert(analytic.end(), f.begin(), f.end());
        }

        auto res = T::check_gradient(forward, theta, analytic);
        CAPTURE(stride);
        CHECK(res.max_rel_err < 1e-7);
    }
}

TEST_CASE("partial backward with a floor only touches the recent subgraph") {
    Tape<double> tape;
    auto a = tape.leaf(Mat<double>::Constant(2, 2, 1.5));
    auto b = uvd::scale(a, 2.0);
    int floor = tape.size();
    auto c = tape.leaf(Mat<double>::Constant(2, 2, 3.0));
    auto d = uvd::cmul(b, c);
    auto loss = uvd::sum_all(d);

    auto gs = tape.grad_store(floor);
    tape.backward(loss, gs);
    // c is above the floor: full gradient available
    CHECK(gs.grad(c)(0, 0) == doctest::Approx(3.0));
    // b is below the floor: accumulation was discarded, grad reads as zero
    CHECK(gs.grad(b)(0, 0) == 0.0);
}

TEST_CASE("backward ignores branches without gradient demand") {
    Tape<double> tape;
    auto p = tape.param(Mat<double>::Constant(1, 1, 2.0));
    auto k = tape.constant(Mat<double>::Constant(1, 1, 5.0));
    auto y = uvd::cmul(p, k);
    auto z = uvd::cmul(k, k);  // constant-only branch
    auto loss = uvd::sum_all(uvd::add(y, z));
    auto gs = tape.grad_store();
    tape.backward(loss, gs);
    CHECK(gs.grad(p)(0, 0) == doctest::Approx(5.0));
    CHECK(gs.grad(k).cwiseAbs().maxCoeff() == 0.0);  // constants never accumulate
}

TEST_CASE("repeated backward calls use independent stores") {
    Tape<double> tape;
    auto p = tape.param(Mat<double>::Constant(1, 1, 3.0));
    auto y = uvd::cmul(p, p);
    auto loss = uvd::sum_all(y);
    auto gs1 = tape.grad_store();
    tape.backward(loss, gs1);
    auto gs2 = tape.grad_store();
    tape.backward(loss, gs2);
    CHECK(gs1.grad(p)(0, 0) == doctest::Approx(6.0));
    CHECK(gs2.grad(p)(0, 0) == doctest::Approx(6.0));
}
