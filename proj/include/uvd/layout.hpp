#pragma once

#include <uvd/tape.hpp>

#include <memory>
#include <vector>

// Column layout conventions shared by the decoder and the refinement engine.
//
//   slot columns:  width-N matrices, one column per (element, slot),
//                  column n = e*K + k
//   image columns: channels x (N*H*W), image n = e*K + k, pixel-major inside
//   pixel columns: channels x (B*D), per-element pixel blocks (data frames)
//   slot rows:     K x (B*D), row k holds slot k's per-pixel values
//
// The remap/gather index builders below convert between these layouts.

namespace uvd {

struct GridShapes {
    int K = 0;   // slots
    int B = 0;   // batch elements
    int C = 1;   // frame channels
    int H = 0, W = 0;
    int M = 0;   // latent dim
    int Hh = 0;  // hidden width
    int margin = 4;  // broadcast-decoder border on each side

    int D() const { return H * W; }
    int N() const { return K * B; }
    int Hp() const { return H + 2 * margin; }
    int Wp() const { return W + 2 * margin; }
    int Dp() const { return Hp() * Wp(); }
};

namespace layout {

using IndexMap = std::shared_ptr<const std::vector<int>>;

// flat column-major index into a rows x cols matrix
inline int flat(int rows, int row, int col) { return col * rows + row; }

// center-crop every image of a (rows x N*Dp) batch to rows x (N*D)
inline IndexMap crop_map(const GridShapes& s, int rows) {
    auto idx = std::make_shared<std::vector<int>>();
    idx->resize(static_cast<size_t>(rows) * s.N() * s.D());
    size_t t = 0;
    for (int n = 0; n < s.N(); ++n)
        for (int y = 0; y < s.H; ++y)
            for (int x = 0; x < s.W; ++x) {
                const int src_col = n * s.Dp() + (y + s.margin) * s.Wp() + (x + s.margin);
                for (int r = 0; r < rows; ++r) (*idx)[t++] = flat(rows, r, src_col);
            }
    // column-major output ordering: we filled row-inner, which matches
    return idx;
}

// 1 x (N*D) image row -> K x (B*D) slot rows
inline IndexMap rows_from_images(const GridShapes& s) {
    auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(s.K) * s.B * s.D());
    size_t t = 0;
    for (int e = 0; e < s.B; ++e)
        for (int i = 0; i < s.D(); ++i)
            for (int k = 0; k < s.K; ++k) (*idx)[t++] = flat(1, 0, (e * s.K + k) * s.D() + i);
    return idx;
}

// K x (B*D) slot rows -> 1 x (N*D) image row
inline IndexMap images_from_rows(const GridShapes& s) {
    auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(s.K) * s.B * s.D());
    size_t t = 0;
    for (int e = 0; e < s.B; ++e)
        for (int k = 0; k < s.K; ++k)
            for (int i = 0; i < s.D(); ++i) (*idx)[t++] = flat(s.K, k, e * s.D() + i);
    return idx;
}

// rows x (B*D) per-element data -> rows x (N*D) replicated across slots
inline IndexMap replicate_per_slot(const GridShapes& s, int rows) {
    auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(rows) * s.N() * s.D());
    size_t t = 0;
    for (int e = 0; e < s.B; ++e)
        for (int k = 0; k < s.K; ++k)
            for (int i = 0; i < s.D(); ++i)
                for (int r = 0; r < rows; ++r) (*idx)[t++] = flat(rows, r, e * s.D() + i);
    (void)t;
    return idx;
}

// rows x (N*D) image batch -> per-slot extraction: rows x (B*D) for slot k
inline IndexMap slot_block(const GridShapes& s, int rows, int k) {
    auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(rows) * s.B * s.D());
    size_t t = 0;
    for (int e = 0; e < s.B; ++e)
        for (int i = 0; i < s.D(); ++i)
            for (int r = 0; r < rows; ++r) (*idx)[t++] = flat(rows, r, (e * s.K + k) * s.D() + i);
    return idx;
}

// channels x (N*De) encoder output -> (channels*De) x N flattened per image
inline IndexMap flatten_images(int channels, int de, int n) {
    auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(channels) * de * n);
    size_t t = 0;
    for (int img = 0; img < n; ++img)
        for (int p = 0; p < de; ++p)
            for (int c = 0; c < channels; ++c) (*idx)[t++] = flat(channels, c, img * de + p);
    return idx;
}

// 1 x cols row vector -> rows x cols (each row a copy)
inline IndexMap rep_rows_map(int rows, int cols) {
    auto idx = std::make_shared<std::vector<int>>(static_cast<size_t>(rows) * cols);
    size_t t = 0;
    for (int j = 0; j < cols; ++j)
        for (int r = 0; r < rows; ++r) (*idx)[t++] = j;
    return idx;
}

// two coordinate channels, linear in [-1, 1], replicated across n images
template <class S>
Mat<S> coord_channels(int h, int w, int n) {
    Mat<S> out(2, static_cast<Eigen::Index>(n) * h * w);
    for (int img = 0; img < n; ++img)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const Eigen::Index col = static_cast<Eigen::Index>(img) * h * w + y * w + x;
                out(0, col) = h > 1 ? static_cast<S>(2.0 * y / (h - 1) - 1.0) : S(0);
                out(1, col) = w > 1 ? static_cast<S>(2.0 * x / (w - 1) - 1.0) : S(0);
            }
    return out;
}

}  // namespace layout
}  // namespace uvd
