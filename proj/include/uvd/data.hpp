#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

// Synthetic bouncing-ball video generation (exact elastic physics plus a
// rasterizer with ground-truth instance labels) and the on-disk dataset
// container shared by the training and evaluation tooling.

namespace uvd {

struct BallPhysicsConfig {
    int n_balls = 4;
    int frames = 50;
    int height = 64;
    int width = 64;
    double radius_min = 5.0;
    double radius_max = 7.0;
    double mass_min = 1.0;
    double mass_max = 3.0;
    double speed = 2.0;  // pixels per frame
    int substeps = 4;
    uint64_t seed = 0;
};

struct CollisionEvent {
    enum class Kind { Wall, Pair };
    Kind kind = Kind::Wall;
    int frame = 0;
    int a = -1;
    int b = -1;  // -1 for wall events
    Eigen::Vector2d va_pre = Eigen::Vector2d::Zero();
    Eigen::Vector2d vb_pre = Eigen::Vector2d::Zero();
    Eigen::Vector2d va_post = Eigen::Vector2d::Zero();
    Eigen::Vector2d vb_post = Eigen::Vector2d::Zero();
};

struct Trajectory {
    BallPhysicsConfig config;
    std::vector<double> radii;
    std::vector<double> masses;
    // positions[t][i] is the state rendered at frame t
    std::vector<std::vector<Eigen::Vector2d>> positions;
    std::vector<std::vector<Eigen::Vector2d>> velocities;
    std::vector<CollisionEvent> events;

    double kinetic_energy(int t) const;
    Eigen::Vector2d momentum(int t) const;
};

// Discrete-time integration with elastic wall reflections and exact two-body
// elastic collision resolution (1D impulse along the center line, after
// positional projection of any penetration). Throws std::runtime_error when
// the initial non-overlapping placement cannot be sampled.
Trajectory simulate(const BallPhysicsConfig& cfg);

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
};

enum class RenderMode { Binary, Color };

struct VideoSequence {
    int T = 0, C = 1, H = 0, W = 0;
    std::vector<uint8_t> frames;  // [t][c][y][x], row-major
    bool has_labels = false;
    std::vector<uint8_t> labels;  // [t][y][x]; 0 = background

    uint8_t pixel(int t, int c, int y, int x) const {
        return frames[((static_cast<size_t>(t) * C + c) * H + y) * W + x];
    }
    uint8_t label(int t, int y, int x) const {
        return labels[(static_cast<size_t>(t) * H + y) * W + x];
    }
    size_t frame_bytes() const { return static_cast<size_t>(T) * C * H * W; }
    size_t label_bytes() const { return has_labels ? static_cast<size_t>(T) * H * W : 0; }
};

// Anti-aliasing-free disc rasterization: a pixel belongs to ball i exactly
// when its center lies inside the disc; higher ball index occludes. Labels
// are ball index + 1 with 0 for background. Color mode reuses palette entries
// cyclically when there are more balls than colors.
VideoSequence render(const Trajectory& traj, RenderMode mode, const std::vector<Rgb>& palette);

struct Dataset {
    std::vector<VideoSequence> sequences;
    std::string manifest_json;
};

// Container format: magic "UVD1"; little-endian u32 fields version=1, count,
// T, H, W, C, flags (bit0 = has_labels); per sequence the raw u8 frames,
// u8 labels when flagged, and a CRC32 of that payload; then a u32-length
// prefixed UTF-8 JSON manifest.
void write_dataset(const std::vector<VideoSequence>& sequences, const std::string& path,
                   const std::string& manifest_json = "{}");
Dataset read_dataset(const std::string& path);

std::vector<Rgb> default_palette();
Rgb palette_color(const std::vector<Rgb>& palette, int ball_index);

}  // namespace uvd
