#include <uvd/data.hpp>

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace uvd {

double Trajectory::kinetic_energy(int t) const {
    double ke = 0.0;
    for (size_t i = 0; i < masses.size(); ++i) ke += 0.5 * masses[i] * velocities[t][i].squaredNorm();
    return ke;
}

Eigen::Vector2d Trajectory::momentum(int t) const {
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    for (size_t i = 0; i < masses.size(); ++i) p += masses[i] * velocities[t][i];
    return p;
}

namespace {

struct SimState {
    std::vector<Eigen::Vector2d> pos;
    std::vector<Eigen::Vector2d> vel;
};

void reflect_walls(const BallPhysicsConfig& cfg, const std::vector<double>& radii, SimState& s, int frame,
                   std::vector<CollisionEvent>& events) {
    for (size_t i = 0; i < s.pos.size(); ++i) {
        const double r = radii[i];
        const double hix = cfg.width - r;
        const double hiy = cfg.height - r;
        for (int iter = 0; iter < 8; ++iter) {
            bool moved = false;
            auto bounce = [&](double& p, double& v, double lo, double hi) {
                if (p < lo) {
                    p = lo + (lo - p);
                    if (v < 0) {
                        CollisionEvent e;
                        e.kind = CollisionEvent::Kind::Wall;
                        e.frame = frame;
                        e.a = static_cast<int>(i);
                        e.va_pre = s.vel[i];
                        v = -v;
                        e.va_post = s.vel[i];
                        events.push_back(e);
                    }
                    moved = true;
                } else if (p > hi) {
                    p = hi - (p - hi);
                    if (v > 0) {
                        CollisionEvent e;
                        e.kind = CollisionEvent::Kind::Wall;
                        e.frame = frame;
                        e.a = static_cast<int>(i);
                        e.va_pre = s.vel[i];
                        v = -v;
                        e.va_post = s.vel[i];
                        events.push_back(e);
                    }
                    moved = true;
                }
            };
            bounce(s.pos[i].x(), s.vel[i].x(), r, hix);
            bounce(s.pos[i].y(), s.vel[i].y(), r, hiy);
            if (!moved) break;
        }
        // pathological arenas: clamp as a last resort
        s.pos[i].x() = std::clamp(s.pos[i].x(), r, hix);
        s.pos[i].y() = std::clamp(s.pos[i].y(), r, hiy);
    }
}

void resolve_pairs(const BallPhysicsConfig& cfg, const std::vector<double>& radii, const std::vector<double>& masses,
                   SimState& s, int frame, std::vector<CollisionEvent>& events) {
    const int n = static_cast<int>(s.pos.size());
    for (int pass = 0; pass < 16; ++pass) {
        bool any = false;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                Eigen::Vector2d d = s.pos[j] - s.pos[i];
                const double rsum = radii[i] + radii[j];
                double dist = d.norm();
                if (dist >= rsum) continue;
                any = true;
                Eigen::Vector2d nrm = dist > 1e-12 ? Eigen::Vector2d(d / dist) : Eigen::Vector2d(1.0, 0.0);
                // positional projection, mass-weighted so the center of mass stays put
                const double overlap = rsum - dist;
                const double mi = masses[i], mj = masses[j];
                s.pos[i] -= nrm * (overlap * mj / (mi + mj));
                s.pos[j] += nrm * (overlap * mi / (mi + mj));
                // elastic impulse along the center line, only if approaching
                const double ui = s.vel[i].dot(nrm);
                const double uj = s.vel[j].dot(nrm);
                if (ui - uj > 0) {
                    CollisionEvent e;
                    e.kind = CollisionEvent::Kind::Pair;
                    e.frame = frame;
                    e.a = i;
                    e.b = j;
                    e.va_pre = s.vel[i];
                    e.vb_pre = s.vel[j];
                    const double ui2 = ((mi - mj) * ui + 2.0 * mj * uj) / (mi + mj);
                    const double uj2 = ((mj - mi) * uj + 2.0 * mi * ui) / (mi + mj);
                    s.vel[i] += (ui2 - ui) * nrm;
                    s.vel[j] += (uj2 - uj) * nrm;
                    e.va_post = s.vel[i];
                    e.vb_post = s.vel[j];
                    events.push_back(e);
                }
            }
        }
        if (!any) break;
        reflect_walls(cfg, radii, s, frame, events);
    }
}

}  // namespace

Trajectory simulate(const BallPhysicsConfig& cfg) {
    if (cfg.n_balls < 1 || cfg.frames < 1) throw std::invalid_argument("simulate: need n_balls >= 1, frames >= 1");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Trajectory traj;
    traj.config = cfg;
    traj.radii.resize(cfg.n_balls);
    traj.masses.resize(cfg.n_balls);
    for (int i = 0; i < cfg.n_balls; ++i)
        traj.radii[i] = cfg.radius_min + (cfg.radius_max - cfg.radius_min) * unit(rng);
    for (int i = 0; i < cfg.n_balls; ++i)
        traj.masses[i] = cfg.mass_min + (cfg.mass_max - cfg.mass_min) * unit(rng);

    SimState s;
    s.pos.resize(cfg.n_balls);
    s.vel.resize(cfg.n_balls);

    // rejection sampling of a non-overlapping initial placement
    int attempts = 0;
    for (int i = 0; i < cfg.n_balls;) {
        const double r = traj.radii[i];
        if (cfg.width - 2 * r <= 0 || cfg.height - 2 * r <= 0)
            throw std::runtime_error("simulate: ball radius exceeds the arena; reduce radius or enlarge the frame");
        s.pos[i].x() = r + (cfg.width - 2 * r) * unit(rng);
        s.pos[i].y() = r + (cfg.height - 2 * r) * unit(rng);
        bool ok = true;
        for (int j = 0; j < i; ++j)
            if ((s.pos[i] - s.pos[j]).norm() < traj.radii[i] + traj.radii[j]) ok = false;
        if (ok) {
            ++i;
        } else if (++attempts > 10000) {
            throw std::runtime_error(
                "simulate: could not place balls without overlap after 10000 attempts; "
                "use fewer or smaller balls");
        }
    }
    for (int i = 0; i < cfg.n_balls; ++i) {
        const double angle = 2.0 * M_PI * unit(rng);
        const double mag = cfg.speed * (0.5 + 0.5 * unit(rng));
        s.vel[i] = mag * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    }

    traj.positions.reserve(cfg.frames);
    traj.velocities.reserve(cfg.frames);
    traj.positions.push_back(s.pos);
    traj.velocities.push_back(s.vel);

    const double dt = 1.0 / cfg.substeps;
    for (int t = 1; t < cfg.frames; ++t) {
        for (int sub = 0; sub < cfg.substeps; ++sub) {
            for (int i = 0; i < cfg.n_balls; ++i) s.pos[i] += s.vel[i] * dt;
            reflect_walls(cfg, traj.radii, s, t, traj.events);
            resolve_pairs(cfg, traj.radii, traj.masses, s, t, traj.events);
        }
        traj.positions.push_back(s.pos);
        traj.velocities.push_back(s.vel);
    }
    return traj;
}

std::vector<Rgb> default_palette() {
    return {Rgb{230, 60, 50}, Rgb{70, 160, 240}, Rgb{90, 200, 90}, Rgb{240, 200, 60}};
}

Rgb palette_color(const std::vector<Rgb>& palette, int ball_index) {
    return palette[static_cast<size_t>(ball_index) % palette.size()];
}

VideoSequence render(const Trajectory& traj, RenderMode mode, const std::vector<Rgb>& palette) {
    if (mode == RenderMode::Color && palette.empty())
        throw std::invalid_argument("render: color mode needs a non-empty palette");
    const auto& cfg = traj.config;
    VideoSequence seq;
    seq.T = cfg.frames;
    seq.C = mode == RenderMode::Binary ? 1 : 3;
    seq.H = cfg.height;
    seq.W = cfg.width;
    seq.has_labels = true;
    seq.frames.assign(seq.frame_bytes(), 0);
    seq.labels.assign(seq.label_bytes(), 0);

    for (int t = 0; t < seq.T; ++t) {
        for (int y = 0; y < seq.H; ++y) {
            for (int x = 0; x < seq.W; ++x) {
                const Eigen::Vector2d center(x + 0.5, y + 0.5);
                int front = -1;  // highest index wins
                for (int i = 0; i < cfg.n_balls; ++i)
                    if ((center - traj.positions[t][i]).norm() <= traj.radii[i]) front = i;
                if (front < 0) continue;
                seq.labels[(static_cast<size_t>(t) * seq.H + y) * seq.W + x] = static_cast<uint8_t>(front + 1);
                if (mode == RenderMode::Binary) {
                    seq.frames[(static_cast<size_t>(t) * seq.H + y) * seq.W + x] = 255;
                } else {
                    const Rgb c = palette_color(palette, front);
                    const size_t base = static_cast<size_t>(t) * 3 * seq.H * seq.W;
                    seq.frames[base + (static_cast<size_t>(0) * seq.H + y) * seq.W + x] = c.r;
                    seq.frames[base + (static_cast<size_t>(1) * seq.H + y) * seq.W + x] = c.g;
                    seq.frames[base + (static_cast<size_t>(2) * seq.H + y) * seq.W + x] = c.b;
                }
            }
        }
    }
    return seq;
}

namespace {

void put_u32(std::string& out, uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(b, 4);
}

uint32_t get_u32(const std::string& in, size_t& off) {
    if (off + 4 > in.size()) throw std::runtime_error("dataset: truncated header");
    uint32_t v = (static_cast<uint32_t>(static_cast<uint8_t>(in[off])) |
                  (static_cast<uint32_t>(static_cast<uint8_t>(in[off + 1])) << 8) |
                  (static_cast<uint32_t>(static_cast<uint8_t>(in[off + 2])) << 16) |
                  (static_cast<uint32_t>(static_cast<uint8_t>(in[off + 3])) << 24));
    off += 4;
    return v;
}

uint32_t payload_crc(const VideoSequence& s) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, s.frames.data(), static_cast<uInt>(s.frames.size()));
    if (s.has_labels) crc = crc32(crc, s.labels.data(), static_cast<uInt>(s.labels.size()));
    return static_cast<uint32_t>(crc);
}

}  // namespace

void write_dataset(const std::vector<VideoSequence>& sequences, const std::string& path,
                   const std::string& manifest_json) {
    int T = 0, H = 0, W = 0, C = 0;
    bool has_labels = false;
    if (!sequences.empty()) {
        T = sequences.front().T;
        H = sequences.front().H;
        W = sequences.front().W;
        C = sequences.front().C;
        has_labels = sequences.front().has_labels;
        for (const auto& s : sequences)
            if (s.T != T || s.H != H || s.W != W || s.C != C || s.has_labels != has_labels)
                throw std::invalid_argument("write_dataset: sequences must share (T, H, W, C) and label presence");
    }
    std::string out;
    out.append("UVD1", 4);
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(sequences.size()));
    put_u32(out, static_cast<uint32_t>(T));
    put_u32(out, static_cast<uint32_t>(H));
    put_u32(out, static_cast<uint32_t>(W));
    put_u32(out, static_cast<uint32_t>(C));
    put_u32(out, has_labels ? 1u : 0u);
    for (const auto& s : sequences) {
        out.append(reinterpret_cast<const char*>(s.frames.data()), s.frames.size());
        if (has_labels) out.append(reinterpret_cast<const char*>(s.labels.data()), s.labels.size());
        put_u32(out, payload_crc(s));
    }
    put_u32(out, static_cast<uint32_t>(manifest_json.size()));
    out.append(manifest_json);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_dataset: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_dataset: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string in = ss.str();

    size_t off = 0;
    if (in.size() < 4 || in.compare(0, 4, "UVD1") != 0)
        throw std::runtime_error("read_dataset: bad magic, not a UVD1 container: " + path);
    off = 4;
    const uint32_t version = get_u32(in, off);
    if (version != 1)
        throw std::runtime_error("read_dataset: unsupported container version " + std::to_string(version));
    const uint32_t count = get_u32(in, off);
    const uint32_t T = get_u32(in, off);
    const uint32_t H = get_u32(in, off);
    const uint32_t W = get_u32(in, off);
    const uint32_t C = get_u32(in, off);
    const uint32_t flags = get_u32(in, off);
    const bool has_labels = (flags & 1u) != 0;

    Dataset ds;
    ds.sequences.reserve(count);
    const size_t fbytes = static_cast<size_t>(T) * C * H * W;
    const size_t lbytes = has_labels ? static_cast<size_t>(T) * H * W : 0;
    for (uint32_t i = 0; i < count; ++i) {
        if (off + fbytes + lbytes + 4 > in.size())
            throw std::runtime_error("read_dataset: truncated at sequence " + std::to_string(i));
        VideoSequence s;
        s.T = static_cast<int>(T);
        s.C = static_cast<int>(C);
        s.H = static_cast<int>(H);
        s.W = static_cast<int>(W);
        s.has_labels = has_labels;
        s.frames.assign(in.begin() + static_cast<long>(off), in.begin() + static_cast<long>(off + fbytes));
        off += fbytes;
        if (has_labels) {
            s.labels.assign(in.begin() + static_cast<long>(off), in.begin() + static_cast<long>(off + lbytes));
            off += lbytes;
        }
        const uint32_t stored = get_u32(in, off);
        if (stored != payload_crc(s))
            throw std::runtime_error("read_dataset: checksum mismatch in sequence " + std::to_string(i));
        ds.sequences.push_back(std::move(s));
    }
    const uint32_t mlen = get_u32(in, off);
    if (off + mlen > in.size()) throw std::runtime_error("read_dataset: truncated manifest");
    ds.manifest_json = in.substr(off, mlen);
    return ds;
}

}  // namespace uvd
