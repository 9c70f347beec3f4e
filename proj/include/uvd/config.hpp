#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace uvd {

struct CurriculumStage {
    int sequence_length = 4;
    int batch_size = 0;  // 0 = max(1, floor(32*4/T))
    int max_steps = 1000;
};

// All scalars of the method. Flat JSON on disk; every key can be overridden
// by an UVD_<UPPERCASE KEY> environment variable.
struct ModelConfig {
    int k = 5;           // slots
    int m = 64;          // latent dimensionality per slot
    int r = 6;           // refinement budget
    int h_hid = 128;     // hidden/cell width of both grid axes
    double sigma = 0.3;  // fixed likelihood scale
    double beta = 100.0;
    double psi = 10.0;
    double gamma = 0.1;
    int channels = 1;

    int dec_width = 32;
    int dec_mlp_width = 128;
    std::array<int, 3> enc_widths{16, 32, 64};

    std::vector<CurriculumStage> curriculum{{4, 0, 4000}, {8, 0, 4000}, {16, 0, 4000}};
    double learning_rate = 0.0003;
    double grad_clip = 5.0;
    uint64_t seed = 0;
    std::string precision = "float32";
    int checkpoint_every = 1000;
    bool first_frame_full_r = false;  // non-default: frame 1 gets R refinements

    // frame geometry; filled from the dataset when zero
    int height = 0;
    int width = 0;

    int lambda_dim() const { return 2 * m; }

    void validate() const {
        if (k < 2) throw std::invalid_argument("config: k must be >= 2");
        if (r < 1) throw std::invalid_argument("config: r must be >= 1");
        if (m < 1) throw std::invalid_argument("config: m must be >= 1");
        if (sigma <= 0) throw std::invalid_argument("config: sigma must be positive");
        if (learning_rate <= 0) throw std::invalid_argument("config: learning_rate must be positive");
        if (channels != 1 && channels != 3) throw std::invalid_argument("config: channels must be 1 or 3");
        if (precision != "float32" && precision != "float64")
            throw std::invalid_argument("config: precision must be float32 or float64");
        for (size_t i = 1; i < curriculum.size(); ++i)
            if (curriculum[i].sequence_length <= curriculum[i - 1].sequence_length)
                throw std::invalid_argument("config: curriculum lengths must be strictly increasing");
    }
};

inline int default_batch_size(int sequence_length) {
    return std::max(1, (32 * 4) / std::max(1, sequence_length));
}

namespace detail {
inline void patch_from_env(nlohmann::json& j, const std::string& key) {
    const std::string var = "UVD_" + [&] {
        std::string u = key;
        for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return u;
    }();
    const char* val = std::getenv(var.c_str());
    if (!val) return;
    // numbers/bools/arrays parse as JSON; fall back to a raw string
    auto parsed = nlohmann::json::parse(val, nullptr, false);
    if (parsed.is_discarded())
        j[key] = std::string(val);
    else
        j[key] = parsed;
}
}  // namespace detail

inline nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["k"] = c.k;
    j["m"] = c.m;
    j["r"] = c.r;
    j["h_hid"] = c.h_hid;
    j["sigma"] = c.sigma;
    j["beta"] = c.beta;
    j["psi"] = c.psi;
    j["gamma"] = c.gamma;
    j["channels"] = c.channels;
    j["dec_width"] = c.dec_width;
    j["dec_mlp_width"] = c.dec_mlp_width;
    j["enc_widths"] = c.enc_widths;
    nlohmann::json cur = nlohmann::json::array();
    for (const auto& s : c.curriculum)
        cur.push_back({{"length", s.sequence_length}, {"batch", s.batch_size}, {"steps", s.max_steps}});
    j["curriculum"] = cur;
    j["learning_rate"] = c.learning_rate;
    j["grad_clip"] = c.grad_clip;
    j["seed"] = c.seed;
    j["precision"] = c.precision;
    j["checkpoint_every"] = c.checkpoint_every;
    j["first_frame_full_r"] = c.first_frame_full_r;
    j["height"] = c.height;
    j["width"] = c.width;
    return j;
}

inline ModelConfig config_from_json(nlohmann::json j, bool apply_env = true) {
    if (apply_env) {
        for (const char* key :
             {"k", "m", "r", "h_hid", "sigma", "beta", "psi", "gamma", "channels", "dec_width", "dec_mlp_width",
              "enc_widths", "curriculum", "learning_rate", "grad_clip", "seed", "precision", "checkpoint_every",
              "first_frame_full_r", "height", "width"})
            detail::patch_from_env(j, key);
    }
    ModelConfig c;
    c.k = j.value("k", c.k);
    c.m = j.value("m", c.m);
    c.r = j.value("r", c.r);
    c.h_hid = j.value("h_hid", c.h_hid);
    c.sigma = j.value("sigma", c.sigma);
    c.beta = j.value("beta", c.beta);
    c.psi = j.value("psi", c.psi);
    c.gamma = j.value("gamma", c.gamma);
    c.channels = j.value("channels", c.channels);
    c.dec_width = j.value("dec_width", c.dec_width);
    c.dec_mlp_width = j.value("dec_mlp_width", c.dec_mlp_width);
    if (j.contains("enc_widths")) {
        auto a = j["enc_widths"];
        if (!a.is_array() || a.size() != 3) throw std::invalid_argument("config: enc_widths must have 3 entries");
        for (int i = 0; i < 3; ++i) c.enc_widths[static_cast<size_t>(i)] = a[static_cast<size_t>(i)].get<int>();
    }
    if (j.contains("curriculum")) {
        c.curriculum.clear();
        for (const auto& s : j["curriculum"]) {
            CurriculumStage st;
            st.sequence_length = s.value("length", 4);
            st.batch_size = s.value("batch", 0);
            st.max_steps = s.value("steps", 1000);
            c.curriculum.push_back(st);
        }
    }
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.seed = j.value("seed", c.seed);
    c.precision = j.value("precision", c.precision);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.first_frame_full_r = j.value("first_frame_full_r", c.first_frame_full_r);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.validate();
    return c;
}

inline ModelConfig load_config(const std::string& path, bool apply_env = true) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    return config_from_json(std::move(j), apply_env);
}

}  // namespace uvd
