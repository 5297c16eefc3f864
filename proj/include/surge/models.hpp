#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "surge/autograd.hpp"
#include "surge/errors.hpp"
#include "surge/rng.hpp"

namespace surge {

struct ModelConfig {
    std::string arch = "unet";  // "unet" or "cnn"
    int depth = 5;              // unet stages / cnn conv blocks
    int base_width = 64;
    int in_channels = 41;
    int out_channels = 1;

    std::string canonical() const {
        return arch + ";d=" + std::to_string(depth) + ";w=" + std::to_string(base_width) +
               ";in=" + std::to_string(in_channels) + ";out=" + std::to_string(out_channels);
    }
};

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct NamedParam {
    std::string name;
    Tensor4<float> value;
};

struct ModelParameters {
    ModelConfig config;
    std::vector<NamedParam> params;

    uint64_t fingerprint() const { return fnv1a(config.canonical()); }

    const Tensor4<float>& get(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return p.value;
        throw ShapeError("missing parameter: " + name);
    }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }
};

namespace detail {

// Kaiming-uniform fan-in init (gain sqrt(2) for the ReLU chain), zero bias.
inline Tensor4<float> kaiming_conv(int co, int ci, int kh, int kw, Rng& rng) {
    Tensor4<float> w(co, ci, kh, kw);
    double bound = std::sqrt(6.0 / (static_cast<double>(ci) * kh * kw));
    for (auto& x : w.v) x = static_cast<float>(rng.uniform(-bound, bound));
    return w;
}

inline void add_conv(std::vector<NamedParam>& out, const std::string& name, int co, int ci, int k,
                     Rng& rng) {
    out.push_back({name + "_w", kaiming_conv(co, ci, k, k, rng)});
    out.push_back({name + "_b", Tensor4<float>(1, co, 1, 1)});
}

// Transposed conv weights are stored [c_in, c_out, 2, 2].
inline void add_upconv(std::vector<NamedParam>& out, const std::string& name, int ci, int co,
                       Rng& rng) {
    Tensor4<float> w(ci, co, 2, 2);
    double bound = std::sqrt(6.0 / (static_cast<double>(ci) * 4));
    for (auto& x : w.v) x = static_cast<float>(rng.uniform(-bound, bound));
    out.push_back({name + "_w", std::move(w)});
    out.push_back({name + "_b", Tensor4<float>(1, co, 1, 1)});
}

}  // namespace detail

// Encoder stage i at width C0*2^i (two 3x3 convs + pool), a double-conv
// bottleneck at width C0*2^d, a mirrored decoder with 2x2 up-convolutions
// and skip concats, and a final 1x1 projection.
inline ModelParameters build_unet(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.depth < 1 || cfg.base_width < 1 || cfg.in_channels < 1 || cfg.out_channels < 1)
        throw ConfigError("build_unet: invalid config");
    Rng rng(seed ^ fnv1a(cfg.canonical()));
    ModelParameters mp;
    mp.config = cfg;
    int prev = cfg.in_channels;
    for (int i = 0; i < cfg.depth; ++i) {
        int width = cfg.base_width << i;
        detail::add_conv(mp.params, "enc" + std::to_string(i) + "_c1", width, prev, 3, rng);
        detail::add_conv(mp.params, "enc" + std::to_string(i) + "_c2", width, width, 3, rng);
        prev = width;
    }
    int bott = cfg.base_width << cfg.depth;
    detail::add_conv(mp.params, "bott_c1", bott, prev, 3, rng);
    detail::add_conv(mp.params, "bott_c2", bott, bott, 3, rng);
    for (int i = cfg.depth - 1; i >= 0; --i) {
        int width = cfg.base_width << i;
        detail::add_upconv(mp.params, "dec" + std::to_string(i) + "_up", width * 2, width, rng);
        detail::add_conv(mp.params, "dec" + std::to_string(i) + "_c1", width, width * 2, 3, rng);
        detail::add_conv(mp.params, "dec" + std::to_string(i) + "_c2", width, width, 3, rng);
    }
    detail::add_conv(mp.params, "head", cfg.out_channels, cfg.base_width, 1, rng);
    return mp;
}

// L same-padding 3x3 conv+ReLU blocks at constant width, then a 1x1 head.
// depth == 0 degenerates to a linear per-pixel map.
inline ModelParameters build_cnn_baseline(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.depth < 0 || cfg.in_channels < 1 || cfg.out_channels < 1 ||
        (cfg.depth > 0 && cfg.base_width < 1))
        throw ConfigError("build_cnn_baseline: invalid config");
    Rng rng(seed ^ fnv1a(cfg.canonical()));
    ModelParameters mp;
    mp.config = cfg;
    int prev = cfg.in_channels;
    for (int i = 0; i < cfg.depth; ++i) {
        detail::add_conv(mp.params, "blk" + std::to_string(i), cfg.base_width, prev, 3, rng);
        prev = cfg.base_width;
    }
    detail::add_conv(mp.params, "head", cfg.out_channels, prev, 1, rng);
    return mp;
}

inline ModelParameters build_model(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.arch == "unet") return build_unet(cfg, seed);
    if (cfg.arch == "cnn") return build_cnn_baseline(cfg, seed);
    throw ConfigError("unknown architecture: " + cfg.arch);
}

// Builds the forward graph and returns the output node. Parameter leaves are
// appended in declaration order; their node ids come back in `param_ids` so
// the trainer can fetch gradients by name.
template <class T>
typename Graph<T>::Id model_forward(Graph<T>& g, const ModelParameters& mp,
                                    typename Graph<T>::Id x, bool train_params,
                                    std::map<std::string, typename Graph<T>::Id>* param_ids = nullptr) {
    using Id = typename Graph<T>::Id;
    std::map<std::string, Id> ids;
    for (const auto& p : mp.params)
        ids[p.name] = g.leaf(tensor_cast<T>(p.value), train_params);
    if (param_ids) *param_ids = ids;

    const ModelConfig& cfg = mp.config;
    auto conv_relu = [&](Id in, const std::string& name) {
        return g.relu(g.conv2d(in, ids.at(name + "_w"), ids.at(name + "_b")));
    };

    if (cfg.arch == "cnn") {
        Id cur = x;
        for (int i = 0; i < cfg.depth; ++i) cur = conv_relu(cur, "blk" + std::to_string(i));
        return g.conv2d(cur, ids.at("head_w"), ids.at("head_b"));
    }

    const auto& xv = g.val(x);
    if (xv.c != cfg.in_channels) throw ShapeError("model_forward: input channel mismatch");
    int mult = 1 << cfg.depth;
    if (xv.h % mult != 0 || xv.w % mult != 0)
        throw ShapeError("model_forward: spatial dims must be multiples of " +
                         std::to_string(mult));

    std::vector<Id> skips;
    Id cur = x;
    for (int i = 0; i < cfg.depth; ++i) {
        cur = conv_relu(cur, "enc" + std::to_string(i) + "_c1");
        cur = conv_relu(cur, "enc" + std::to_string(i) + "_c2");
        skips.push_back(cur);
        cur = g.maxpool2d(cur);
    }
    cur = conv_relu(cur, "bott_c1");
    cur = conv_relu(cur, "bott_c2");
    for (int i = cfg.depth - 1; i >= 0; --i) {
        std::string nm = "dec" + std::to_string(i);
        cur = g.conv_transpose2d(cur, ids.at(nm + "_up_w"), ids.at(nm + "_up_b"));
        cur = g.concat_channels(skips[i], cur);
        cur = conv_relu(cur, nm + "_c1");
        cur = conv_relu(cur, nm + "_c2");
    }
    return g.conv2d(cur, ids.at("head_w"), ids.at("head_b"));
}

// Inference-only forward pass.
inline Tensor4<float> predict(const ModelParameters& mp, const Tensor4<float>& x) {
    Graph<float> g;
    auto xi = g.leaf(x, false);
    auto out = model_forward(g, mp, xi, false);
    return g.val(out);
}

}  // namespace surge
