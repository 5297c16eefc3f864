#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surge/autograd.hpp"
#include "surge/errors.hpp"
#include "surge/models.hpp"
#include "surge/rng.hpp"
#include "surge/tracks.hpp"

namespace surge {

struct SplitFractions {
    double train = 0.8, val = 0.1, test = 0.1;
};

struct Split {
    std::vector<std::string> train, val, test;
};

// Seeded shuffle then contiguous slicing, always at storm granularity.
inline Split split_dataset(std::vector<std::string> storm_ids, uint64_t seed,
                           const SplitFractions& f = {}) {
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::fabs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw ConfigError("split_dataset: fractions must be non-negative and sum to 1");
    Rng rng(seed ^ 0x73706c6974ULL);
    rng.shuffle(storm_ids);
    size_t n = storm_ids.size();
    size_t n_train = static_cast<size_t>(std::floor(f.train * n));
    size_t n_val = static_cast<size_t>(std::floor(f.val * n));
    Split s;
    s.train.assign(storm_ids.begin(), storm_ids.begin() + n_train);
    s.val.assign(storm_ids.begin() + n_train, storm_ids.begin() + n_train + n_val);
    s.test.assign(storm_ids.begin() + n_train + n_val, storm_ids.end());
    return s;
}

inline double cosine_lr(int64_t t, int64_t total, double lr_max, double lr_min = 0) {
    if (total <= 0 || t >= total) return lr_min;
    if (t < 0) t = 0;
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * static_cast<double>(t) / total));
}

using GradMap = std::map<std::string, Tensor4<float>>;

// Global-norm clipping across every parameter gradient. Returns the
// pre-clip norm.
inline double clip_grad_norm(GradMap& grads, double max_norm = 1.0) {
    double sq = 0;
    for (const auto& [name, g] : grads)
        for (float x : g.v) sq += static_cast<double>(x) * x;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
        float scale = static_cast<float>(max_norm / norm);
        for (auto& [name, g] : grads)
            for (float& x : g.v) x *= scale;
    }
    return norm;
}

struct AdamWOptions {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 1e-5;
};

struct OptimizerState {
    std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> moments;
    int64_t t = 0;
};

// Decoupled AdamW: theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
inline void adamw_step(ModelParameters& params, const GradMap& grads, OptimizerState& state,
                       double lr, const AdamWOptions& opt = {}) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
    for (auto& p : params.params) {
        auto git = grads.find(p.name);
        if (git == grads.end()) continue;
        const auto& g = git->second;
        if (!g.same_shape(p.value)) throw ShapeError("adamw_step: gradient shape mismatch for " + p.name);
        auto& [m, v] = state.moments[p.name];
        if (m.empty()) {
            m.assign(p.value.size(), 0.f);
            v.assign(p.value.size(), 0.f);
        }
        for (size_t i = 0; i < p.value.size(); ++i) {
            double gi = g.v[i];
            double mi = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
            double vi = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            double m_hat = mi / bc1;
            double v_hat = vi / bc2;
            double theta = p.value.v[i];
            theta -= lr * (m_hat / (std::sqrt(v_hat) + opt.eps) + opt.weight_decay * theta);
            p.value.v[i] = static_cast<float>(theta);
        }
    }
}

struct TrainConfig {
    double lr_max = 1e-3;  // desk-scale default; full-scale preset uses 1e-6
    double lr_min = 0;
    double weight_decay = 1e-5;
    double clip_norm = 1.0;
    int epochs = 30;
    int batch_size = 8;
    uint64_t seed = 0;
    SplitFractions fractions;
    std::optional<Basin> basin;  // local-model filter

    std::string canonical() const {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "lr=%g;lrmin=%g;wd=%g;clip=%g;ep=%d;bs=%d;seed=%llu",
                      lr_max, lr_min, weight_decay, clip_norm, epochs, batch_size,
                      static_cast<unsigned long long>(seed));
        return std::string(buf) + (basin ? std::string(";basin=") + basin_name(*basin) : "");
    }
};

// Full-scale preset matching the published training setup.
inline TrainConfig full_scale_train_config() {
    TrainConfig c;
    c.lr_max = 1e-6;
    return c;
}

struct TrainSample {
    std::string id;
    Basin basin = Basin::NA;
    Tensor4<float> features;  // 1 x C x H x W, normalized
    Tensor4<float> target;    // 1 x 1 x H x W, meters
};

struct HistoryRow {
    int epoch = 0;
    int64_t step = 0;
    double lr = 0;
    double train_loss = 0;
    double val_loss = 0;
};

struct TrainResult {
    ModelParameters best;
    double best_val_loss = 0;
    std::vector<HistoryRow> history;
};

namespace detail {

inline Tensor4<float> stack_batch(const std::vector<TrainSample>& samples,
                                  const std::vector<size_t>& idx, size_t lo, size_t hi,
                                  bool target) {
    const Tensor4<float>& first = target ? samples[idx[lo]].target : samples[idx[lo]].features;
    Tensor4<float> out(static_cast<int>(hi - lo), first.c, first.h, first.w);
    const size_t stride = first.size();
    for (size_t s = lo; s < hi; ++s) {
        const Tensor4<float>& src = target ? samples[idx[s]].target : samples[idx[s]].features;
        if (src.size() != stride) throw ShapeError("stack_batch: inconsistent sample shapes");
        std::copy(src.v.begin(), src.v.end(), out.v.begin() + (s - lo) * stride);
    }
    return out;
}

inline double eval_loss(const ModelParameters& params, const std::vector<TrainSample>& samples,
                        const std::vector<size_t>& idx, int batch_size) {
    if (idx.empty()) return 0;
    double sq_sum = 0;
    size_t n_elems = 0;
    for (size_t lo = 0; lo < idx.size(); lo += batch_size) {
        size_t hi = std::min(idx.size(), lo + batch_size);
        Tensor4<float> x = stack_batch(samples, idx, lo, hi, false);
        Tensor4<float> y = stack_batch(samples, idx, lo, hi, true);
        Graph<float> g;
        auto out = model_forward(g, params, g.leaf(std::move(x), false), false);
        const auto& pred = g.val(out);
        for (size_t i = 0; i < pred.size(); ++i) {
            double d = static_cast<double>(pred.v[i]) - y.v[i];
            sq_sum += d * d;
        }
        n_elems += pred.size();
    }
    return sq_sum / static_cast<double>(n_elems);
}

}  // namespace detail

// Mini-batch MSE training with cosine-annealed AdamW and global-norm
// clipping. Returns the best-validation-loss checkpoint (final parameters
// when there is no validation split).
inline TrainResult train(const TrainConfig& cfg, const std::vector<TrainSample>& train_samples,
                         const std::vector<TrainSample>& val_samples, ModelParameters params) {
    if (train_samples.empty()) throw ValidationError("train: empty training split");
    if (cfg.batch_size < 1 || cfg.epochs < 1) throw ConfigError("train: bad batch size or epochs");

    Rng rng(cfg.seed ^ 0x747261696eULL);
    OptimizerState state;
    AdamWOptions adam;
    adam.weight_decay = cfg.weight_decay;

    std::vector<size_t> order(train_samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<size_t> val_idx(val_samples.size());
    for (size_t i = 0; i < val_idx.size(); ++i) val_idx[i] = i;

    const int64_t steps_per_epoch =
        static_cast<int64_t>((train_samples.size() + cfg.batch_size - 1) / cfg.batch_size);
    const int64_t total_steps = steps_per_epoch * cfg.epochs;

    TrainResult result;
    result.best = params;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0;
        int64_t epoch_batches = 0;
        double lr = cfg.lr_max;
        for (size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
            size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch_size));
            Tensor4<float> x = detail::stack_batch(train_samples, order, lo, hi, false);
            Tensor4<float> y = detail::stack_batch(train_samples, order, lo, hi, true);

            Graph<float> g;
            std::map<std::string, int> ids;
            auto xi = g.leaf(std::move(x), false);
            auto out = model_forward(g, params, xi, true, &ids);
            auto loss = g.mse(out, g.leaf(std::move(y), false));
            double loss_val = g.val(loss).v[0];
            if (!std::isfinite(loss_val))
                throw NumericError("train: NaN loss at step " + std::to_string(step) +
                                   ", lr=" + std::to_string(lr));
            g.backward(loss);

            GradMap grads;
            for (const auto& [name, id] : ids) grads.emplace(name, g.grad(id));
            clip_grad_norm(grads, cfg.clip_norm);
            lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);
            adamw_step(params, grads, state, lr, adam);

            epoch_loss += loss_val;
            ++epoch_batches;
            ++step;
        }
        double val_loss = detail::eval_loss(params, val_samples, val_idx, cfg.batch_size);
        result.history.push_back(HistoryRow{epoch, step, lr, epoch_loss / epoch_batches, val_loss});
        if (val_samples.empty() || val_loss < result.best_val_loss) {
            result.best = params;
            result.best_val_loss = val_loss;
        }
    }
    return result;
}

}  // namespace surge
