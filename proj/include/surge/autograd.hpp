#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "surge/errors.hpp"

namespace surge {

// Dense NCHW tensor. T is float for training, double for gradient checks.
template <class T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

    size_t size() const { return v.size(); }

    T& at(int i, int j, int y, int x) {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }
    const T& at(int i, int j, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + j) * h + y) * w + x];
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

template <class T, class U>
Tensor4<T> tensor_cast(const Tensor4<U>& src) {
    Tensor4<T> out(src.n, src.c, src.h, src.w);
    for (size_t i = 0; i < src.v.size(); ++i) out.v[i] = static_cast<T>(src.v[i]);
    return out;
}

// Reverse-mode tape over the operator set the UNet needs. Define-by-run:
// every op appends a node, so the tape is a DAG in topological order and
// backward() is a single reverse sweep.
template <class T>
class Graph {
public:
    using Id = int;

    Id leaf(Tensor4<T> value, bool requires_grad = false) {
        Node nd;
        nd.op = Op::Leaf;
        nd.val = std::move(value);
        nd.requires_grad = requires_grad;
        nodes_.push_back(std::move(nd));
        return static_cast<Id>(nodes_.size() - 1);
    }

    // k x k cross-correlation (no kernel flip), same padding, stride 1.
    // weight shape [c_out, c_in, k, k] with k odd; bias shape [1, c_out, 1, 1].
    Id conv2d(Id x, Id w, Id b) {
        const auto& xv = val(x);
        const auto& wv = val(w);
        const auto& bv = val(b);
        const int k = wv.h;
        if (wv.w != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
        if (wv.c != xv.c) throw ShapeError("conv2d: input channel mismatch");
        if (bv.n != 1 || bv.c != wv.n || bv.h != 1 || bv.w != 1)
            throw ShapeError("conv2d: bias shape must be [1,c_out,1,1]");

        Tensor4<T> out(xv.n, wv.n, xv.h, xv.w);
        conv_forward(xv, wv, bv, out);
        return push(Op::Conv2d, {x, w, b}, 3, std::move(out));
    }

    // 2x2 transposed convolution, stride 2 (exact doubling, no tap overlap).
    // weight shape [c_in, c_out, 2, 2]; bias shape [1, c_out, 1, 1].
    Id conv_transpose2d(Id x, Id w, Id b) {
        const auto& xv = val(x);
        const auto& wv = val(w);
        const auto& bv = val(b);
        if (wv.h != 2 || wv.w != 2) throw ShapeError("conv_transpose2d: kernel must be 2x2");
        if (wv.n != xv.c) throw ShapeError("conv_transpose2d: input channel mismatch");
        if (bv.n != 1 || bv.c != wv.c || bv.h != 1 || bv.w != 1)
            throw ShapeError("conv_transpose2d: bias shape must be [1,c_out,1,1]");

        Tensor4<T> out(xv.n, wv.c, 2 * xv.h, 2 * xv.w);
        convt_forward(xv, wv, bv, out);
        return push(Op::ConvT2d, {x, w, b}, 3, std::move(out));
    }

    // 2x2 max pooling, stride 2. Ties break to the first element in
    // row-major scan order so backward routing is deterministic.
    Id maxpool2d(Id x) {
        const auto& xv = val(x);
        if (xv.h % 2 != 0 || xv.w % 2 != 0) throw ShapeError("maxpool2d: spatial dims must be even");
        Tensor4<T> out(xv.n, xv.c, xv.h / 2, xv.w / 2);
        std::vector<int64_t> argmax(out.size());
        for (int n = 0; n < xv.n; ++n)
            for (int c = 0; c < xv.c; ++c)
                for (int y = 0; y < out.h; ++y)
                    for (int x2 = 0; x2 < out.w; ++x2) {
                        T best{};
                        int64_t best_idx = -1;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                int64_t idx =
                                    ((static_cast<int64_t>(n) * xv.c + c) * xv.h + 2 * y + dy) * xv.w +
                                    2 * x2 + dx;
                                T cand = xv.v[idx];
                                if (best_idx < 0 || cand > best) {
                                    best = cand;
                                    best_idx = idx;
                                }
                            }
                        out.at(n, c, y, x2) = best;
                        argmax[((static_cast<size_t>(n) * out.c + c) * out.h + y) * out.w + x2] = best_idx;
                    }
        Id id = push(Op::MaxPool, {x}, 1, std::move(out));
        nodes_[id].argmax = std::move(argmax);
        return id;
    }

    Id relu(Id x) {
        const auto& xv = val(x);
        Tensor4<T> out(xv.n, xv.c, xv.h, xv.w);
        for (size_t i = 0; i < xv.size(); ++i) out.v[i] = xv.v[i] > T(0) ? xv.v[i] : T(0);
        return push(Op::Relu, {x}, 1, std::move(out));
    }

    Id concat_channels(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
            throw ShapeError("concat_channels: n/h/w mismatch");
        Tensor4<T> out(av.n, av.c + bv.c, av.h, av.w);
        for (int n = 0; n < av.n; ++n) {
            for (int c = 0; c < av.c; ++c)
                std::copy_n(&av.v[((static_cast<size_t>(n) * av.c + c) * av.h) * av.w],
                            static_cast<size_t>(av.h) * av.w, &out.at(n, c, 0, 0));
            for (int c = 0; c < bv.c; ++c)
                std::copy_n(&bv.v[((static_cast<size_t>(n) * bv.c + c) * bv.h) * bv.w],
                            static_cast<size_t>(bv.h) * bv.w, &out.at(n, av.c + c, 0, 0));
        }
        return push(Op::Concat, {a, b}, 2, std::move(out));
    }

    // Mean of squared differences over every element (1x1x1x1 output).
    Id mse(Id pred, Id target) {
        const auto& pv = val(pred);
        const auto& tv = val(target);
        if (!pv.same_shape(tv)) throw ShapeError("mse: shape mismatch");
        T acc = T(0);
        for (size_t i = 0; i < pv.size(); ++i) {
            T d = pv.v[i] - tv.v[i];
            acc += d * d;
        }
        Tensor4<T> out(1, 1, 1, 1);
        out.v[0] = acc / static_cast<T>(pv.size());
        return push(Op::Mse, {pred, target}, 2, std::move(out));
    }

    void backward(Id loss) {
        if (val(loss).size() != 1) throw ShapeError("backward: loss must be scalar");
        for (auto& nd : nodes_) {
            nd.grad.v.clear();
        }
        ensure_grad(loss);
        nodes_[loss].grad.v[0] = T(1);
        for (Id i = loss; i >= 0; --i) {
            Node& nd = nodes_[i];
            if (!nd.requires_grad || nd.grad.v.empty() || nd.op == Op::Leaf) continue;
            dispatch_backward(nd);
        }
    }

    const Tensor4<T>& val(Id id) const { return nodes_[id].val; }

    // Zero tensor when the node never received gradient.
    const Tensor4<T>& grad(Id id) {
        ensure_grad(id);
        return nodes_[id].grad;
    }

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op { Leaf, Conv2d, ConvT2d, MaxPool, Relu, Concat, Mse };

    struct Node {
        Op op = Op::Leaf;
        std::array<Id, 3> in{{-1, -1, -1}};
        int nin = 0;
        Tensor4<T> val;
        Tensor4<T> grad;  // lazily shaped
        std::vector<int64_t> argmax;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;

    Id push(Op op, std::array<Id, 3> in, int nin, Tensor4<T> out) {
        Node nd;
        nd.op = op;
        nd.in = in;
        nd.nin = nin;
        nd.val = std::move(out);
        for (int i = 0; i < nin; ++i) nd.requires_grad |= nodes_[in[i]].requires_grad;
        nodes_.push_back(std::move(nd));
        return static_cast<Id>(nodes_.size() - 1);
    }

    void ensure_grad(Id id) {
        Node& nd = nodes_[id];
        if (nd.grad.v.empty()) {
            nd.grad = Tensor4<T>(nd.val.n, nd.val.c, nd.val.h, nd.val.w);
        }
    }

    bool wants_grad(Id id) const { return nodes_[id].requires_grad; }

    static void conv_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                             Tensor4<T>& out) {
        const int k = w.h, pad = k / 2;
        const int H = x.h, W = x.w;
        for (int n = 0; n < x.n; ++n)
            for (int co = 0; co < w.n; ++co) {
                T* o = &out.at(n, co, 0, 0);
                const T bias = b.v[co];
                for (int i = 0; i < H * W; ++i) o[i] = bias;
                for (int ci = 0; ci < x.c; ++ci) {
                    const T* in = &x.at(n, ci, 0, 0);
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const T wv = w.at(co, ci, ky, kx);
                            if (wv == T(0)) continue;
                            const int dy = ky - pad, dx = kx - pad;
                            const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            for (int y = y0; y < y1; ++y) {
                                const T* ir = in + (y + dy) * W + dx;
                                T* orow = o + y * W;
                                for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * ir[xx];
                            }
                        }
                }
            }
    }

    static void convt_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                              Tensor4<T>& out) {
        for (int n = 0; n < x.n; ++n)
            for (int co = 0; co < w.c; ++co) {
                const T bias = b.v[co];
                for (int y = 0; y < out.h; ++y)
                    for (int xx = 0; xx < out.w; ++xx) out.at(n, co, y, xx) = bias;
                for (int ci = 0; ci < x.c; ++ci)
                    for (int y = 0; y < x.h; ++y)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const T xv = x.at(n, ci, y, xx);
                            for (int ky = 0; ky < 2; ++ky)
                                for (int kx = 0; kx < 2; ++kx)
                                    out.at(n, co, 2 * y + ky, 2 * xx + kx) +=
                                        xv * w.at(ci, co, ky, kx);
                        }
            }
    }

    void dispatch_backward(Node& nd) {
        switch (nd.op) {
            case Op::Conv2d: backward_conv(nd); break;
            case Op::ConvT2d: backward_convt(nd); break;
            case Op::MaxPool: backward_maxpool(nd); break;
            case Op::Relu: backward_relu(nd); break;
            case Op::Concat: backward_concat(nd); break;
            case Op::Mse: backward_mse(nd); break;
            case Op::Leaf: break;
        }
    }

    void backward_conv(Node& nd) {
        Id xi = nd.in[0], wi = nd.in[1], bi = nd.in[2];
        const Tensor4<T>& x = nodes_[xi].val;
        const Tensor4<T>& w = nodes_[wi].val;
        const Tensor4<T>& g = nd.grad;
        const int k = w.h, pad = k / 2;
        const int H = x.h, W = x.w;

        if (wants_grad(xi)) {
            ensure_grad(xi);
            Tensor4<T>& dx = nodes_[xi].grad;
            for (int n = 0; n < x.n; ++n)
                for (int co = 0; co < w.n; ++co) {
                    const T* gr = &g.at(n, co, 0, 0);
                    for (int ci = 0; ci < x.c; ++ci) {
                        T* dxp = &dx.at(n, ci, 0, 0);
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const T wv = w.at(co, ci, ky, kx);
                                if (wv == T(0)) continue;
                                const int dy = ky - pad, dx_ = kx - pad;
                                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                                const int x0 = std::max(0, -dx_), x1 = std::min(W, W - dx_);
                                for (int y = y0; y < y1; ++y) {
                                    T* drow = dxp + (y + dy) * W + dx_;
                                    const T* grow = gr + y * W;
                                    for (int xx = x0; xx < x1; ++xx) drow[xx] += wv * grow[xx];
                                }
                            }
                    }
                }
        }
        if (wants_grad(wi)) {
            ensure_grad(wi);
            Tensor4<T>& dw = nodes_[wi].grad;
            for (int n = 0; n < x.n; ++n)
                for (int co = 0; co < w.n; ++co) {
                    const T* gr = &g.at(n, co, 0, 0);
                    for (int ci = 0; ci < x.c; ++ci) {
                        const T* in = &x.at(n, ci, 0, 0);
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int dy = ky - pad, dx_ = kx - pad;
                                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                                const int x0 = std::max(0, -dx_), x1 = std::min(W, W - dx_);
                                T acc = T(0);
                                for (int y = y0; y < y1; ++y) {
                                    const T* ir = in + (y + dy) * W + dx_;
                                    const T* grow = gr + y * W;
                                    for (int xx = x0; xx < x1; ++xx) acc += ir[xx] * grow[xx];
                                }
                                dw.at(co, ci, ky, kx) += acc;
                            }
                    }
                }
        }
        if (wants_grad(bi)) {
            ensure_grad(bi);
            Tensor4<T>& db = nodes_[bi].grad;
            for (int n = 0; n < g.n; ++n)
                for (int co = 0; co < g.c; ++co) {
                    T acc = T(0);
                    const T* gr = &g.at(n, co, 0, 0);
                    for (int i = 0; i < g.h * g.w; ++i) acc += gr[i];
                    db.v[co] += acc;
                }
        }
    }

    void backward_convt(Node& nd) {
        Id xi = nd.in[0], wi = nd.in[1], bi = nd.in[2];
        const Tensor4<T>& x = nodes_[xi].val;
        const Tensor4<T>& w = nodes_[wi].val;
        const Tensor4<T>& g = nd.grad;

        if (wants_grad(xi)) {
            ensure_grad(xi);
            Tensor4<T>& dx = nodes_[xi].grad;
            for (int n = 0; n < x.n; ++n)
                for (int ci = 0; ci < x.c; ++ci)
                    for (int y = 0; y < x.h; ++y)
                        for (int xx = 0; xx < x.w; ++xx) {
                            T acc = T(0);
                            for (int co = 0; co < w.c; ++co)
                                for (int ky = 0; ky < 2; ++ky)
                                    for (int kx = 0; kx < 2; ++kx)
                                        acc += g.at(n, co, 2 * y + ky, 2 * xx + kx) *
                                               w.at(ci, co, ky, kx);
                            dx.at(n, ci, y, xx) += acc;
                        }
        }
        if (wants_grad(wi)) {
            ensure_grad(wi);
            Tensor4<T>& dw = nodes_[wi].grad;
            for (int n = 0; n < x.n; ++n)
                for (int ci = 0; ci < x.c; ++ci)
                    for (int co = 0; co < w.c; ++co)
                        for (int ky = 0; ky < 2; ++ky)
                            for (int kx = 0; kx < 2; ++kx) {
                                T acc = T(0);
                                for (int y = 0; y < x.h; ++y)
                                    for (int xx = 0; xx < x.w; ++xx)
                                        acc += x.at(n, ci, y, xx) *
                                               g.at(n, co, 2 * y + ky, 2 * xx + kx);
                                dw.at(ci, co, ky, kx) += acc;
                            }
        }
        if (wants_grad(bi)) {
            ensure_grad(bi);
            Tensor4<T>& db = nodes_[bi].grad;
            for (int n = 0; n < g.n; ++n)
                for (int co = 0; co < g.c; ++co) {
                    T acc = T(0);
                    const T* gr = &g.at(n, co, 0, 0);
                    for (int i = 0; i < g.h * g.w; ++i) acc += gr[i];
                    db.v[co] += acc;
                }
        }
    }

    void backward_maxpool(Node& nd) {
        Id xi = nd.in[0];
        if (!wants_grad(xi)) return;
        ensure_grad(xi);
        Tensor4<T>& dx = nodes_[xi].grad;
        for (size_t i = 0; i < nd.grad.size(); ++i) dx.v[nd.argmax[i]] += nd.grad.v[i];
    }

    void backward_relu(Node& nd) {
        Id xi = nd.in[0];
        if (!wants_grad(xi)) return;
        ensure_grad(xi);
        const Tensor4<T>& x = nodes_[xi].val;
        Tensor4<T>& dx = nodes_[xi].grad;
        for (size_t i = 0; i < x.size(); ++i)
            if (x.v[i] > T(0)) dx.v[i] += nd.grad.v[i];
    }

    void backward_concat(Node& nd) {
        Id ai = nd.in[0], bi = nd.in[1];
        const Tensor4<T>& a = nodes_[ai].val;
        const Tensor4<T>& b = nodes_[bi].val;
        const Tensor4<T>& g = nd.grad;
        const size_t plane = static_cast<size_t>(a.h) * a.w;
        if (wants_grad(ai)) {
            ensure_grad(ai);
            Tensor4<T>& da = nodes_[ai].grad;
            for (int n = 0; n < a.n; ++n)
                for (int c = 0; c < a.c; ++c) {
                    const T* gp = &g.at(n, c, 0, 0);
                    T* dp = &da.at(n, c, 0, 0);
                    for (size_t i = 0; i < plane; ++i) dp[i] += gp[i];
                }
        }
        if (wants_grad(bi)) {
            ensure_grad(bi);
            Tensor4<T>& db = nodes_[bi].grad;
            for (int n = 0; n < b.n; ++n)
                for (int c = 0; c < b.c; ++c) {
                    const T* gp = &g.at(n, a.c + c, 0, 0);
                    T* dp = &db.at(n, c, 0, 0);
                    for (size_t i = 0; i < plane; ++i) dp[i] += gp[i];
                }
        }
    }

    void backward_mse(Node& nd) {
        Id pi = nd.in[0], ti = nd.in[1];
        const Tensor4<T>& p = nodes_[pi].val;
        const Tensor4<T>& t = nodes_[ti].val;
        const T up = nd.grad.v[0];
        const T scale = T(2) / static_cast<T>(p.size()) * up;
        if (wants_grad(pi)) {
            ensure_grad(pi);
            Tensor4<T>& dp = nodes_[pi].grad;
            for (size_t i = 0; i < p.size(); ++i) dp.v[i] += scale * (p.v[i] - t.v[i]);
        }
        if (wants_grad(ti)) {
            ensure_grad(ti);
            Tensor4<T>& dt = nodes_[ti].grad;
            for (size_t i = 0; i < p.size(); ++i) dt.v[i] -= scale * (p.v[i] - t.v[i]);
        }
    }
};

}  // namespace surge
