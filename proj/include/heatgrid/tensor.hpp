#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "heatgrid/error.hpp"
#include "heatgrid/parallel.hpp"
#include "heatgrid/rng.hpp"

namespace heatgrid {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

inline std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

// Dense row-major n-d array participating in reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations allocate a fresh
// node holding the result values plus, when any operand is on a gradient
// path, the parent links and an adjoint closure. backward() replays those
// closures in exact reverse topological order, accumulating (never
// overwriting) into each node's grad buffer. Values are immutable after an
// op runs; only grad mutates afterwards.
//
// The scalar type is a template parameter: float for training, double for
// the finite-difference and convolution oracle suites.
template <typename S>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<S> data;
        std::vector<S> grad;  // same extent as data once touched
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;

        bool is_leaf() const { return parents.empty(); }

        void ensure_grad() {
            if (grad.size() != data.size()) grad.assign(data.size(), S{0});
        }
    };

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto node = make_node(std::move(shape));
        node->data.assign(shape_numel(node->shape), S{0});
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor full(Shape shape, S value) {
        auto node = make_node(std::move(shape));
        node->data.assign(shape_numel(node->shape), value);
        return Tensor(std::move(node));
    }

    static Tensor from_data(Shape shape, std::vector<S> values, bool requires_grad = false) {
        auto node = make_node(std::move(shape));
        if (values.size() != shape_numel(node->shape)) {
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not fill shape " + shape_to_string(node->shape));
        }
        node->data = std::move(values);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    // Uniform on [lo, hi), row-major draw order, fully determined by rng state.
    static Tensor uniform(Shape shape, S lo, S hi, Rng& rng, bool requires_grad = false) {
        auto node = make_node(std::move(shape));
        const std::size_t n = shape_numel(node->shape);
        node->data.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            node->data[i] = static_cast<S>(rng.uniform(static_cast<double>(lo),
                                                       static_cast<double>(hi)));
        }
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->data.size(); }

    std::span<S> data() { return node_->data; }
    std::span<const S> data() const { return node_->data; }

    std::span<S> grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    std::span<const S> grad() const {
        node_->ensure_grad();
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool value) { node_->requires_grad = value; }

    void zero_grad() {
        node_->ensure_grad();
        std::fill(node_->grad.begin(), node_->grad.end(), S{0});
    }

    S item() const {
        if (numel() != 1) {
            throw ContractError("item() requires a one-element tensor, got shape " +
                                shape_to_string(shape()));
        }
        return node_->data[0];
    }

    std::shared_ptr<Node>& node() { return node_; }
    const std::shared_ptr<Node>& node() const { return node_; }

    static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

    static std::shared_ptr<Node> make_node(Shape shape) {
        for (std::size_t d : shape) {
            if (d == 0) throw ShapeError("zero extent in shape " + shape_to_string(shape));
        }
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        return node;
    }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    std::shared_ptr<Node> node_;
};

namespace detail {

template <typename S>
using NodePtr = std::shared_ptr<typename Tensor<S>::Node>;

template <typename S>
Tensor<S> op_result(Shape shape, std::vector<S> data, std::vector<NodePtr<S>> parents,
                    std::function<void(typename Tensor<S>::Node&)> backward_fn) {
    auto node = Tensor<S>::make_node(std::move(shape));
    node->data = std::move(data);
    bool track = false;
    for (const auto& p : parents) track = track || p->requires_grad;
    if (track) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor<S>::wrap(std::move(node));
}

// Fixed-order 16-lane dot product; lanes keep gcc's vectorizer happy without
// relaxing the (deterministic) summation order.
template <typename S>
S dot_lanes(const S* a, const S* b, std::size_t n) {
    S lanes[16] = {};
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        for (std::size_t l = 0; l < 16; ++l) lanes[l] += a[i + l] * b[i + l];
    }
    S tail = S{0};
    for (; i < n; ++i) tail += a[i] * b[i];
    S s01 = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    S s23 = (lanes[4] + lanes[5]) + (lanes[6] + lanes[7]);
    S s45 = (lanes[8] + lanes[9]) + (lanes[10] + lanes[11]);
    S s67 = (lanes[12] + lanes[13]) + (lanes[14] + lanes[15]);
    return ((s01 + s23) + (s45 + s67)) + tail;
}

// Unpacks one sample into patch rows: patch[(c*kH+i)*kW+j][y*Wout+x] =
// in[c][y+i-pad][x+j-pad], zero outside the image.
template <typename S>
void im2col(const S* in, std::size_t cin, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t pad, std::size_t hout, std::size_t wout, S* patch) {
    for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                S* row = patch + ((c * kh + i) * kw + j) * (hout * wout);
                for (std::size_t y = 0; y < hout; ++y) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(y + i) - static_cast<std::ptrdiff_t>(pad);
                    S* dst = row + y * wout;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(dst, dst + wout, S{0});
                        continue;
                    }
                    const S* src = in + (c * h + static_cast<std::size_t>(iy)) * w;
                    // valid x range: 0 <= x + j - pad < w
                    const std::ptrdiff_t shift =
                        static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(pad);
                    const std::size_t x0 =
                        shift < 0 ? static_cast<std::size_t>(-shift) : std::size_t{0};
                    std::ptrdiff_t xend = static_cast<std::ptrdiff_t>(w) - shift;
                    if (xend > static_cast<std::ptrdiff_t>(wout)) xend = wout;
                    const std::size_t x1 = xend < 0 ? 0 : static_cast<std::size_t>(xend);
                    for (std::size_t x = 0; x < x0 && x < wout; ++x) dst[x] = S{0};
                    for (std::size_t x = x0; x < x1; ++x) {
                        dst[x] = src[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) +
                                                              shift)];
                    }
                    for (std::size_t x = x1; x < wout; ++x) dst[x] = S{0};
                }
            }
        }
    }
}

// out[o][p] = bias[o] + sum_k weight[o][k] * patch[k][p], k ascending, so each
// output element accumulates in the same order as the plain quadruple-loop
// definition (c, then kernel row, then kernel column).
template <typename S>
void conv_forward_sample(const S* patch, const S* weight, const S* bias, std::size_t cout,
                         std::size_t k_total, std::size_t p_total, S* out) {
    std::size_t o = 0;
    for (; o + 4 <= cout; o += 4) {
        S* a0 = out + (o + 0) * p_total;
        S* a1 = out + (o + 1) * p_total;
        S* a2 = out + (o + 2) * p_total;
        S* a3 = out + (o + 3) * p_total;
        std::fill(a0, a0 + p_total, bias[o + 0]);
        std::fill(a1, a1 + p_total, bias[o + 1]);
        std::fill(a2, a2 + p_total, bias[o + 2]);
        std::fill(a3, a3 + p_total, bias[o + 3]);
        for (std::size_t k = 0; k < k_total; ++k) {
            const S w0 = weight[(o + 0) * k_total + k];
            const S w1 = weight[(o + 1) * k_total + k];
            const S w2 = weight[(o + 2) * k_total + k];
            const S w3 = weight[(o + 3) * k_total + k];
            const S* row = patch + k * p_total;
            for (std::size_t p = 0; p < p_total; ++p) {
                const S v = row[p];
                a0[p] += w0 * v;
                a1[p] += w1 * v;
                a2[p] += w2 * v;
                a3[p] += w3 * v;
            }
        }
    }
    for (; o < cout; ++o) {
        S* acc = out + o * p_total;
        std::fill(acc, acc + p_total, bias[o]);
        for (std::size_t k = 0; k < k_total; ++k) {
            const S w = weight[o * k_total + k];
            const S* row = patch + k * p_total;
            for (std::size_t p = 0; p < p_total; ++p) acc[p] += w * row[p];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

// 2-d cross-correlation with zero padding and a per-output-channel bias.
// input [B,Cin,H,W], weight [Cout,Cin,kH,kW] (kH, kW odd), bias [Cout].
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias,
                 std::size_t padding) {
    const Shape& ishape = input.shape();
    const Shape& wshape = weight.shape();
    if (ishape.size() != 4 || wshape.size() != 4 || bias.shape().size() != 1) {
        throw ShapeError("conv2d expects input rank 4, weight rank 4, bias rank 1; got " +
                         shape_to_string(ishape) + ", " + shape_to_string(wshape) + ", " +
                         shape_to_string(bias.shape()));
    }
    const std::size_t batch = ishape[0], cin = ishape[1], h = ishape[2], w = ishape[3];
    const std::size_t cout = wshape[0], kh = wshape[2], kw = wshape[3];
    if (wshape[1] != cin) {
        throw ShapeError("conv2d channel mismatch: input " + shape_to_string(ishape) +
                         " has " + std::to_string(cin) + " channels, weight " +
                         shape_to_string(wshape) + " expects " + std::to_string(wshape[1]));
    }
    if (bias.shape()[0] != cout) {
        throw ShapeError("conv2d bias extent " + shape_to_string(bias.shape()) +
                         " does not match " + std::to_string(cout) + " output channels");
    }
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw ContractError("conv2d kernel extents must be odd, got " + shape_to_string(wshape));
    }
    const std::ptrdiff_t hout_s = static_cast<std::ptrdiff_t>(h + 2 * padding) -
                                  static_cast<std::ptrdiff_t>(kh) + 1;
    const std::ptrdiff_t wout_s = static_cast<std::ptrdiff_t>(w + 2 * padding) -
                                  static_cast<std::ptrdiff_t>(kw) + 1;
    if (hout_s < 1 || wout_s < 1) {
        throw ContractError("conv2d output would be empty for input " + shape_to_string(ishape) +
                            " with kernel " + shape_to_string(wshape) + " and padding " +
                            std::to_string(padding));
    }
    const std::size_t hout = static_cast<std::size_t>(hout_s);
    const std::size_t wout = static_cast<std::size_t>(wout_s);
    const std::size_t k_total = cin * kh * kw;
    const std::size_t p_total = hout * wout;

    std::vector<S> out(batch * cout * p_total);
    {
        const S* in_ptr = input.data().data();
        const S* w_ptr = weight.data().data();
        const S* b_ptr = bias.data().data();
        S* out_ptr = out.data();
        parallel_for(batch, [&](std::size_t lo, std::size_t hi) {
            std::vector<S> patch(k_total * p_total);
            for (std::size_t b = lo; b < hi; ++b) {
                detail::im2col(in_ptr + b * cin * h * w, cin, h, w, kh, kw, padding, hout, wout,
                               patch.data());
                detail::conv_forward_sample(patch.data(), w_ptr, b_ptr, cout, k_total, p_total,
                                            out_ptr + b * cout * p_total);
            }
        });
    }

    auto in_node = input.node();
    auto w_node = weight.node();
    auto b_node = bias.node();
    auto backward = [in_node, w_node, b_node, batch, cin, h, w, cout, kh, kw, padding, hout,
                     wout, k_total, p_total](typename Tensor<S>::Node& self) {
        const S* gout = self.grad.data();
        const bool need_input = in_node->requires_grad || !in_node->is_leaf();
        const bool need_weight = w_node->requires_grad || !w_node->is_leaf();
        const bool need_bias = b_node->requires_grad || !b_node->is_leaf();

        if (need_bias) {
            b_node->ensure_grad();
            S* gb = b_node->grad.data();
            for (std::size_t o = 0; o < cout; ++o) {
                S sum = S{0};
                for (std::size_t b = 0; b < batch; ++b) {
                    const S* g = gout + (b * cout + o) * p_total;
                    S lanes[8] = {};
                    std::size_t p = 0;
                    for (; p + 8 <= p_total; p += 8) {
                        for (std::size_t l = 0; l < 8; ++l) lanes[l] += g[p + l];
                    }
                    S tail = S{0};
                    for (; p < p_total; ++p) tail += g[p];
                    sum += ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
                }
                gb[o] += sum;
            }
        }

        if (need_weight) {
            w_node->ensure_grad();
            // Per-worker partials over batch chunks, reduced in chunk order:
            // deterministic for a fixed worker count.
            const std::size_t workers = std::min(thread_count(), batch);
            const std::size_t chunk = (batch + workers - 1) / workers;
            std::vector<std::vector<S>> partials(workers);
            parallel_for(batch, [&](std::size_t lo, std::size_t hi) {
                const std::size_t slot = lo / chunk;
                auto& dw = partials[slot];
                dw.assign(cout * k_total, S{0});
                std::vector<S> patch(k_total * p_total);
                constexpr std::size_t tile = 512;
                for (std::size_t b = lo; b < hi; ++b) {
                    detail::im2col(in_node->data.data() + b * cin * h * w, cin, h, w, kh, kw,
                                   padding, hout, wout, patch.data());
                    for (std::size_t p0 = 0; p0 < p_total; p0 += tile) {
                        const std::size_t len = std::min(tile, p_total - p0);
                        for (std::size_t o = 0; o < cout; ++o) {
                            const S* g = gout + (b * cout + o) * p_total + p0;
                            for (std::size_t k = 0; k < k_total; ++k) {
                                dw[o * k_total + k] +=
                                    detail::dot_lanes(g, patch.data() + k * p_total + p0, len);
                            }
                        }
                    }
                }
            });
            S* gw = w_node->grad.data();
            for (const auto& dw : partials) {
                if (dw.empty()) continue;
                for (std::size_t i = 0; i < dw.size(); ++i) gw[i] += dw[i];
            }
        }

        if (need_input) {
            in_node->ensure_grad();
            const S* w_ptr = w_node->data.data();
            S* gin = in_node->grad.data();
            parallel_for(batch, [&](std::size_t lo, std::size_t hi) {
                std::vector<S> dpatch_row(p_total);
                for (std::size_t b = lo; b < hi; ++b) {
                    const S* g = gout + b * cout * p_total;
                    S* gi = gin + b * cin * h * w;
                    for (std::size_t k = 0; k < k_total; ++k) {
                        // dpatch[k] = sum_o weight[o][k] * gout[o]
                        std::fill(dpatch_row.begin(), dpatch_row.end(), S{0});
                        for (std::size_t o = 0; o < cout; ++o) {
                            const S wv = w_ptr[o * k_total + k];
                            const S* grow = g + o * p_total;
                            for (std::size_t p = 0; p < p_total; ++p) {
                                dpatch_row[p] += wv * grow[p];
                            }
                        }
                        // scatter row k back onto the padded input window
                        const std::size_t c = k / (kh * kw);
                        const std::size_t i = (k / kw) % kh;
                        const std::size_t j = k % kw;
                        for (std::size_t y = 0; y < hout; ++y) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + i) -
                                                      static_cast<std::ptrdiff_t>(padding);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) -
                                                         static_cast<std::ptrdiff_t>(padding);
                            const std::size_t x0 =
                                shift < 0 ? static_cast<std::size_t>(-shift) : std::size_t{0};
                            std::ptrdiff_t xend = static_cast<std::ptrdiff_t>(w) - shift;
                            if (xend > static_cast<std::ptrdiff_t>(wout)) xend = wout;
                            S* dst = gi + (c * h + static_cast<std::size_t>(iy)) * w;
                            const S* src = dpatch_row.data() + y * wout;
                            for (std::size_t x = x0;
                                 x < (xend < 0 ? 0 : static_cast<std::size_t>(xend)); ++x) {
                                dst[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) +
                                                             shift)] += src[x];
                            }
                        }
                    }
                }
            });
        }
    };

    return detail::op_result<S>({batch, cout, hout, wout}, std::move(out),
                                {in_node, w_node, b_node}, std::move(backward));
}

// ---------------------------------------------------------------------------
// elementwise and structural ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > S{0} ? xd[i] : S{0};
    auto xn = x.node();
    return detail::op_result<S>(
        x.shape(), std::move(out), {xn}, [xn](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (xn->data[i] > S{0}) xn->grad[i] += self.grad[i];
            }
        });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const S v = xd[i];
        if (v >= S{0}) {
            out[i] = S{1} / (S{1} + std::exp(-v));
        } else {
            const S e = std::exp(v);
            out[i] = e / (S{1} + e);
        }
    }
    auto xn = x.node();
    return detail::op_result<S>(
        x.shape(), std::move(out), {xn}, [xn](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const S s = self.data[i];
                xn->grad[i] += self.grad[i] * s * (S{1} - s);
            }
        });
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xd[i]);
    auto xn = x.node();
    return detail::op_result<S>(
        x.shape(), std::move(out), {xn}, [xn](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const S t = self.data[i];
                xn->grad[i] += self.grad[i] * (S{1} - t * t);
            }
        });
}

namespace detail {

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + " operands must be shape-identical: " +
                         shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    }
}

}  // namespace detail

template <typename S>
Tensor<S> elementwise_add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_same_shape(a, b, "elementwise_add");
    std::vector<S> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    auto an = a.node();
    auto bn = b.node();
    return detail::op_result<S>(
        a.shape(), std::move(out), {an, bn}, [an, bn](typename Tensor<S>::Node& self) {
            an->ensure_grad();
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                an->grad[i] += self.grad[i];
                bn->grad[i] += self.grad[i];
            }
        });
}

template <typename S>
Tensor<S> elementwise_sub(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_same_shape(a, b, "elementwise_sub");
    std::vector<S> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    auto an = a.node();
    auto bn = b.node();
    return detail::op_result<S>(
        a.shape(), std::move(out), {an, bn}, [an, bn](typename Tensor<S>::Node& self) {
            an->ensure_grad();
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                an->grad[i] += self.grad[i];
                bn->grad[i] -= self.grad[i];
            }
        });
}

template <typename S>
Tensor<S> elementwise_mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_same_shape(a, b, "elementwise_mul");
    std::vector<S> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    auto an = a.node();
    auto bn = b.node();
    return detail::op_result<S>(
        a.shape(), std::move(out), {an, bn}, [an, bn](typename Tensor<S>::Node& self) {
            an->ensure_grad();
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                an->grad[i] += self.grad[i] * bn->data[i];
                bn->grad[i] += self.grad[i] * an->data[i];
            }
        });
}

template <typename S>
Tensor<S> scalar_mul(const Tensor<S>& x, S factor) {
    std::vector<S> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor;
    auto xn = x.node();
    return detail::op_result<S>(
        x.shape(), std::move(out), {xn}, [xn, factor](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                xn->grad[i] += self.grad[i] * factor;
            }
        });
}

// Concatenates two [B,C,H,W] tensors along the channel axis.
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() != 4 || bs.size() != 4 || as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3]) {
        throw ShapeError("concat_channels operands must agree on all non-channel extents: " +
                         shape_to_string(as) + " vs " + shape_to_string(bs));
    }
    const std::size_t batch = as[0], ca = as[1], cb = bs[1], plane = as[2] * as[3];
    std::vector<S> out(batch * (ca + cb) * plane);
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < batch; ++i) {
        std::copy(ad.begin() + i * ca * plane, ad.begin() + (i + 1) * ca * plane,
                  out.begin() + i * (ca + cb) * plane);
        std::copy(bd.begin() + i * cb * plane, bd.begin() + (i + 1) * cb * plane,
                  out.begin() + (i * (ca + cb) + ca) * plane);
    }
    auto an = a.node();
    auto bn = b.node();
    return detail::op_result<S>(
        {batch, ca + cb, as[2], as[3]}, std::move(out), {an, bn},
        [an, bn, batch, ca, cb, plane](typename Tensor<S>::Node& self) {
            an->ensure_grad();
            bn->ensure_grad();
            for (std::size_t i = 0; i < batch; ++i) {
                const S* g = self.grad.data() + i * (ca + cb) * plane;
                S* ga = an->grad.data() + i * ca * plane;
                S* gb = bn->grad.data() + i * cb * plane;
                for (std::size_t j = 0; j < ca * plane; ++j) ga[j] += g[j];
                for (std::size_t j = 0; j < cb * plane; ++j) gb[j] += g[ca * plane + j];
            }
        });
}

// Copies channels [c0, c1) of a [B,C,H,W] tensor.
template <typename S>
Tensor<S> channel_slice(const Tensor<S>& x, std::size_t c0, std::size_t c1) {
    const Shape& xs = x.shape();
    if (xs.size() != 4 || c0 >= c1 || c1 > xs[1]) {
        throw ShapeError("channel_slice [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") out of range for " + shape_to_string(xs));
    }
    const std::size_t batch = xs[0], c = xs[1], plane = xs[2] * xs[3], cs = c1 - c0;
    std::vector<S> out(batch * cs * plane);
    auto xd = x.data();
    for (std::size_t i = 0; i < batch; ++i) {
        std::copy(xd.begin() + (i * c + c0) * plane, xd.begin() + (i * c + c1) * plane,
                  out.begin() + i * cs * plane);
    }
    auto xn = x.node();
    return detail::op_result<S>(
        {batch, cs, xs[2], xs[3]}, std::move(out), {xn},
        [xn, batch, c, c0, cs, plane](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < batch; ++i) {
                const S* g = self.grad.data() + i * cs * plane;
                S* gx = xn->grad.data() + (i * c + c0) * plane;
                for (std::size_t j = 0; j < cs * plane; ++j) gx[j] += g[j];
            }
        });
}

// Copies time step t of a [B,T,C,H,W] tensor to [B,C,H,W].
template <typename S>
Tensor<S> time_slice(const Tensor<S>& x, std::size_t t) {
    const Shape& xs = x.shape();
    if (xs.size() != 5 || t >= xs[1]) {
        throw ShapeError("time_slice step " + std::to_string(t) + " out of range for " +
                         shape_to_string(xs));
    }
    const std::size_t batch = xs[0], steps = xs[1], block = xs[2] * xs[3] * xs[4];
    std::vector<S> out(batch * block);
    auto xd = x.data();
    for (std::size_t i = 0; i < batch; ++i) {
        std::copy(xd.begin() + (i * steps + t) * block, xd.begin() + (i * steps + t + 1) * block,
                  out.begin() + i * block);
    }
    auto xn = x.node();
    return detail::op_result<S>(
        {batch, xs[2], xs[3], xs[4]}, std::move(out), {xn},
        [xn, batch, steps, t, block](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < batch; ++i) {
                const S* g = self.grad.data() + i * block;
                S* gx = xn->grad.data() + (i * steps + t) * block;
                for (std::size_t j = 0; j < block; ++j) gx[j] += g[j];
            }
        });
}

// Row-major reinterpretation; total element count must be preserved.
template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape to " + shape_to_string(new_shape) + " changes element count of " +
                         shape_to_string(x.shape()));
    }
    std::vector<S> out(x.data().begin(), x.data().end());
    auto xn = x.node();
    return detail::op_result<S>(
        std::move(new_shape), std::move(out), {xn}, [xn](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        });
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& x) {
    const std::size_t n = x.numel();
    auto xd = x.data();
    S sum = S{0};
    for (std::size_t i = 0; i < n; ++i) sum += xd[i];
    auto xn = x.node();
    return detail::op_result<S>(
        {1}, {sum / static_cast<S>(n)}, {xn}, [xn, n](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            const S g = self.grad[0] / static_cast<S>(n);
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += g;
        });
}

template <typename S>
Tensor<S> abs_all(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] < S{0} ? -xd[i] : xd[i];
    auto xn = x.node();
    return detail::op_result<S>(
        x.shape(), std::move(out), {xn}, [xn](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const S v = xn->data[i];
                // subgradient 0 at the kink
                if (v > S{0}) {
                    xn->grad[i] += self.grad[i];
                } else if (v < S{0}) {
                    xn->grad[i] -= self.grad[i];
                }
            }
        });
}

template <typename S>
Tensor<S> square_all(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    auto xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * xd[i];
    auto xn = x.node();
    return detail::op_result<S>(
        x.shape(), std::move(out), {xn}, [xn](typename Tensor<S>::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                xn->grad[i] += self.grad[i] * S{2} * xn->data[i];
            }
        });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Reverse-mode pass from a scalar output. Adjoints accumulate into grad
// buffers; callers zero leaf grads between optimization steps.
template <typename S>
void backward(const Tensor<S>& output) {
    if (output.numel() != 1) {
        throw ContractError("backward requires a scalar output, got shape " +
                            shape_to_string(output.shape()));
    }
    using Node = typename Tensor<S>::Node;

    // Iterative post-order DFS; reversed, it yields exact reverse topological
    // order with every consumer visited before its producers.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({output.node().get(), 0});
    visited.insert(output.node().get());
    while (!stack.empty()) {
        Frame& frame = stack.back();
        if (frame.next_parent < frame.node->parents.size()) {
            Node* parent = frame.node->parents[frame.next_parent++].get();
            if (visited.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(frame.node);
            stack.pop_back();
        }
    }

    auto* out_node = output.node().get();
    out_node->ensure_grad();
    out_node->grad[0] += S{1};

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

}  // namespace heatgrid
