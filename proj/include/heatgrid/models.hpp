#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "heatgrid/error.hpp"
#include "heatgrid/rng.hpp"
#include "heatgrid/tensor.hpp"

namespace heatgrid {

enum class Arch { cnn, convlstm };

inline const char* arch_name(Arch arch) {
    return arch == Arch::cnn ? "cnn" : "convlstm";
}

inline Arch arch_from_name(const std::string& name) {
    if (name == "cnn") return Arch::cnn;
    if (name == "convlstm") return Arch::convlstm;
    throw Error(ErrorCode::config, "unknown architecture '" + name + "' (cnn|convlstm)");
}

template <typename S>
struct NamedParam {
    std::string name;
    Tensor<S> tensor;
};

namespace detail {

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] with fan_in = cin*kh*kw.
template <typename S>
Tensor<S> init_conv_weight(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
    return Tensor<S>::uniform({cout, cin, k, k}, static_cast<S>(-bound), static_cast<S>(bound),
                              rng, true);
}

}  // namespace detail

// Fully convolutional baseline: the temporal and channel axes are merged and
// the stack (T*C) -> 64 -> 64 -> 32 -> 1 is applied with spatial extent
// preserved (3x3 pad 1 convolutions plus a 1x1 head).
template <typename S>
struct CnnParams {
    static constexpr std::size_t kWidth1 = 64;
    static constexpr std::size_t kWidth2 = 64;
    static constexpr std::size_t kWidth3 = 32;

    std::size_t seq_len = 0;
    std::size_t channels = 0;  // per-day channels; first conv consumes seq_len*channels
    Tensor<S> conv1_w, conv1_b;
    Tensor<S> conv2_w, conv2_b;
    Tensor<S> conv3_w, conv3_b;
    Tensor<S> head_w, head_b;

    std::size_t merged_channels() const { return seq_len * channels; }

    std::vector<NamedParam<S>> named() {
        return {{"conv1.weight", conv1_w}, {"conv1.bias", conv1_b},
                {"conv2.weight", conv2_w}, {"conv2.bias", conv2_b},
                {"conv3.weight", conv3_w}, {"conv3.bias", conv3_b},
                {"head.weight", head_w},   {"head.bias", head_b}};
    }
};

// Recurrent model of the final experiments: one fused 3x3 gate convolution
// over the channel concatenation of input and hidden state produces the
// (i, f, o, g) pre-activations; the prediction head is a 3x3+ReLU followed
// by a 1x1 convolution on the final hidden state.
template <typename S>
struct ConvLstmParams {
    std::size_t channels = 0;    // per-step input channels
    std::size_t hidden_dim = 0;  // D_h
    Tensor<S> gate_w, gate_b;    // [4*D_h, C+D_h, 3, 3], [4*D_h]
    Tensor<S> head1_w, head1_b;  // [D_h, D_h, 3, 3]
    Tensor<S> head2_w, head2_b;  // [1, D_h, 1, 1]

    // Block layout of the fused gate convolution, recorded in checkpoints.
    static constexpr const char* kGateOrder = "ifog";

    std::vector<NamedParam<S>> named() {
        return {{"gates.weight", gate_w},  {"gates.bias", gate_b},
                {"head1.weight", head1_w}, {"head1.bias", head1_b},
                {"head2.weight", head2_w}, {"head2.bias", head2_b}};
    }
};

template <typename S>
struct LstmState {
    Tensor<S> hidden;  // [B, D_h, H, W]
    Tensor<S> cell;    // [B, D_h, H, W]
};

template <typename S>
CnnParams<S> init_cnn(std::size_t seq_len, std::size_t channels, std::uint64_t seed) {
    if (seq_len == 0 || channels == 0) {
        throw ContractError("init_cnn requires positive sequence length and channel count");
    }
    Rng rng(seed);
    CnnParams<S> p;
    p.seq_len = seq_len;
    p.channels = channels;
    p.conv1_w = detail::init_conv_weight<S>(CnnParams<S>::kWidth1, seq_len * channels, 3, rng);
    p.conv2_w = detail::init_conv_weight<S>(CnnParams<S>::kWidth2, CnnParams<S>::kWidth1, 3, rng);
    p.conv3_w = detail::init_conv_weight<S>(CnnParams<S>::kWidth3, CnnParams<S>::kWidth2, 3, rng);
    p.head_w = detail::init_conv_weight<S>(1, CnnParams<S>::kWidth3, 1, rng);
    p.conv1_b = Tensor<S>::zeros({CnnParams<S>::kWidth1}, true);
    p.conv2_b = Tensor<S>::zeros({CnnParams<S>::kWidth2}, true);
    p.conv3_b = Tensor<S>::zeros({CnnParams<S>::kWidth3}, true);
    p.head_b = Tensor<S>::zeros({1}, true);
    return p;
}

template <typename S>
ConvLstmParams<S> init_convlstm(std::size_t channels, std::size_t hidden_dim,
                                std::uint64_t seed) {
    if (channels == 0 || hidden_dim == 0) {
        throw ContractError("init_convlstm requires positive channel and hidden dimensions");
    }
    Rng rng(seed);
    ConvLstmParams<S> p;
    p.channels = channels;
    p.hidden_dim = hidden_dim;
    p.gate_w = detail::init_conv_weight<S>(4 * hidden_dim, channels + hidden_dim, 3, rng);
    p.head1_w = detail::init_conv_weight<S>(hidden_dim, hidden_dim, 3, rng);
    p.head2_w = detail::init_conv_weight<S>(1, hidden_dim, 1, rng);
    p.gate_b = Tensor<S>::zeros({4 * hidden_dim}, true);
    p.head1_b = Tensor<S>::zeros({hidden_dim}, true);
    p.head2_b = Tensor<S>::zeros({1}, true);
    return p;
}

namespace detail {

template <typename S>
void require_input_5d(const Tensor<S>& x, std::size_t channels, const char* what) {
    const Shape& xs = x.shape();
    if (xs.size() != 5) {
        throw ShapeError(std::string(what) + " expects a [B,T,C,H,W] input, got " +
                         shape_to_string(xs));
    }
    if (xs[2] != channels) {
        throw ShapeError(std::string(what) + " configured for " + std::to_string(channels) +
                         " channels per step, input has " + std::to_string(xs[2]) + " (" +
                         shape_to_string(xs) + ")");
    }
}

}  // namespace detail

template <typename S>
Tensor<S> cnn_forward(const CnnParams<S>& p, const Tensor<S>& x) {
    detail::require_input_5d(x, p.channels, "cnn_forward");
    const Shape& xs = x.shape();
    if (xs[1] != p.seq_len) {
        throw ShapeError("cnn_forward configured for sequence length " +
                         std::to_string(p.seq_len) + ", input has " + std::to_string(xs[1]));
    }
    auto merged = reshape(x, {xs[0], xs[1] * xs[2], xs[3], xs[4]});
    auto h1 = relu(conv2d(merged, p.conv1_w, p.conv1_b, 1));
    auto h2 = relu(conv2d(h1, p.conv2_w, p.conv2_b, 1));
    auto h3 = relu(conv2d(h2, p.conv3_w, p.conv3_b, 1));
    return conv2d(h3, p.head_w, p.head_b, 0);
}

template <typename S>
LstmState<S> convlstm_cell_step(const ConvLstmParams<S>& p, const Tensor<S>& x_t,
                                const LstmState<S>& state) {
    const Shape& xs = x_t.shape();
    if (xs.size() != 4 || xs[1] != p.channels) {
        throw ShapeError("convlstm_cell_step expects [B," + std::to_string(p.channels) +
                         ",H,W] input, got " + shape_to_string(xs));
    }
    const std::size_t d = p.hidden_dim;
    const Shape want{xs[0], d, xs[2], xs[3]};
    if (state.hidden.shape() != want || state.cell.shape() != want) {
        throw ShapeError("convlstm state extents " + shape_to_string(state.hidden.shape()) +
                         " inconsistent with input " + shape_to_string(xs) + " and hidden dim " +
                         std::to_string(d));
    }
    auto z = conv2d(concat_channels(x_t, state.hidden), p.gate_w, p.gate_b, 1);
    auto gate_i = sigmoid(channel_slice(z, 0, d));
    auto gate_f = sigmoid(channel_slice(z, d, 2 * d));
    auto gate_o = sigmoid(channel_slice(z, 2 * d, 3 * d));
    auto gate_g = tanh_op(channel_slice(z, 3 * d, 4 * d));
    LstmState<S> next;
    next.cell = elementwise_add(elementwise_mul(gate_f, state.cell),
                                elementwise_mul(gate_i, gate_g));
    next.hidden = elementwise_mul(gate_o, tanh_op(next.cell));
    return next;
}

template <typename S>
Tensor<S> convlstm_forward(const ConvLstmParams<S>& p, const Tensor<S>& x) {
    detail::require_input_5d(x, p.channels, "convlstm_forward");
    const Shape& xs = x.shape();
    const std::size_t steps = xs[1];
    if (steps < 1) {
        throw ContractError("convlstm_forward requires a nonempty sequence");
    }
    LstmState<S> state{Tensor<S>::zeros({xs[0], p.hidden_dim, xs[3], xs[4]}),
                       Tensor<S>::zeros({xs[0], p.hidden_dim, xs[3], xs[4]})};
    for (std::size_t t = 0; t < steps; ++t) {
        state = convlstm_cell_step(p, time_slice(x, t), state);
    }
    auto h = relu(conv2d(state.hidden, p.head1_w, p.head1_b, 1));
    return conv2d(h, p.head2_w, p.head2_b, 0);
}

// Either architecture behind one forward/parameter surface.
template <typename S>
struct ModelParams {
    std::variant<CnnParams<S>, ConvLstmParams<S>> value;

    Arch arch() const {
        return std::holds_alternative<CnnParams<S>>(value) ? Arch::cnn : Arch::convlstm;
    }

    Tensor<S> forward(const Tensor<S>& x) const {
        if (auto* cnn = std::get_if<CnnParams<S>>(&value)) return cnn_forward(*cnn, x);
        return convlstm_forward(std::get<ConvLstmParams<S>>(value), x);
    }

    std::vector<NamedParam<S>> named() {
        if (auto* cnn = std::get_if<CnnParams<S>>(&value)) return cnn->named();
        return std::get<ConvLstmParams<S>>(value).named();
    }
};

template <typename S>
ModelParams<S> init_params(Arch arch, std::size_t seq_len, std::size_t channels,
                           std::size_t hidden_dim, std::uint64_t seed) {
    ModelParams<S> p;
    if (arch == Arch::cnn) {
        p.value = init_cnn<S>(seq_len, channels, seed);
    } else {
        p.value = init_convlstm<S>(channels, hidden_dim, seed);
    }
    return p;
}

}  // namespace heatgrid
