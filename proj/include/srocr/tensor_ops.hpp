#pragma once

#include <optional>
#include <type_traits>
#include <vector>

#include "srocr/tensor.hpp"

namespace srocr::tensor {

struct ConvSpec {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel_size = 3;
    std::int64_t stride = 1;
    std::int64_t padding = 1;
    bool bias = true;

    /// Throws ShapeError for kernel_size < 1, stride < 1, padding < 0 or
    /// non-positive channel counts.
    void validate() const;
    Shape weight_shape() const { return {out_channels, in_channels, kernel_size, kernel_size}; }
    std::int64_t output_extent(std::int64_t input) const {
        return (input + 2 * padding - kernel_size) / stride + 1;
    }

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// 3x3, stride 1, "same" padding.
inline ConvSpec conv3x3(std::int64_t in, std::int64_t out, std::int64_t stride = 1) {
    return ConvSpec{in, out, 3, stride, 1, true};
}

enum class ActivationKind { relu, leaky_relu, prelu, sigmoid };

/// Elementwise nonlinearity. `slope` is the negative-side slope for
/// leaky_relu and prelu and is ignored otherwise.
struct Activation {
    ActivationKind kind = ActivationKind::relu;
    double slope = 0.0;

    static Activation relu() { return {ActivationKind::relu, 0.0}; }
    static Activation leaky_relu(double a = 0.2) { return {ActivationKind::leaky_relu, a}; }
    static Activation prelu(double a = 0.25) { return {ActivationKind::prelu, a}; }
    static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0}; }

    /// True where the derivative is discontinuous at zero.
    bool piecewise_linear() const { return kind != ActivationKind::sigmoid; }

    friend bool operator==(const Activation&, const Activation&) = default;
};

const char* to_string(ActivationKind kind);

// ---------------------------------------------------------------------------
// Forward kernels. Reference semantics are direct loops; every output element
// accumulates in the order (input channel, kernel row, kernel column) with the
// bias added last.

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                      const std::type_identity_t<BasicTensor<T>>* bias, const ConvSpec& spec);

template <typename T>
BasicTensor<T> activation(const Activation& act, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta, const BasicTensor<T>& mean,
                                const BasicTensor<T>& var, double eps = 1e-5);

/// Depth-to-space: out(n, c, h*r+i, w*r+j) = in(n, c*r*r + i*r + j, h, w).
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::int64_t r);

/// Space-to-depth; exact inverse of pixel_shuffle.
template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& x, std::int64_t r);

template <typename T>
BasicTensor<T> elementwise_add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);

/// Flattens each batch item to length m and computes x*W + b with W stored
/// as an (m, k) matrix. Output shape is (n, k, 1, 1).
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

/// Stacks along the channel axis.
template <typename T>
BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>& parts);

/// Channel range [begin, begin + count).
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count);

// ---------------------------------------------------------------------------
// Reverse-mode companions. Each takes the forward input and the gradient of
// the loss with respect to the forward output.

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;  // empty when the conv has no bias
};

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights, const ConvSpec& spec,
                             const BasicTensor<T>& grad_out);

template <typename T>
struct ActivationGrads {
    BasicTensor<T> input;
    T slope = T{0};  // d loss / d slope, meaningful for prelu only
};

template <typename T>
ActivationGrads<T> activation_backward(const Activation& act, const BasicTensor<T>& x,
                                       const BasicTensor<T>& grad_out);

template <typename T>
struct BatchNormGrads {
    BasicTensor<T> input;
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batch_norm_infer_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                            const BasicTensor<T>& mean, const BasicTensor<T>& var,
                                            double eps, const BasicTensor<T>& grad_out);

template <typename T>
struct DenseGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

/// Accumulates `src` into `dst` (same shape).
template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src);

/// Throws DomainError naming `what` if any element is NaN or infinite.
template <typename T>
void require_finite(const BasicTensor<T>& x, const char* what);

}  // namespace srocr::tensor
