#include "srocr/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace srocr::tensor {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
}

void ConvSpec::validate() const {
    if (kernel_size < 1) throw ShapeError("conv kernel_size must be >= 1");
    if (stride < 1) throw ShapeError("conv stride must be >= 1");
    if (padding < 0) throw ShapeError("conv padding must be >= 0");
    if (in_channels < 1 || out_channels < 1) throw ShapeError("conv channel counts must be positive");
}

const char* to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::leaky_relu: return "leaky_relu";
        case ActivationKind::prelu: return "prelu";
        case ActivationKind::sigmoid: return "sigmoid";
    }
    return "?";
}

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (!(a == b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
    }
}

void require_vector(const Shape& s, std::int64_t len, const char* op, const char* what) {
    if (s.size() != static_cast<std::size_t>(len)) {
        throw ShapeError(std::string(op) + ": " + what + " has " + std::to_string(s.size()) +
                         " elements, expected " + std::to_string(len));
    }
}

Shape conv_output_shape(const Shape& x, const ConvSpec& spec) {
    return {x.n, spec.out_channels, spec.output_extent(x.h), spec.output_extent(x.w)};
}

void check_conv(const Shape& x, const Shape& weights, const ConvSpec& spec) {
    spec.validate();
    if (x.c != spec.in_channels) {
        throw ShapeError("conv2d: input has " + std::to_string(x.c) + " channels, spec expects " +
                         std::to_string(spec.in_channels));
    }
    if (!(weights == spec.weight_shape())) {
        throw ShapeError("conv2d: weights " + weights.str() + " do not match spec " + spec.weight_shape().str());
    }
    if (spec.output_extent(x.h) < 1 || spec.output_extent(x.w) < 1) {
        throw ShapeError("conv2d: input " + x.str() + " too small for kernel " + std::to_string(spec.kernel_size));
    }
}

// Range of output positions o for which o*stride - pad + k lands inside [0, extent).
struct ValidRange {
    std::int64_t begin;
    std::int64_t end;
};

ValidRange valid_outputs(std::int64_t out_extent, std::int64_t in_extent, std::int64_t stride, std::int64_t pad,
                         std::int64_t k) {
    std::int64_t lo = 0;
    while (lo < out_extent && lo * stride - pad + k < 0) ++lo;
    std::int64_t hi = out_extent;
    while (hi > lo && (hi - 1) * stride - pad + k >= in_extent) --hi;
    return {lo, hi};
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weights, const std::type_identity_t<BasicTensor<T>>* bias,
                      const ConvSpec& spec) {
    const Shape& xs = x.shape();
    check_conv(xs, weights.shape(), spec);
    if (spec.bias) {
        if (bias == nullptr) throw ShapeError("conv2d: spec requires a bias vector");
        require_vector(bias->shape(), spec.out_channels, "conv2d", "bias");
    }
    const Shape os = conv_output_shape(xs, spec);
    BasicTensor<T> out(os);
    const std::int64_t k = spec.kernel_size;
    const std::int64_t s = spec.stride;
    const std::int64_t p = spec.padding;
    const std::size_t plane = static_cast<std::size_t>(os.h * os.w);
    std::vector<T> acc(plane);

    // Per output element the additions happen in (ic, ky, kx) order, exactly
    // as the direct loop would; only the loop nest is reordered so the inner
    // loop runs along output rows.
    for (std::int64_t n = 0; n < xs.n; ++n) {
        for (std::int64_t oc = 0; oc < os.c; ++oc) {
            std::fill(acc.begin(), acc.end(), T{0});
            for (std::int64_t ic = 0; ic < xs.c; ++ic) {
                const T* src = &x.at(n, ic, 0, 0);
                for (std::int64_t ky = 0; ky < k; ++ky) {
                    const ValidRange rows = valid_outputs(os.h, xs.h, s, p, ky);
                    for (std::int64_t kx = 0; kx < k; ++kx) {
                        const ValidRange cols = valid_outputs(os.w, xs.w, s, p, kx);
                        const T wv = weights.at(oc, ic, ky, kx);
                        for (std::int64_t oy = rows.begin; oy < rows.end; ++oy) {
                            const T* srow = src + (oy * s - p + ky) * xs.w;
                            T* arow = acc.data() + oy * os.w;
                            for (std::int64_t ox = cols.begin; ox < cols.end; ++ox) {
                                arow[ox] += wv * srow[ox * s - p + kx];
                            }
                        }
                    }
                }
            }
            T* dst = &out.at(n, oc, 0, 0);
            const T b = spec.bias ? (*bias)[static_cast<std::size_t>(oc)] : T{0};
            for (std::size_t i = 0; i < plane; ++i) dst[i] = spec.bias ? acc[i] + b : acc[i];
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights, const ConvSpec& spec,
                             const BasicTensor<T>& grad_out) {
    const Shape& xs = x.shape();
    check_conv(xs, weights.shape(), spec);
    const Shape os = conv_output_shape(xs, spec);
    require_same_shape(grad_out.shape(), os, "conv2d_backward");

    ConvGrads<T> g{BasicTensor<T>(xs), BasicTensor<T>(weights.shape()),
                   spec.bias ? BasicTensor<T>(Shape::vector(spec.out_channels)) : BasicTensor<T>()};
    const std::int64_t k = spec.kernel_size;
    const std::int64_t s = spec.stride;
    const std::int64_t p = spec.padding;

    for (std::int64_t n = 0; n < xs.n; ++n) {
        for (std::int64_t oc = 0; oc < os.c; ++oc) {
            const T* go = &grad_out.at(n, oc, 0, 0);
            if (spec.bias) {
                T sum{0};
                for (std::int64_t i = 0; i < os.h * os.w; ++i) sum += go[i];
                g.bias[static_cast<std::size_t>(oc)] += sum;
            }
            for (std::int64_t ic = 0; ic < xs.c; ++ic) {
                const T* src = &x.at(n, ic, 0, 0);
                T* dsrc = &g.input.at(n, ic, 0, 0);
                for (std::int64_t ky = 0; ky < k; ++ky) {
                    const ValidRange rows = valid_outputs(os.h, xs.h, s, p, ky);
                    for (std::int64_t kx = 0; kx < k; ++kx) {
                        const ValidRange cols = valid_outputs(os.w, xs.w, s, p, kx);
                        const T wv = weights.at(oc, ic, ky, kx);
                        T dw{0};
                        for (std::int64_t oy = rows.begin; oy < rows.end; ++oy) {
                            const std::int64_t row = (oy * s - p + ky) * xs.w;
                            const T* grow = go + oy * os.w;
                            for (std::int64_t ox = cols.begin; ox < cols.end; ++ox) {
                                const std::int64_t col = ox * s - p + kx;
                                dw += grow[ox] * src[row + col];
                                dsrc[row + col] += wv * grow[ox];
                            }
                        }
                        g.weights.at(oc, ic, ky, kx) += dw;
                    }
                }
            }
        }
    }
    return g;
}

template <typename T>
void require_finite(const BasicTensor<T>& x, const char* what) {
    for (const T v : x.data()) {
        if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite value in input");
    }
}

namespace {

template <typename T>
T sigmoid_scalar(T v) {
    // Clamped so the result stays strictly inside (0, 1) at working precision.
    const T s = T{1} / (T{1} + std::exp(-v));
    return std::clamp(s, std::numeric_limits<T>::min(), std::nextafter(T{1}, T{0}));
}

}  // namespace

template <typename T>
BasicTensor<T> activation(const Activation& act, const BasicTensor<T>& x) {
    if (!std::isfinite(act.slope)) throw DomainError("activation: slope must be finite");
    require_finite(x, "activation");
    BasicTensor<T> out(x.shape());
    const T a = static_cast<T>(act.slope);
    auto src = x.data();
    auto dst = out.data();
    switch (act.kind) {
        case ActivationKind::relu:
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < T{0} ? T{0} : src[i];
            break;
        case ActivationKind::leaky_relu:
        case ActivationKind::prelu:
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < T{0} ? a * src[i] : src[i];
            break;
        case ActivationKind::sigmoid:
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid_scalar(src[i]);
            break;
    }
    return out;
}

template <typename T>
ActivationGrads<T> activation_backward(const Activation& act, const BasicTensor<T>& x,
                                       const BasicTensor<T>& grad_out) {
    require_same_shape(x.shape(), grad_out.shape(), "activation_backward");
    ActivationGrads<T> g{BasicTensor<T>(x.shape()), T{0}};
    const T a = static_cast<T>(act.slope);
    auto src = x.data();
    auto go = grad_out.data();
    auto dx = g.input.data();
    switch (act.kind) {
        case ActivationKind::relu:
            for (std::size_t i = 0; i < src.size(); ++i) dx[i] = src[i] < T{0} ? T{0} : go[i];
            break;
        case ActivationKind::leaky_relu:
        case ActivationKind::prelu:
            for (std::size_t i = 0; i < src.size(); ++i) {
                if (src[i] < T{0}) {
                    dx[i] = a * go[i];
                    g.slope += src[i] * go[i];
                } else {
                    dx[i] = go[i];
                }
            }
            break;
        case ActivationKind::sigmoid:
            for (std::size_t i = 0; i < src.size(); ++i) {
                const T s = sigmoid_scalar(src[i]);
                dx[i] = go[i] * s * (T{1} - s);
            }
            break;
    }
    if (act.kind != ActivationKind::prelu) g.slope = T{0};
    return g;
}

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                const BasicTensor<T>& mean, const BasicTensor<T>& var, double eps) {
    const Shape& xs = x.shape();
    require_vector(gamma.shape(), xs.c, "batch_norm", "gamma");
    require_vector(beta.shape(), xs.c, "batch_norm", "beta");
    require_vector(mean.shape(), xs.c, "batch_norm", "mean");
    require_vector(var.shape(), xs.c, "batch_norm", "var");
    if (eps < 0) throw DomainError("batch_norm: eps must be >= 0");
    BasicTensor<T> out(xs);
    const std::size_t plane = static_cast<std::size_t>(xs.h * xs.w);
    for (std::int64_t c = 0; c < xs.c; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        if (var[ci] < T{0}) throw DomainError("batch_norm: negative variance");
        const T sd = std::sqrt(var[ci] + static_cast<T>(eps));
        for (std::int64_t n = 0; n < xs.n; ++n) {
            const T* src = &x.at(n, c, 0, 0);
            T* dst = &out.at(n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean[ci]) / sd * gamma[ci] + beta[ci];
        }
    }
    return out;
}

template <typename T>
BatchNormGrads<T> batch_norm_infer_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                            const BasicTensor<T>& mean, const BasicTensor<T>& var, double eps,
                                            const BasicTensor<T>& grad_out) {
    const Shape& xs = x.shape();
    require_same_shape(xs, grad_out.shape(), "batch_norm_backward");
    BatchNormGrads<T> g{BasicTensor<T>(xs), BasicTensor<T>(gamma.shape()), BasicTensor<T>(gamma.shape())};
    const std::size_t plane = static_cast<std::size_t>(xs.h * xs.w);
    for (std::int64_t c = 0; c < xs.c; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const T sd = std::sqrt(var[ci] + static_cast<T>(eps));
        T dgamma{0};
        T dbeta{0};
        for (std::int64_t n = 0; n < xs.n; ++n) {
            const T* src = &x.at(n, c, 0, 0);
            const T* go = &grad_out.at(n, c, 0, 0);
            T* dx = &g.input.at(n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                dx[i] = go[i] * gamma[ci] / sd;
                dgamma += go[i] * (src[i] - mean[ci]) / sd;
                dbeta += go[i];
            }
        }
        g.gamma[ci] = dgamma;
        g.beta[ci] = dbeta;
    }
    return g;
}

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::int64_t r) {
    const Shape& xs = x.shape();
    if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
    if (xs.c % (r * r) != 0) {
        throw ShapeError("pixel_shuffle: " + std::to_string(xs.c) + " channels not divisible by r^2 = " +
                         std::to_string(r * r));
    }
    BasicTensor<T> out(Shape{xs.n, xs.c / (r * r), xs.h * r, xs.w * r});
    for (std::int64_t n = 0; n < xs.n; ++n)
        for (std::int64_t c = 0; c < out.shape().c; ++c)
            for (std::int64_t h = 0; h < xs.h; ++h)
                for (std::int64_t i = 0; i < r; ++i)
                    for (std::int64_t w = 0; w < xs.w; ++w)
                        for (std::int64_t j = 0; j < r; ++j)
                            out.at(n, c, h * r + i, w * r + j) = x.at(n, c * r * r + i * r + j, h, w);
    return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& x, std::int64_t r) {
    const Shape& xs = x.shape();
    if (r < 1) throw ShapeError("pixel_unshuffle: factor must be >= 1");
    if (xs.h % r != 0 || xs.w % r != 0) {
        throw ShapeError("pixel_unshuffle: spatial extents of " + xs.str() + " not divisible by " +
                         std::to_string(r));
    }
    BasicTensor<T> out(Shape{xs.n, xs.c * r * r, xs.h / r, xs.w / r});
    for (std::int64_t n = 0; n < xs.n; ++n)
        for (std::int64_t c = 0; c < xs.c; ++c)
            for (std::int64_t h = 0; h < out.shape().h; ++h)
                for (std::int64_t i = 0; i < r; ++i)
                    for (std::int64_t w = 0; w < out.shape().w; ++w)
                        for (std::int64_t j = 0; j < r; ++j)
                            out.at(n, c * r * r + i * r + j, h, w) = x.at(n, c, h * r + i, w * r + j);
    return out;
}

template <typename T>
BasicTensor<T> elementwise_add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a.shape(), b.shape(), "elementwise_add");
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
    BasicTensor<T> out(x.shape());
    const T f = static_cast<T>(factor);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * f;
    return out;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
    const Shape& xs = x.shape();
    const std::int64_t m = xs.c * xs.h * xs.w;
    const Shape& ws = weights.shape();
    if (ws.n != 1 || ws.c != 1 || ws.h != m) {
        throw ShapeError("dense: weights " + ws.str() + " do not accept flattened input of length " +
                         std::to_string(m));
    }
    const std::int64_t k = ws.w;
    require_vector(bias.shape(), k, "dense", "bias");
    BasicTensor<T> out(Shape{xs.n, k, 1, 1});
    const T* wp = weights.data().data();
    for (std::int64_t n = 0; n < xs.n; ++n) {
        const T* row = x.data().data() + n * m;
        for (std::int64_t j = 0; j < k; ++j) {
            T acc{0};
            for (std::int64_t i = 0; i < m; ++i) acc += row[i] * wp[i * k + j];
            out[static_cast<std::size_t>(n * k + j)] = acc + bias[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
    const Shape& xs = x.shape();
    const std::int64_t m = xs.c * xs.h * xs.w;
    const std::int64_t k = weights.shape().w;
    require_same_shape(grad_out.shape(), Shape{xs.n, k, 1, 1}, "dense_backward");
    DenseGrads<T> g{BasicTensor<T>(xs), BasicTensor<T>(weights.shape()), BasicTensor<T>(Shape::vector(k))};
    const T* wp = weights.data().data();
    T* dw = g.weights.data().data();
    for (std::int64_t n = 0; n < xs.n; ++n) {
        const T* row = x.data().data() + n * m;
        const T* go = grad_out.data().data() + n * k;
        T* dx = g.input.data().data() + n * m;
        for (std::int64_t i = 0; i < m; ++i) {
            T acc{0};
            const T* wrow = wp + i * k;
            T* dwrow = dw + i * k;
            for (std::int64_t j = 0; j < k; ++j) {
                acc += go[j] * wrow[j];
                dwrow[j] += row[i] * go[j];
            }
            dx[i] = acc;
        }
        for (std::int64_t j = 0; j < k; ++j) g.bias[static_cast<std::size_t>(j)] += go[j];
    }
    return g;
}

template <typename T>
BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape first = parts.front()->shape();
    std::int64_t channels = 0;
    for (const auto* p : parts) {
        const Shape& s = p->shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw ShapeError("concat_channels: incompatible " + s.str() + " vs " + first.str());
        }
        channels += s.c;
    }
    BasicTensor<T> out(Shape{first.n, channels, first.h, first.w});
    const std::size_t plane = static_cast<std::size_t>(first.h * first.w);
    for (std::int64_t n = 0; n < first.n; ++n) {
        std::int64_t offset = 0;
        for (const auto* p : parts) {
            const std::size_t len = static_cast<std::size_t>(p->shape().c) * plane;
            std::copy_n(&p->at(n, 0, 0, 0), len, &out.at(n, offset, 0, 0));
            offset += p->shape().c;
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::int64_t begin, std::int64_t count) {
    const Shape& xs = x.shape();
    if (begin < 0 || count < 0 || begin + count > xs.c) {
        throw ShapeError("slice_channels: range out of bounds for " + xs.str());
    }
    BasicTensor<T> out(Shape{xs.n, count, xs.h, xs.w});
    const std::size_t len = static_cast<std::size_t>(count * xs.h * xs.w);
    for (std::int64_t n = 0; n < xs.n; ++n) {
        if (len > 0) std::copy_n(&x.at(n, begin, 0, 0), len, &out.at(n, 0, 0, 0));
    }
    return out;
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
    require_same_shape(dst.shape(), src.shape(), "accumulate");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

#define SROCR_INSTANTIATE(T)                                                                                   \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*,       \
                                   const ConvSpec&);                                                          \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const ConvSpec&,      \
                                          const BasicTensor<T>&);                                             \
    template BasicTensor<T> activation(const Activation&, const BasicTensor<T>&);                             \
    template ActivationGrads<T> activation_backward(const Activation&, const BasicTensor<T>&,                 \
                                                    const BasicTensor<T>&);                                   \
    template BasicTensor<T> batch_norm_infer(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                             const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                             const BasicTensor<T>&, double);                                  \
    template BatchNormGrads<T> batch_norm_infer_backward(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                                         const BasicTensor<T>&, const BasicTensor<T>&,        \
                                                         double, const BasicTensor<T>&);                      \
    template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, std::int64_t);                               \
    template BasicTensor<T> pixel_unshuffle(const BasicTensor<T>&, std::int64_t);                             \
    template BasicTensor<T> elementwise_add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> scale(const BasicTensor<T>&, double);                                             \
    template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);       \
    template DenseGrads<T> dense_backward(const BasicTensor<T>&, const BasicTensor<T>&,                       \
                                          const BasicTensor<T>&);                                             \
    template BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>&);                       \
    template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::int64_t, std::int64_t);                \
    template void accumulate(BasicTensor<T>&, const BasicTensor<T>&);                                         \
    template void require_finite(const BasicTensor<T>&, const char*);

SROCR_INSTANTIATE(float)
SROCR_INSTANTIATE(double)

#undef SROCR_INSTANTIATE

}  // namespace srocr::tensor
