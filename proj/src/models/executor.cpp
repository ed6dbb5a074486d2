#include "srocr/models/executor.hpp"

#include <stdexcept>

#include "srocr/resample_kernels.hpp"

namespace srocr::models {

using tensor::BasicTensor;

template <typename T>
const typename Tape<T>::TensorType& Tape<T>::input_of(const LayerNode* node) const {
    auto it = saved_.find(node);
    if (it == saved_.end()) throw std::logic_error("tape holds no activation for node '" + node->name + "'");
    return it->second;
}

template <typename T>
std::vector<bool> Tape<T>::kink_pattern() const {
    std::vector<bool> bits;
    for (const LayerNode* node : order_) {
        bool piecewise = false;
        if (const auto* a = std::get_if<ActivationLayer>(&node->op)) piecewise = a->act.piecewise_linear();
        // Dense blocks store their pre-activations against the block itself.
        if (std::holds_alternative<DenseBlock>(node->op)) piecewise = true;
        if (!piecewise) continue;
        for (const T v : saved_.at(node).data()) bits.push_back(v < T{0});
    }
    return bits;
}

namespace {

template <typename T>
class Runner {
public:
    using TensorT = BasicTensor<T>;

    Runner(const BasicWeightStore<T>& weights, Tape<T>* tape) : w_(weights), tape_(tape) {}

    TensorT run(const std::vector<LayerNode>& nodes, TensorT x) {
        for (const auto& node : nodes) x = run(node, std::move(x));
        return x;
    }

    TensorT run(const LayerNode& node, TensorT x) {
        return std::visit([&](const auto& op) { return apply(node, op, std::move(x)); }, node.op);
    }

private:
    void save(const LayerNode& node, const TensorT& x) {
        if (tape_ != nullptr) tape_->save(&node, x);
    }

    const TensorT& slot(const LayerNode& node, const char* leaf) const { return w_.get(node.name + "." + leaf); }

    TensorT apply(const LayerNode& node, const ConvLayer& op, TensorT x) {
        save(node, x);
        const TensorT* bias = op.spec.bias ? &slot(node, "bias") : nullptr;
        return tensor::conv2d(x, slot(node, "weight"), bias, op.spec);
    }

    TensorT apply(const LayerNode& node, const ActivationLayer& op, TensorT x) {
        save(node, x);
        return tensor::activation(effective(node, op.act), x);
    }

    TensorT apply(const LayerNode& node, const BatchNormLayer& op, TensorT x) {
        save(node, x);
        return tensor::batch_norm_infer(x, slot(node, "gamma"), slot(node, "beta"), slot(node, "running_mean"),
                                        slot(node, "running_var"), op.eps);
    }

    TensorT apply(const LayerNode&, const PixelShuffleLayer& op, TensorT x) {
        return tensor::pixel_shuffle(x, op.factor);
    }

    TensorT apply(const LayerNode& node, const DenseLayer&, TensorT x) {
        save(node, x);
        return tensor::dense(x, slot(node, "weight"), slot(node, "bias"));
    }

    TensorT apply(const LayerNode&, const ScaleResidualLayer& op, TensorT x) { return tensor::scale(x, op.beta); }

    TensorT apply(const LayerNode&, const ResidualBlock& op, TensorT x) {
        TensorT body = run(op.body, x);
        return tensor::elementwise_add(x, body);
    }

    TensorT apply(const LayerNode&, const GlobalSkip& op, TensorT x) {
        TensorT body = run(op.body, x);
        return tensor::elementwise_add(x, body);
    }

    TensorT apply(const LayerNode& node, const DenseBlock& op, TensorT x) {
        std::vector<TensorT> feats;
        feats.reserve(op.convs.size());
        feats.push_back(x);
        std::vector<TensorT> pre;
        for (std::size_t i = 0; i < op.convs.size(); ++i) {
            std::vector<const TensorT*> parts;
            for (const auto& f : feats) parts.push_back(&f);
            TensorT out = run(op.convs[i], tensor::concat_channels(parts));
            if (i + 1 == op.convs.size()) {
                if (tape_ != nullptr) tape_->save(&node, flatten_concat(pre));
                return tensor::elementwise_add(x, tensor::scale(out, op.beta));
            }
            pre.push_back(out);
            feats.push_back(tensor::activation(op.act, out));
        }
        return x;
    }

    TensorT apply(const LayerNode&, const Rrdb& op, TensorT x) {
        TensorT y = run(op.blocks, x);
        return tensor::elementwise_add(x, tensor::scale(y, op.beta));
    }

    Activation effective(const LayerNode& node, Activation act) const {
        if (act.kind == tensor::ActivationKind::prelu) act.slope = static_cast<double>(slot(node, "slope")[0]);
        return act;
    }

    // Pre-activations of a dense block are stored as one flat tensor; the
    // backward pass recovers each piece by offset.
    static TensorT flatten_concat(const std::vector<TensorT>& parts) {
        std::size_t total = 0;
        for (const auto& p : parts) total += p.size();
        std::vector<T> data;
        data.reserve(total);
        for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
        return TensorT(tensor::Shape::vector(static_cast<std::int64_t>(total)), std::move(data));
    }

    const BasicWeightStore<T>& w_;
    Tape<T>* tape_;
};

template <typename T>
class BackRunner {
public:
    using TensorT = BasicTensor<T>;

    BackRunner(const BasicWeightStore<T>& weights, const Tape<T>& tape, BasicWeightStore<T>& grads)
        : w_(weights), tape_(tape), grads_(grads) {}

    TensorT run(const std::vector<LayerNode>& nodes, TensorT g) {
        for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) g = run(*it, std::move(g));
        return g;
    }

    TensorT run(const LayerNode& node, TensorT g) {
        return std::visit([&](const auto& op) { return apply(node, op, std::move(g)); }, node.op);
    }

private:
    const TensorT& slot(const LayerNode& node, const char* leaf) const { return w_.get(node.name + "." + leaf); }
    void grad(const LayerNode& node, const char* leaf, TensorT value) {
        grads_.set(node.name + "." + leaf, std::move(value));
    }

    TensorT apply(const LayerNode& node, const ConvLayer& op, TensorT g) {
        auto cg = tensor::conv2d_backward(tape_.input_of(&node), slot(node, "weight"), op.spec, g);
        grad(node, "weight", std::move(cg.weights));
        if (op.spec.bias) grad(node, "bias", std::move(cg.bias));
        return std::move(cg.input);
    }

    TensorT apply(const LayerNode& node, const ActivationLayer& op, TensorT g) {
        Activation act = op.act;
        if (act.kind == tensor::ActivationKind::prelu) act.slope = static_cast<double>(slot(node, "slope")[0]);
        auto ag = tensor::activation_backward(act, tape_.input_of(&node), g);
        if (act.kind == tensor::ActivationKind::prelu)
            grad(node, "slope", TensorT(tensor::Shape::vector(1), std::vector<T>{ag.slope}));
        return std::move(ag.input);
    }

    TensorT apply(const LayerNode& node, const BatchNormLayer& op, TensorT g) {
        auto bg = tensor::batch_norm_infer_backward(tape_.input_of(&node), slot(node, "gamma"),
                                                    slot(node, "running_mean"), slot(node, "running_var"), op.eps, g);
        grad(node, "gamma", std::move(bg.gamma));
        grad(node, "beta", std::move(bg.beta));
        return std::move(bg.input);
    }

    TensorT apply(const LayerNode&, const PixelShuffleLayer& op, TensorT g) {
        return tensor::pixel_unshuffle(g, op.factor);
    }

    TensorT apply(const LayerNode& node, const DenseLayer&, TensorT g) {
        auto dg = tensor::dense_backward(tape_.input_of(&node), slot(node, "weight"), g);
        grad(node, "weight", std::move(dg.weights));
        grad(node, "bias", std::move(dg.bias));
        return std::move(dg.input);
    }

    TensorT apply(const LayerNode&, const ScaleResidualLayer& op, TensorT g) { return tensor::scale(g, op.beta); }

    TensorT apply(const LayerNode&, const ResidualBlock& op, TensorT g) {
        TensorT body = run(op.body, g);
        return tensor::elementwise_add(g, body);
    }

    TensorT apply(const LayerNode&, const GlobalSkip& op, TensorT g) {
        TensorT body = run(op.body, g);
        return tensor::elementwise_add(g, body);
    }

    TensorT apply(const LayerNode& node, const DenseBlock& op, TensorT g) {
        const std::size_t count = op.convs.size();
        const auto& first = std::get<ConvLayer>(op.convs.front().op).spec;
        const std::int64_t base = first.in_channels;
        const std::int64_t growth = first.out_channels;
        // Feature 0 is the block input; feature f > 0 is the activated output of conv f-1.
        std::vector<TensorT> feat_grads(count);
        feat_grads[0] = g;
        const TensorT& pre_flat = tape_.input_of(&node);
        std::size_t pre_end = pre_flat.size();

        TensorT out_grad = tensor::scale(g, op.beta);
        for (std::size_t k = count; k-- > 0;) {
            if (k + 1 < count) {
                out_grad = feat_grads[k + 1];
                const std::size_t len = out_grad.size();
                pre_end -= len;
                const auto begin = pre_flat.data().begin() + static_cast<std::ptrdiff_t>(pre_end);
                TensorT pre(out_grad.shape(), std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(len)));
                out_grad = tensor::activation_backward(op.act, pre, out_grad).input;
            }
            TensorT in_grad = run(op.convs[k], out_grad);
            std::int64_t offset = 0;
            for (std::size_t f = 0; f <= k; ++f) {
                const std::int64_t width = (f == 0) ? base : growth;
                TensorT part = tensor::slice_channels(in_grad, offset, width);
                offset += width;
                if (feat_grads[f].empty())
                    feat_grads[f] = std::move(part);
                else
                    tensor::accumulate(feat_grads[f], part);
            }
        }
        return feat_grads[0];
    }

    TensorT apply(const LayerNode&, const Rrdb& op, TensorT g) {
        TensorT inner = run(op.blocks, tensor::scale(g, op.beta));
        return tensor::elementwise_add(g, inner);
    }

    const BasicWeightStore<T>& w_;
    const Tape<T>& tape_;
    BasicWeightStore<T>& grads_;
};

}  // namespace

template <typename T>
BasicTensor<T> forward(const LayerGraph& graph, const BasicWeightStore<T>& weights, const BasicTensor<T>& x,
                       Tape<T>* tape) {
    const auto& s = x.shape();
    if (s.h < 4 || s.w < 4) throw ShapeError("forward: input spatial extents must be >= 4, got " + s.str());
    if (graph.resampling_only()) return bicubic_upscale(x, graph.scale);
    if (s.c != graph.arch.colors) {
        throw ShapeError("forward: input has " + std::to_string(s.c) + " channels, model expects " +
                         std::to_string(graph.arch.colors));
    }
    Runner<T> runner(weights, tape);
    return runner.run(graph.layers, x);
}

template <typename T>
Gradients<T> backward(const LayerGraph& graph, const BasicWeightStore<T>& weights, const Tape<T>& tape,
                      const BasicTensor<T>& grad_out) {
    if (graph.resampling_only()) throw std::logic_error("backward: resampling-only graph has no parameters");
    Gradients<T> out;
    BackRunner<T> runner(weights, tape, out.params);
    out.input = runner.run(graph.layers, grad_out);
    return out;
}

template <typename T>
BasicTensor<T> bicubic_upscale(const BasicTensor<T>& x, int factor) {
    if (factor < 1) throw ShapeError("bicubic_upscale: factor must be >= 1");
    const auto& s = x.shape();
    const std::int64_t oh = s.h * factor;
    const std::int64_t ow = s.w * factor;
    const auto tx = make_taps(s.w, ow, ResampleKernel::bicubic);
    const auto ty = make_taps(s.h, oh, ResampleKernel::bicubic);
    BasicTensor<T> out(tensor::Shape{s.n, s.c, oh, ow});
    std::vector<double> rows(static_cast<std::size_t>(s.h * ow));
    for (std::int64_t n = 0; n < s.n; ++n) {
        for (std::int64_t c = 0; c < s.c; ++c) {
            for (std::int64_t y = 0; y < s.h; ++y) {
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    const Taps& t = tx[static_cast<std::size_t>(ox)];
                    double acc = 0.0;
                    for (std::size_t i = 0; i < t.index.size(); ++i)
                        acc += t.weight[i] * static_cast<double>(x.at(n, c, y, t.index[i]));
                    rows[static_cast<std::size_t>(y * ow + ox)] = acc;
                }
            }
            for (std::int64_t oy = 0; oy < oh; ++oy) {
                const Taps& t = ty[static_cast<std::size_t>(oy)];
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < t.index.size(); ++i)
                        acc += t.weight[i] * rows[static_cast<std::size_t>(t.index[i] * ow + ox)];
                    out.at(n, c, oy, ox) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

template class Tape<float>;
template class Tape<double>;
template BasicTensor<float> forward(const LayerGraph&, const BasicWeightStore<float>&, const BasicTensor<float>&,
                                    Tape<float>*);
template BasicTensor<double> forward(const LayerGraph&, const BasicWeightStore<double>&,
                                     const BasicTensor<double>&, Tape<double>*);
template Gradients<float> backward(const LayerGraph&, const BasicWeightStore<float>&, const Tape<float>&,
                                   const BasicTensor<float>&);
template Gradients<double> backward(const LayerGraph&, const BasicWeightStore<double>&, const Tape<double>&,
                                    const BasicTensor<double>&);
template BasicTensor<float> bicubic_upscale(const BasicTensor<float>&, int);
template BasicTensor<double> bicubic_upscale(const BasicTensor<double>&, int);

}  // namespace srocr::models
