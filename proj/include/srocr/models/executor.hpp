#pragma once

#include <map>
#include <vector>

#include "srocr/models/graph.hpp"
#include "srocr/models/weights.hpp"

namespace srocr::models {

/// Activations saved during a recorded forward pass, keyed by node.
template <typename T>
class Tape {
public:
    using TensorType = tensor::BasicTensor<T>;

    void save(const LayerNode* node, TensorType value) {
        if (!saved_.contains(node)) order_.push_back(node);
        saved_.insert_or_assign(node, std::move(value));
    }
    const TensorType& input_of(const LayerNode* node) const;

    /// Sign pattern (x < 0) of every piecewise-linear activation input, in
    /// execution order. Two passes with equal patterns lie in the same
    /// linear region of the network.
    std::vector<bool> kink_pattern() const;

private:
    std::map<const LayerNode*, TensorType> saved_;
    std::vector<const LayerNode*> order_;
};

template <typename T>
tensor::BasicTensor<T> forward(const LayerGraph& graph, const BasicWeightStore<T>& weights,
                               const tensor::BasicTensor<T>& x, Tape<T>* tape = nullptr);

template <typename T>
struct Gradients {
    tensor::BasicTensor<T> input;
    BasicWeightStore<T> params;  // one entry per parameter slot
};

/// Reverse pass over a tape produced by forward(graph, weights, x, &tape).
template <typename T>
Gradients<T> backward(const LayerGraph& graph, const BasicWeightStore<T>& weights, const Tape<T>& tape,
                      const tensor::BasicTensor<T>& grad_out);

/// Separable cubic (a = -0.5) upscaling with edge clamping; the forward of
/// the bicubic pseudo-model.
template <typename T>
tensor::BasicTensor<T> bicubic_upscale(const tensor::BasicTensor<T>& x, int factor);

}  // namespace srocr::models
