#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "srocr/models/graph.hpp"
#include "srocr/tensor.hpp"

namespace srocr::models {

/// Raised when a graph needs a slot the store does not hold.
class MissingWeightError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

template <typename T>
class BasicWeightStore {
public:
    using TensorType = tensor::BasicTensor<T>;

    const TensorType& get(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw MissingWeightError("missing weight slot '" + name + "'");
        return it->second;
    }
    TensorType& get(const std::string& name) {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw MissingWeightError("missing weight slot '" + name + "'");
        return it->second;
    }
    bool contains(const std::string& name) const { return tensors_.contains(name); }
    void set(std::string name, TensorType value) { tensors_.insert_or_assign(std::move(name), std::move(value)); }
    std::size_t size() const { return tensors_.size(); }

    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }
    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }

    template <typename U>
    BasicWeightStore<U> cast() const {
        BasicWeightStore<U> out;
        for (const auto& [name, t] : tensors_) out.set(name, t.template cast<U>());
        return out;
    }

    friend bool operator==(const BasicWeightStore&, const BasicWeightStore&) = default;

private:
    std::map<std::string, TensorType> tensors_;
};

using WeightStore = BasicWeightStore<float>;

/// Kaiming fan-in normal initialization (scaled by 0.1 inside RRDBs),
/// zero biases, unit batch-norm scale, PReLU slope 0.25. Deterministic in seed.
WeightStore init_weights(const LayerGraph& graph, std::uint64_t seed);

/// Checks that every slot of `graph` is present with the declared shape.
/// Throws MissingWeightError or ShapeError.
template <typename T>
void validate_weights(const LayerGraph& graph, const BasicWeightStore<T>& weights);

/// Weight container: "SRWT", u32 version (1), u32 header length, UTF-8 JSON
/// header, then little-endian float32 payloads in header order.
void save_weights(const LayerGraph& graph, const WeightStore& weights, const std::filesystem::path& path);

/// Throws FormatError on bad magic/version/truncation and ShapeError when a
/// slot disagrees with the graph.
WeightStore load_weights(const LayerGraph& graph, const std::filesystem::path& path);

/// Header metadata of a weight file without validating against a graph.
struct WeightFileInfo {
    std::string graph_name;
    std::string preset;
    int scale = 0;
    std::map<std::string, tensor::Shape> slots;
};
WeightFileInfo read_weight_info(const std::filesystem::path& path);

}  // namespace srocr::models
