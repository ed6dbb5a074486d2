#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "srocr/tensor_ops.hpp"

namespace srocr::models {

using tensor::Activation;
using tensor::ConvSpec;
using tensor::Shape;

enum class PresetId { srgan_gen, srgan_disc, esrgan_gen, edsr, edsr_base, bicubic };

std::string_view to_string(PresetId id);
/// Accepts the identifiers printed by to_string; throws std::invalid_argument otherwise.
PresetId parse_preset(std::string_view name);
bool is_generator(PresetId id);

/// Architecture hyperparameters. Field meaning depends on the preset:
/// n_resblocks counts residual blocks for srgan_gen/edsr/edsr_base and
/// conv blocks for srgan_disc; n_rrdb is used by esrgan_gen only.
struct ArchPreset {
    PresetId id = PresetId::edsr;
    int n_resblocks = 16;
    int n_features = 64;
    int n_rrdb = 23;
    int growth = 32;
    double residual_scaling = 0.1;
    int colors = 3;
    int disc_input = 96;
    int dense_features = 1024;

    static ArchPreset defaults(PresetId id);
    /// Desk-scale variant: 2 blocks, 8 features, 16x16 discriminator input.
    static ArchPreset miniature(PresetId id);

    void validate() const;
};

enum class NodeKind {
    conv,
    activation,
    batch_norm,
    pixel_shuffle,
    residual_block,
    rrdb,
    dense_block,
    dense,
    global_skip,
    scale_residual
};

std::string_view to_string(NodeKind kind);

struct LayerNode;

struct ConvLayer {
    ConvSpec spec;
};

/// PReLU carries a learnable shared slope slot; the other kinds are fixed.
struct ActivationLayer {
    Activation act;
};

struct BatchNormLayer {
    std::int64_t channels = 0;
    double eps = 1e-5;
};

struct PixelShuffleLayer {
    std::int64_t factor = 2;
};

/// Flattens its input; weights are (in, out).
struct DenseLayer {
    std::int64_t in_features = 0;
    std::int64_t out_features = 0;
};

struct ScaleResidualLayer {
    double beta = 0.1;
};

/// out = x + body(x)
struct ResidualBlock {
    std::vector<LayerNode> body;
};

/// out = x + body(x), around a whole trunk.
struct GlobalSkip {
    std::vector<LayerNode> body;
};

/// Five densely connected convs; conv i sees concat(x, out_0..out_{i-1}).
/// The first four are followed by `act`. out = x + beta * conv_4.
struct DenseBlock {
    std::vector<LayerNode> convs;
    Activation act;
    double beta = 0.1;
};

/// Residual-in-residual: out = x + beta * blocks(x).
struct Rrdb {
    std::vector<LayerNode> blocks;
    double beta = 0.1;
};

using LayerOp = std::variant<ConvLayer, ActivationLayer, BatchNormLayer, PixelShuffleLayer, ResidualBlock, Rrdb,
                             DenseBlock, DenseLayer, GlobalSkip, ScaleResidualLayer>;

struct LayerNode {
    std::string name;
    LayerOp op;

    NodeKind kind() const;
    /// Nested nodes for composite kinds, empty otherwise.
    const std::vector<LayerNode>* children() const;
};

struct LayerGraph {
    std::string name;
    ArchPreset arch;
    int scale = 2;
    std::vector<LayerNode> layers;

    /// Bicubic pseudo-model: no layers, forward is pure resampling.
    bool resampling_only() const { return arch.id == PresetId::bicubic; }
};

enum class SlotRole { parameter, buffer };

struct SlotSpec {
    std::string name;
    Shape shape;
    SlotRole role = SlotRole::parameter;
};

/// Builds the layer graph for `arch` at upsampling `scale` (2, 3 or 4).
/// Throws std::invalid_argument for an unsupported scale or invalid preset.
LayerGraph build_model(const ArchPreset& arch, int scale);
inline LayerGraph build_model(PresetId id, int scale) { return build_model(ArchPreset::defaults(id), scale); }

/// Every weight slot in traversal order. Names are unique within a graph.
std::vector<SlotSpec> weight_slots(const LayerGraph& graph);

/// Trainable element count (buffers such as batch-norm running statistics
/// are excluded).
std::int64_t param_count(const LayerGraph& graph);

/// Node count of `kind`, including nested nodes.
int count_nodes(const LayerGraph& graph, NodeKind kind);

/// Copy of a discriminator graph with a trailing sigmoid removed, yielding
/// raw logits. Slot names are unchanged.
LayerGraph strip_output_sigmoid(const LayerGraph& graph);

/// Deterministic multi-line summary: configuration, layer list with slot
/// shapes, and parameter total.
std::string describe(const LayerGraph& graph);

}  // namespace srocr::models
