#include "srocr/models/graph.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace srocr::models {

namespace {

constexpr std::array<std::pair<PresetId, std::string_view>, 6> kPresetNames{{
    {PresetId::srgan_gen, "srgan_gen"},
    {PresetId::srgan_disc, "srgan_disc"},
    {PresetId::esrgan_gen, "esrgan_gen"},
    {PresetId::edsr, "edsr"},
    {PresetId::edsr_base, "edsr_base"},
    {PresetId::bicubic, "bicubic"},
}};

}  // namespace

std::string_view to_string(PresetId id) {
    for (const auto& [k, v] : kPresetNames)
        if (k == id) return v;
    return "?";
}

PresetId parse_preset(std::string_view name) {
    for (const auto& [k, v] : kPresetNames)
        if (v == name) return k;
    throw std::invalid_argument("unknown preset id '" + std::string(name) + "'");
}

bool is_generator(PresetId id) { return id != PresetId::srgan_disc; }

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::conv: return "conv";
        case NodeKind::activation: return "activation";
        case NodeKind::batch_norm: return "batch_norm";
        case NodeKind::pixel_shuffle: return "pixel_shuffle";
        case NodeKind::residual_block: return "residual_block";
        case NodeKind::rrdb: return "rrdb";
        case NodeKind::dense_block: return "dense_block";
        case NodeKind::dense: return "dense";
        case NodeKind::global_skip: return "global_skip";
        case NodeKind::scale_residual: return "scale_residual";
    }
    return "?";
}

ArchPreset ArchPreset::defaults(PresetId id) {
    ArchPreset p;
    p.id = id;
    switch (id) {
        case PresetId::srgan_gen:
            p.n_resblocks = 16;
            p.n_features = 64;
            break;
        case PresetId::srgan_disc:
            p.n_resblocks = 8;
            p.n_features = 64;
            break;
        case PresetId::esrgan_gen:
            p.n_rrdb = 23;
            p.n_features = 64;
            p.growth = 32;
            break;
        case PresetId::edsr:
            p.n_resblocks = 16;
            p.n_features = 64;
            break;
        case PresetId::edsr_base:
            p.n_resblocks = 32;
            p.n_features = 256;
            break;
        case PresetId::bicubic:
            break;
    }
    return p;
}

ArchPreset ArchPreset::miniature(PresetId id) {
    ArchPreset p = defaults(id);
    p.n_resblocks = 2;
    p.n_rrdb = 2;
    p.n_features = 8;
    p.growth = 4;
    p.disc_input = 16;
    return p;
}

void ArchPreset::validate() const {
    if (id == PresetId::bicubic) return;
    if (n_features < 1 || colors < 1) throw std::invalid_argument("preset: feature and color counts must be positive");
    if (residual_scaling <= 0) throw std::invalid_argument("preset: residual scaling must be positive");
    switch (id) {
        case PresetId::esrgan_gen:
            if (n_rrdb < 1 || growth < 1) throw std::invalid_argument("preset: n_rrdb and growth must be positive");
            break;
        case PresetId::srgan_disc:
            if (n_resblocks < 1 || disc_input < 4 || dense_features < 1)
                throw std::invalid_argument("preset: invalid discriminator dimensions");
            break;
        default:
            if (n_resblocks < 1) throw std::invalid_argument("preset: n_resblocks must be positive");
    }
}

NodeKind LayerNode::kind() const {
    return std::visit(
        [](const auto& op) -> NodeKind {
            using Op = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<Op, ConvLayer>) return NodeKind::conv;
            else if constexpr (std::is_same_v<Op, ActivationLayer>) return NodeKind::activation;
            else if constexpr (std::is_same_v<Op, BatchNormLayer>) return NodeKind::batch_norm;
            else if constexpr (std::is_same_v<Op, PixelShuffleLayer>) return NodeKind::pixel_shuffle;
            else if constexpr (std::is_same_v<Op, ResidualBlock>) return NodeKind::residual_block;
            else if constexpr (std::is_same_v<Op, Rrdb>) return NodeKind::rrdb;
            else if constexpr (std::is_same_v<Op, DenseBlock>) return NodeKind::dense_block;
            else if constexpr (std::is_same_v<Op, DenseLayer>) return NodeKind::dense;
            else if constexpr (std::is_same_v<Op, GlobalSkip>) return NodeKind::global_skip;
            else return NodeKind::scale_residual;
        },
        op);
}

const std::vector<LayerNode>* LayerNode::children() const {
    if (const auto* r = std::get_if<ResidualBlock>(&op)) return &r->body;
    if (const auto* g = std::get_if<GlobalSkip>(&op)) return &g->body;
    if (const auto* d = std::get_if<DenseBlock>(&op)) return &d->convs;
    if (const auto* b = std::get_if<Rrdb>(&op)) return &b->blocks;
    return nullptr;
}

namespace {

std::string join(const std::string& prefix, const std::string& leaf) {
    return prefix.empty() ? leaf : prefix + "." + leaf;
}

LayerNode conv(const std::string& name, std::int64_t in, std::int64_t out, std::int64_t stride = 1) {
    return {name, ConvLayer{tensor::conv3x3(in, out, stride)}};
}
LayerNode act(const std::string& name, Activation a) { return {name, ActivationLayer{a}}; }
LayerNode bn(const std::string& name, std::int64_t channels) { return {name, BatchNormLayer{channels, 1e-5}}; }

// One stage per x2 for scales 2 and 4, a single x3 stage for scale 3.
std::vector<int> upsample_stages(int scale) {
    if (scale == 3) return {3};
    if (scale == 2) return {2};
    return {2, 2};
}

void add_upsampler(std::vector<LayerNode>& layers, std::int64_t nf, int scale, const Activation* post) {
    const auto stages = upsample_stages(scale);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string p = "up" + std::to_string(i);
        const std::int64_t r = stages[i];
        layers.push_back(conv(p + ".conv", nf, nf * r * r));
        layers.push_back({p + ".shuffle", PixelShuffleLayer{r}});
        if (post != nullptr) layers.push_back(act(p + ".act", *post));
    }
}

LayerGraph build_srgan_gen(const ArchPreset& a, int scale) {
    LayerGraph g{"srgan_gen_x" + std::to_string(scale), a, scale, {}};
    const std::int64_t nf = a.n_features;
    const Activation prelu = Activation::prelu(0.25);
    g.layers.push_back(conv("head.conv", a.colors, nf));
    g.layers.push_back(act("head.act", prelu));

    GlobalSkip trunk;
    for (int b = 0; b < a.n_resblocks; ++b) {
        const std::string p = "trunk.block" + std::to_string(b);
        ResidualBlock rb;
        rb.body.push_back(conv(p + ".conv1", nf, nf));
        rb.body.push_back(bn(p + ".bn1", nf));
        rb.body.push_back(act(p + ".act", prelu));
        rb.body.push_back(conv(p + ".conv2", nf, nf));
        rb.body.push_back(bn(p + ".bn2", nf));
        trunk.body.push_back({p, std::move(rb)});
    }
    trunk.body.push_back(conv("trunk.conv", nf, nf));
    trunk.body.push_back(bn("trunk.bn", nf));
    g.layers.push_back({"trunk", std::move(trunk)});

    add_upsampler(g.layers, nf, scale, &prelu);
    g.layers.push_back(conv("tail.conv", nf, a.colors));
    return g;
}

LayerGraph build_srgan_disc(const ArchPreset& a, int scale) {
    LayerGraph g{"srgan_disc", a, scale, {}};
    const Activation lrelu = Activation::leaky_relu(0.2);
    std::int64_t nf = a.n_features;
    g.layers.push_back(conv("head.conv", a.colors, nf));
    g.layers.push_back(act("head.act", lrelu));
    std::int64_t channels = nf;
    std::int64_t extent = a.disc_input;
    for (int b = 0; b < a.n_resblocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        const std::int64_t out = nf << (b / 2);
        const std::int64_t stride = (b % 2 == 0) ? 1 : 2;
        g.layers.push_back(conv(p + ".conv", channels, out, stride));
        g.layers.push_back(bn(p + ".bn", out));
        g.layers.push_back(act(p + ".act", lrelu));
        extent = tensor::conv3x3(channels, out, stride).output_extent(extent);
        channels = out;
    }
    const std::int64_t flat = channels * extent * extent;
    g.layers.push_back({"head.dense1", DenseLayer{flat, a.dense_features}});
    g.layers.push_back(act("head.dense1_act", lrelu));
    g.layers.push_back({"head.dense2", DenseLayer{a.dense_features, 1}});
    g.layers.push_back(act("head.sigmoid", Activation::sigmoid()));
    return g;
}

LayerGraph build_esrgan_gen(const ArchPreset& a, int scale) {
    LayerGraph g{"esrgan_gen_x" + std::to_string(scale), a, scale, {}};
    const std::int64_t nf = a.n_features;
    const std::int64_t gc = a.growth;
    const Activation lrelu = Activation::leaky_relu(0.2);
    g.layers.push_back(conv("head.conv", a.colors, nf));

    GlobalSkip trunk;
    for (int r = 0; r < a.n_rrdb; ++r) {
        const std::string rp = "trunk.rrdb" + std::to_string(r);
        Rrdb rrdb{{}, a.residual_scaling};
        for (int d = 0; d < 3; ++d) {
            const std::string dp = rp + ".dense" + std::to_string(d);
            DenseBlock block{{}, lrelu, a.residual_scaling};
            for (int c = 0; c < 5; ++c) {
                const std::int64_t out = (c == 4) ? nf : gc;
                block.convs.push_back(conv(dp + ".conv" + std::to_string(c), nf + c * gc, out));
            }
            rrdb.blocks.push_back({dp, std::move(block)});
        }
        trunk.body.push_back({rp, std::move(rrdb)});
    }
    trunk.body.push_back(conv("trunk.conv", nf, nf));
    g.layers.push_back({"trunk", std::move(trunk)});

    add_upsampler(g.layers, nf, scale, &lrelu);
    g.layers.push_back(conv("tail.conv_hr", nf, nf));
    g.layers.push_back(act("tail.act", lrelu));
    g.layers.push_back(conv("tail.conv_last", nf, a.colors));
    return g;
}

LayerGraph build_edsr(const ArchPreset& a, int scale) {
    LayerGraph g{std::string(to_string(a.id)) + "_x" + std::to_string(scale), a, scale, {}};
    const std::int64_t nf = a.n_features;
    g.layers.push_back(conv("head.conv", a.colors, nf));
    GlobalSkip trunk;
    for (int b = 0; b < a.n_resblocks; ++b) {
        const std::string p = "trunk.block" + std::to_string(b);
        ResidualBlock rb;
        rb.body.push_back(conv(p + ".conv1", nf, nf));
        rb.body.push_back(act(p + ".act", Activation::relu()));
        rb.body.push_back(conv(p + ".conv2", nf, nf));
        rb.body.push_back({p + ".scale", ScaleResidualLayer{a.residual_scaling}});
        trunk.body.push_back({p, std::move(rb)});
    }
    trunk.body.push_back(conv("trunk.conv", nf, nf));
    g.layers.push_back({"trunk", std::move(trunk)});
    add_upsampler(g.layers, nf, scale, nullptr);
    g.layers.push_back(conv("tail.conv", nf, a.colors));
    return g;
}

void collect_slots(const std::vector<LayerNode>& nodes, std::vector<SlotSpec>& out) {
    for (const auto& node : nodes) {
        std::visit(
            [&](const auto& op) {
                using Op = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<Op, ConvLayer>) {
                    out.push_back({join(node.name, "weight"), op.spec.weight_shape(), SlotRole::parameter});
                    if (op.spec.bias)
                        out.push_back(
                            {join(node.name, "bias"), Shape::vector(op.spec.out_channels), SlotRole::parameter});
                } else if constexpr (std::is_same_v<Op, ActivationLayer>) {
                    if (op.act.kind == tensor::ActivationKind::prelu)
                        out.push_back({join(node.name, "slope"), Shape::vector(1), SlotRole::parameter});
                } else if constexpr (std::is_same_v<Op, BatchNormLayer>) {
                    out.push_back({join(node.name, "gamma"), Shape::vector(op.channels), SlotRole::parameter});
                    out.push_back({join(node.name, "beta"), Shape::vector(op.channels), SlotRole::parameter});
                    out.push_back({join(node.name, "running_mean"), Shape::vector(op.channels), SlotRole::buffer});
                    out.push_back({join(node.name, "running_var"), Shape::vector(op.channels), SlotRole::buffer});
                } else if constexpr (std::is_same_v<Op, DenseLayer>) {
                    out.push_back({join(node.name, "weight"), Shape::matrix(op.in_features, op.out_features),
                                   SlotRole::parameter});
                    out.push_back({join(node.name, "bias"), Shape::vector(op.out_features), SlotRole::parameter});
                }
            },
            node.op);
        if (const auto* kids = node.children()) collect_slots(*kids, out);
    }
}

int count_in(const std::vector<LayerNode>& nodes, NodeKind kind) {
    int n = 0;
    for (const auto& node : nodes) {
        if (node.kind() == kind) ++n;
        if (const auto* kids = node.children()) n += count_in(*kids, kind);
    }
    return n;
}

std::string shape_text(const Shape& s) {
    std::ostringstream os;
    if (s.n == 1 && s.c == 1 && s.h == 1) {
        os << s.w;
    } else if (s.n == 1 && s.c == 1) {
        os << s.h << 'x' << s.w;
    } else {
        os << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w;
    }
    return os.str();
}

std::string group_digits(std::int64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

std::string op_text(const LayerNode& node) {
    std::ostringstream os;
    os << to_string(node.kind());
    std::visit(
        [&](const auto& op) {
            using Op = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<Op, ConvLayer>) {
                os << ' ' << op.spec.in_channels << "->" << op.spec.out_channels << " k" << op.spec.kernel_size
                   << " s" << op.spec.stride << " p" << op.spec.padding;
            } else if constexpr (std::is_same_v<Op, ActivationLayer>) {
                os << ' ' << tensor::to_string(op.act.kind);
                if (op.act.kind == tensor::ActivationKind::leaky_relu ||
                    op.act.kind == tensor::ActivationKind::prelu)
                    os << '(' << op.act.slope << ')';
            } else if constexpr (std::is_same_v<Op, BatchNormLayer>) {
                os << ' ' << op.channels << " eps=" << op.eps;
            } else if constexpr (std::is_same_v<Op, PixelShuffleLayer>) {
                os << " r=" << op.factor;
            } else if constexpr (std::is_same_v<Op, DenseLayer>) {
                os << ' ' << op.in_features << "->" << op.out_features;
            } else if constexpr (std::is_same_v<Op, ScaleResidualLayer>) {
                os << " beta=" << op.beta;
            } else if constexpr (std::is_same_v<Op, DenseBlock> || std::is_same_v<Op, Rrdb>) {
                os << " beta=" << op.beta;
            }
        },
        node.op);
    return os.str();
}

void describe_nodes(const std::vector<LayerNode>& nodes, int depth, std::ostream& os) {
    for (const auto& node : nodes) {
        std::vector<SlotSpec> slots;
        collect_slots({node}, slots);
        std::ostringstream line;
        line << std::string(static_cast<std::size_t>(2 + 2 * depth), ' ') << std::left << std::setw(34) << node.name
             << ' ' << op_text(node);
        if (!node.children()) {
            for (const auto& s : slots) {
                const auto dot = s.name.rfind('.');
                line << "  " << s.name.substr(dot + 1) << '(' << shape_text(s.shape) << ')';
            }
        }
        os << line.str() << '\n';
        if (const auto* kids = node.children()) describe_nodes(*kids, depth + 1, os);
    }
}

}  // namespace

LayerGraph build_model(const ArchPreset& arch, int scale) {
    if (scale < 2 || scale > 4) {
        throw std::invalid_argument("unsupported scale " + std::to_string(scale) + " (expected 2, 3 or 4)");
    }
    arch.validate();
    LayerGraph g;
    switch (arch.id) {
        case PresetId::srgan_gen: g = build_srgan_gen(arch, scale); break;
        case PresetId::srgan_disc: g = build_srgan_disc(arch, scale); break;
        case PresetId::esrgan_gen: g = build_esrgan_gen(arch, scale); break;
        case PresetId::edsr:
        case PresetId::edsr_base: g = build_edsr(arch, scale); break;
        case PresetId::bicubic: g = LayerGraph{"bicubic_x" + std::to_string(scale), arch, scale, {}}; break;
    }
    std::set<std::string> seen;
    for (const auto& s : weight_slots(g)) {
        if (!seen.insert(s.name).second) throw std::logic_error("duplicate weight slot " + s.name);
    }
    return g;
}

std::vector<SlotSpec> weight_slots(const LayerGraph& graph) {
    std::vector<SlotSpec> out;
    collect_slots(graph.layers, out);
    return out;
}

std::int64_t param_count(const LayerGraph& graph) {
    std::int64_t total = 0;
    for (const auto& s : weight_slots(graph))
        if (s.role == SlotRole::parameter) total += static_cast<std::int64_t>(s.shape.size());
    return total;
}

int count_nodes(const LayerGraph& graph, NodeKind kind) { return count_in(graph.layers, kind); }

LayerGraph strip_output_sigmoid(const LayerGraph& graph) {
    LayerGraph out = graph;
    if (!out.layers.empty()) {
        const auto* a = std::get_if<ActivationLayer>(&out.layers.back().op);
        if (a != nullptr && a->act.kind == tensor::ActivationKind::sigmoid) out.layers.pop_back();
    }
    return out;
}

std::string describe(const LayerGraph& graph) {
    std::ostringstream os;
    const ArchPreset& a = graph.arch;
    os << "model " << graph.name << " (preset " << to_string(a.id) << ", scale x" << graph.scale << ")\n";
    switch (a.id) {
        case PresetId::bicubic:
            os << "  resampling only: cubic kernel a=-0.5\n";
            break;
        case PresetId::srgan_disc:
            os << "  features: " << a.n_features << "\n";
            os << "  conv blocks: " << count_nodes(graph, NodeKind::batch_norm) << "\n";
            os << "  input: " << a.disc_input << "x" << a.disc_input << "\n";
            os << "  dense features: " << a.dense_features << "\n";
            break;
        case PresetId::esrgan_gen:
            os << "  features: " << a.n_features << "\n";
            os << "  rrdb blocks: " << count_nodes(graph, NodeKind::rrdb) << "\n";
            os << "  growth: " << a.growth << "\n";
            os << "  residual scaling: " << a.residual_scaling << "\n";
            break;
        case PresetId::srgan_gen:
            os << "  features: " << a.n_features << "\n";
            os << "  residual blocks: " << count_nodes(graph, NodeKind::residual_block) << "\n";
            break;
        case PresetId::edsr:
        case PresetId::edsr_base:
            os << "  features: " << a.n_features << "\n";
            os << "  residual blocks: " << count_nodes(graph, NodeKind::residual_block) << "\n";
            os << "  residual scaling: " << a.residual_scaling << "\n";
            break;
    }
    os << "  batch_norm nodes: " << count_nodes(graph, NodeKind::batch_norm) << "\n";
    os << "  parameters: " << group_digits(param_count(graph)) << "\n";
    if (!graph.layers.empty()) {
        os << "layers:\n";
        describe_nodes(graph.layers, 0, os);
    }
    return os.str();
}

}  // namespace srocr::models
