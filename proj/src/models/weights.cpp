#include "srocr/models/weights.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "srocr/random.hpp"

namespace srocr::models {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;

std::string slot_name(const std::string& node, const char* leaf) { return node + "." + leaf; }

tensor::Tensor kaiming(Rng& rng, Shape shape, std::int64_t fan_in, double gain) {
    tensor::Tensor t(shape);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in)) * gain;
    for (auto& v : t.data()) v = static_cast<float>(rng.normal() * sd);
    return t;
}

void init_nodes(const std::vector<LayerNode>& nodes, bool in_rrdb, Rng& rng, WeightStore& store) {
    for (const auto& node : nodes) {
        std::visit(
            [&](const auto& op) {
                using Op = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<Op, ConvLayer>) {
                    const auto& s = op.spec;
                    const double gain = in_rrdb ? 0.1 : 1.0;
                    store.set(slot_name(node.name, "weight"),
                              kaiming(rng, s.weight_shape(), s.in_channels * s.kernel_size * s.kernel_size, gain));
                    if (s.bias) store.set(slot_name(node.name, "bias"), tensor::Tensor(Shape::vector(s.out_channels)));
                } else if constexpr (std::is_same_v<Op, ActivationLayer>) {
                    if (op.act.kind == tensor::ActivationKind::prelu)
                        store.set(slot_name(node.name, "slope"),
                                  tensor::Tensor(Shape::vector(1), static_cast<float>(op.act.slope)));
                } else if constexpr (std::is_same_v<Op, BatchNormLayer>) {
                    const Shape v = Shape::vector(op.channels);
                    store.set(slot_name(node.name, "gamma"), tensor::Tensor(v, 1.0f));
                    store.set(slot_name(node.name, "beta"), tensor::Tensor(v, 0.0f));
                    store.set(slot_name(node.name, "running_mean"), tensor::Tensor(v, 0.0f));
                    store.set(slot_name(node.name, "running_var"), tensor::Tensor(v, 1.0f));
                } else if constexpr (std::is_same_v<Op, DenseLayer>) {
                    store.set(slot_name(node.name, "weight"),
                              kaiming(rng, Shape::matrix(op.in_features, op.out_features), op.in_features, 1.0));
                    store.set(slot_name(node.name, "bias"), tensor::Tensor(Shape::vector(op.out_features)));
                }
            },
            node.op);
        if (const auto* kids = node.children()) init_nodes(*kids, in_rrdb || node.kind() == NodeKind::rrdb, rng, store);
    }
}

void put_u32(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct ParsedFile {
    WeightFileInfo info;
    std::map<std::string, std::uint64_t> offsets;
    std::vector<unsigned char> payload;
};

Shape shape_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw FormatError("weight header: slot shape must have 4 extents");
    return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>(), j[3].get<std::int64_t>()};
}

ParsedFile parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open weight file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12) throw FormatError("weight file truncated: missing preamble");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                    [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
        throw FormatError("not a weight container (bad magic)");
    }
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != kVersion) throw FormatError("unsupported weight container version " + std::to_string(version));
    const std::uint32_t header_len = get_u32(bytes.data() + 8);
    if (bytes.size() < 12ull + header_len) throw FormatError("weight file truncated inside header");

    ParsedFile out;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
        out.info.graph_name = header.at("graph").get<std::string>();
        out.info.preset = header.at("preset").get<std::string>();
        out.info.scale = header.at("scale").get<int>();
        for (const auto& slot : header.at("slots")) {
            const auto name = slot.at("name").get<std::string>();
            out.info.slots[name] = shape_from_json(slot.at("shape"));
            out.offsets[name] = slot.at("offset").get<std::uint64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed weight header: ") + e.what());
    }
    out.payload.assign(bytes.begin() + 12 + header_len, bytes.end());
    for (const auto& [name, shape] : out.info.slots) {
        const std::uint64_t end = out.offsets[name] + shape.size() * 4;
        if (end > out.payload.size()) throw FormatError("weight file truncated: slot '" + name + "' incomplete");
    }
    return out;
}

}  // namespace

WeightStore init_weights(const LayerGraph& graph, std::uint64_t seed) {
    Rng rng(seed);
    WeightStore store;
    init_nodes(graph.layers, false, rng, store);
    return store;
}

template <typename T>
void validate_weights(const LayerGraph& graph, const BasicWeightStore<T>& weights) {
    for (const auto& slot : weight_slots(graph)) {
        const auto& t = weights.get(slot.name);
        if (!(t.shape() == slot.shape)) {
            throw ShapeError("weight slot '" + slot.name + "' has shape " + t.shape().str() + ", graph declares " +
                             slot.shape.str());
        }
    }
}

template void validate_weights(const LayerGraph&, const BasicWeightStore<float>&);
template void validate_weights(const LayerGraph&, const BasicWeightStore<double>&);

void save_weights(const LayerGraph& graph, const WeightStore& weights, const std::filesystem::path& path) {
    validate_weights(graph, weights);
    nlohmann::json header;
    header["graph"] = graph.name;
    header["preset"] = std::string(to_string(graph.arch.id));
    header["scale"] = graph.scale;
    header["slots"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    const auto slots = weight_slots(graph);
    for (const auto& s : slots) {
        header["slots"].push_back(
            {{"name", s.name}, {"shape", {s.shape.n, s.shape.c, s.shape.h, s.shape.w}}, {"offset", offset}});
        offset += s.shape.size() * 4;
    }
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write weight file " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& s : slots) {
        for (const float v : weights.get(s.name).data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw FormatError("failed writing weight file " + path.string());
}

WeightStore load_weights(const LayerGraph& graph, const std::filesystem::path& path) {
    ParsedFile file = parse_file(path);
    WeightStore store;
    for (const auto& slot : weight_slots(graph)) {
        auto it = file.info.slots.find(slot.name);
        if (it == file.info.slots.end()) {
            throw MissingWeightError("weight file lacks slot '" + slot.name + "'");
        }
        if (!(it->second == slot.shape)) {
            throw ShapeError("weight file slot '" + slot.name + "' has shape " + it->second.str() +
                             ", graph declares " + slot.shape.str());
        }
        tensor::Tensor t(slot.shape);
        const unsigned char* p = file.payload.data() + file.offsets[slot.name];
        for (auto& v : t.data()) {
            v = std::bit_cast<float>(get_u32(p));
            p += 4;
        }
        store.set(slot.name, std::move(t));
    }
    return store;
}

WeightFileInfo read_weight_info(const std::filesystem::path& path) { return parse_file(path).info; }

}  // namespace srocr::models
