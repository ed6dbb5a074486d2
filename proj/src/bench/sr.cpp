#include "srocr/bench/bench.hpp"
#include "srocr/errors.hpp"
#include "srocr/models/executor.hpp"

namespace srocr::bench {

namespace {

models::ArchPreset arch_for(const ModelSpec& spec) {
    return spec.miniature ? models::ArchPreset::miniature(spec.preset) : models::ArchPreset::defaults(spec.preset);
}

}  // namespace

SrModel instantiate(const ModelSpec& spec, int factor) {
    SrModel m;
    if (spec.preset == models::PresetId::bicubic) {
        m.graph = models::build_model(arch_for(spec), spec.scale.value_or(factor));
        return m;
    }
    if (spec.weights.rfind("untrained", 0) == 0) {
        const auto colon = spec.weights.find(':');
        const std::uint64_t seed = colon == std::string::npos ? 0 : std::stoull(spec.weights.substr(colon + 1));
        m.graph = models::build_model(arch_for(spec), spec.scale.value_or(factor));
        m.weights = models::init_weights(m.graph, seed);
        return m;
    }
    const models::WeightFileInfo info = models::read_weight_info(spec.weights);
    if (info.preset != models::to_string(spec.preset))
        throw ConfigError("models." + spec.id, spec.weights + " holds " + info.preset + " weights, not " +
                                                   std::string(models::to_string(spec.preset)));
    if (spec.scale && *spec.scale != info.scale)
        throw ConfigError("models." + spec.id + ".scale",
                          "weights are for x" + std::to_string(info.scale) + ", config asks for x" +
                              std::to_string(*spec.scale));
    m.graph = models::build_model(arch_for(spec), info.scale);
    m.weights = models::load_weights(m.graph, spec.weights);
    return m;
}

tensor::Tensor image_to_tensor(const Image& img, int colors) {
    img.validate();
    if (colors != 1 && colors != 3) throw ShapeError("image_to_tensor: colors must be 1 or 3");
    const Image src = colors == 1 ? degrade::to_gray(img) : degrade::to_rgb(img);
    tensor::Tensor t(tensor::Shape{1, colors, src.height, src.width});
    auto d = t.data();
    const std::size_t plane = static_cast<std::size_t>(src.width) * static_cast<std::size_t>(src.height);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < colors; ++c)
            d[static_cast<std::size_t>(c) * plane + i] = static_cast<float>(src.data[i * static_cast<std::size_t>(colors) + static_cast<std::size_t>(c)] / 255.0);
    return t;
}

Image tensor_to_gray(const tensor::Tensor& t) {
    const auto& s = t.shape();
    if (s.n != 1 || (s.c != 1 && s.c != 3)) throw ShapeError("tensor_to_gray: expected (1, 1|3, h, w), got " + s.str());
    Image out(static_cast<int>(s.w), static_cast<int>(s.h), 1);
    const std::size_t plane = static_cast<std::size_t>(s.h * s.w);
    const auto d = t.data();
    for (std::size_t i = 0; i < plane; ++i) {
        const double v = s.c == 1 ? d[i] : 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i];
        out.data[i] = degrade::to_u8(v * 255.0);
    }
    return out;
}

Image super_resolve(const SrModel& model, const Image& lr, int width, int height, std::optional<int> dpi) {
    const int f = model.graph.scale;
    Image up;
    if (model.graph.resampling_only()) {
        up = degrade::resize(degrade::to_gray(lr), lr.width * f, lr.height * f, ResampleKernel::bicubic);
    } else {
        up = tensor_to_gray(models::forward(model.graph, model.weights, image_to_tensor(lr, model.graph.arch.colors)));
    }
    if (up.width != width || up.height != height) up = degrade::resize(up, width, height, ResampleKernel::bicubic);
    up.dpi = dpi;
    return up;
}

TrainingPair crop_pair(const Image& page, int x, int y, int hr_extent, int factor, int colors) {
    if (factor < 1 || hr_extent < factor || hr_extent % factor != 0)
        throw ShapeError("crop_pair: extent " + std::to_string(hr_extent) + " is not a multiple of factor " +
                         std::to_string(factor));
    if (x < 0 || y < 0 || x + hr_extent > page.width || y + hr_extent > page.height)
        throw ShapeError("crop_pair: crop leaves the " + std::to_string(page.width) + "x" +
                         std::to_string(page.height) + " page");
    const Image gray = degrade::to_gray(page);
    Image crop(hr_extent, hr_extent, 1);
    for (int r = 0; r < hr_extent; ++r)
        for (int c = 0; c < hr_extent; ++c)
            crop.data[static_cast<std::size_t>(r * hr_extent + c)] =
                gray.data[static_cast<std::size_t>((y + r) * gray.width + x + c)];
    const int lr_extent = hr_extent / factor;
    const Image low = degrade::resize(crop, lr_extent, lr_extent, ResampleKernel::bicubic);
    return {image_to_tensor(low, colors), image_to_tensor(crop, colors)};
}

}  // namespace srocr::bench
