#include "srocr/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "srocr/errors.hpp"
#include "srocr/random.hpp"

namespace srocr::training {

using models::BasicWeightStore;
using models::Gradients;
using models::Tape;
using tensor::BasicTensor;
using tensor::Shape;
using tensor::TensorD;

std::string_view to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::l1_only: return "l1_only";
        case TrainMode::gan: return "gan";
        case TrainMode::ragan: return "ragan";
    }
    return "?";
}

TrainMode parse_mode(std::string_view name) {
    if (name == "l1_only") return TrainMode::l1_only;
    if (name == "gan") return TrainMode::gan;
    if (name == "ragan") return TrainMode::ragan;
    throw std::invalid_argument("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (steps_max < 0) throw ConfigError("steps_max", "must be >= 0");
    if (batch < 1) throw ConfigError("batch", "must be >= 1");
    if (!std::isfinite(learning_rate) || learning_rate < 0) throw ConfigError("learning_rate", "must be finite and >= 0");
    if (convergence_window < 2) throw ConfigError("convergence_window", "must be >= 2");
    if (std::isnan(convergence_eps) || convergence_eps < 0) throw ConfigError("convergence_eps", "must be >= 0");
    if (!std::isfinite(adversarial_weight) || adversarial_weight < 0)
        throw ConfigError("adversarial_weight", "must be finite and >= 0");
}

// ---------------------------------------------------------------------------
// Losses

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + e^x) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double mean(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void require_nonempty(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.empty() || b.empty()) throw std::invalid_argument(std::string(op) + ": empty score list");
}

void require_finite(std::span<const double> v, const char* op) {
    for (const double x : v)
        if (!std::isfinite(x)) throw DomainError(std::string(op) + ": non-finite logit");
}

}  // namespace

template <typename T>
double l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
    if (!(pred.shape() == target.shape()))
        throw ShapeError("l1_loss: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
    if (pred.size() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        s += std::fabs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
    return s / static_cast<double>(pred.size());
}

template <typename T>
BasicTensor<T> l1_loss_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
    if (!(pred.shape() == target.shape()))
        throw ShapeError("l1_loss_grad: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
    BasicTensor<T> g(pred.shape());
    const T inv = static_cast<T>(1.0 / static_cast<double>(std::max<std::size_t>(pred.size(), 1)));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] > target[i]) g[i] = inv;
        else if (pred[i] < target[i]) g[i] = -inv;
    }
    return g;
}

template double l1_loss(const BasicTensor<float>&, const BasicTensor<float>&);
template double l1_loss(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> l1_loss_grad(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> l1_loss_grad(const BasicTensor<double>&, const BasicTensor<double>&);

AdversarialLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
    require_nonempty(d_real, d_fake, "gan_losses");
    static constexpr double lo = 1e-7;
    static constexpr double hi = 1.0 - 1e-7;
    auto check = [](double p) {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("gan_losses: score outside (0, 1)");
        return std::clamp(p, lo, hi);
    };
    double real_term = 0.0, fake_term = 0.0, gen_term = 0.0;
    for (const double p : d_real) real_term += std::log(check(p));
    for (const double p : d_fake) {
        const double q = check(p);
        fake_term += std::log(1.0 - q);
        gen_term += std::log(q);
    }
    const double n = static_cast<double>(d_real.size());
    const double m = static_cast<double>(d_fake.size());
    return {-gen_term / m, -real_term / n - fake_term / m};
}

AdversarialGrads gan_losses_from_logits(std::span<const double> c_real, std::span<const double> c_fake) {
    require_nonempty(c_real, c_fake, "gan_losses_from_logits");
    require_finite(c_real, "gan_losses_from_logits");
    require_finite(c_fake, "gan_losses_from_logits");
    const double n = static_cast<double>(c_real.size());
    const double m = static_cast<double>(c_fake.size());
    AdversarialGrads out;
    for (const double z : c_real) {
        out.loss.d_loss += softplus(-z) / n;
        out.d_wrt_real.push_back((sigmoid(z) - 1.0) / n);
    }
    for (const double z : c_fake) {
        out.loss.d_loss += softplus(z) / m;
        out.loss.g_loss += softplus(-z) / m;
        out.d_wrt_fake.push_back(sigmoid(z) / m);
        out.g_wrt_fake.push_back((sigmoid(z) - 1.0) / m);
    }
    return out;
}

RadGrads rad_losses_with_grads(std::span<const double> c_real, std::span<const double> c_fake) {
    require_nonempty(c_real, c_fake, "rad_losses");
    require_finite(c_real, "rad_losses");
    require_finite(c_fake, "rad_losses");
    const double n = static_cast<double>(c_real.size());
    const double m = static_cast<double>(c_fake.size());
    const double mean_real = mean(c_real);
    const double mean_fake = mean(c_fake);

    std::vector<double> su, sv;  // sigmoid of the relative logits
    RadGrads out;
    for (const double r : c_real) {
        const double u = r - mean_fake;
        su.push_back(sigmoid(u));
        out.loss.d_loss += softplus(-u) / n;
        out.loss.g_loss += softplus(u) / n;
    }
    for (const double f : c_fake) {
        const double v = f - mean_real;
        sv.push_back(sigmoid(v));
        out.loss.d_loss += softplus(v) / m;
        out.loss.g_loss += softplus(-v) / m;
    }
    double sum_su = 0.0, sum_one_minus_su = 0.0, sum_sv = 0.0, sum_one_minus_sv = 0.0;
    for (const double s : su) {
        sum_su += s;
        sum_one_minus_su += 1.0 - s;
    }
    for (const double s : sv) {
        sum_sv += s;
        sum_one_minus_sv += 1.0 - s;
    }
    for (const double s : su) {
        out.d_wrt_real.push_back(-(1.0 - s) / n - sum_sv / (n * m));
        out.g_wrt_real.push_back(s / n + sum_one_minus_sv / (n * m));
    }
    for (const double s : sv) {
        out.d_wrt_fake.push_back(sum_one_minus_su / (n * m) + s / m);
        out.g_wrt_fake.push_back(-sum_su / (n * m) - (1.0 - s) / m);
    }
    return out;
}

AdversarialLosses rad_losses(std::span<const double> c_real, std::span<const double> c_fake) {
    return rad_losses_with_grads(c_real, c_fake).loss;
}

// ---------------------------------------------------------------------------
// Training

namespace {

Tensor stack(const Dataset& dataset, const std::vector<std::size_t>& idx, bool high) {
    const Tensor& first = high ? dataset[idx[0]].hr : dataset[idx[0]].lr;
    Shape s = first.shape();
    std::vector<float> data;
    data.reserve(s.size() * idx.size());
    for (const std::size_t i : idx) {
        const Tensor& t = high ? dataset[i].hr : dataset[i].lr;
        if (t.shape().n != 1 || t.shape().c != s.c || t.shape().h != s.h || t.shape().w != s.w)
            throw ShapeError("training samples must share one (1, C, h, w) shape");
        data.insert(data.end(), t.values().begin(), t.values().end());
    }
    s.n = static_cast<std::int64_t>(idx.size());
    return Tensor(s, std::move(data));
}

std::vector<double> to_doubles(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor column(const std::vector<double>& v) {
    Tensor t(Shape{static_cast<std::int64_t>(v.size()), 1, 1, 1});
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
    return t;
}

void sgd(WeightStore& weights, const WeightStore& grads, double lr) {
    const float rate = static_cast<float>(lr);
    for (const auto& [name, g] : grads) {
        Tensor& w = weights.get(name);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= rate * g[i];
    }
}

void add_into(WeightStore& total, const WeightStore& part) {
    for (const auto& [name, g] : part) {
        if (total.contains(name)) tensor::accumulate(total.get(name), g);
        else total.set(name, g);
    }
}

void require_finite_loss(double v, const char* what, int step) {
    if (!std::isfinite(v))
        throw DomainError("training step " + std::to_string(step) + ": non-finite " + what);
}

}  // namespace

std::vector<std::size_t> batch_indices(int step, int batch, std::size_t dataset_size) {
    std::vector<std::size_t> idx;
    for (int j = 0; j < batch; ++j)
        idx.push_back((static_cast<std::size_t>(step) * static_cast<std::size_t>(batch) + static_cast<std::size_t>(j)) %
                      dataset_size);
    return idx;
}

std::pair<TrainState, LossReport> train_step(const TrainGraphs& graphs, TrainState state, const Dataset& dataset,
                                             const TrainConfig& config, int step) {
    config.validate();
    if (graphs.generator == nullptr) throw std::invalid_argument("train_step: generator graph required");
    if (graphs.generator->resampling_only()) throw std::invalid_argument("train_step: bicubic has nothing to train");
    const bool adversarial = config.mode != TrainMode::l1_only;
    if (adversarial && graphs.discriminator == nullptr)
        throw std::invalid_argument("train_step: mode " + std::string(to_string(config.mode)) +
                                    " needs a discriminator graph");
    if (dataset.empty()) throw std::invalid_argument("train_step: empty dataset");

    const auto idx = batch_indices(step, config.batch, dataset.size());
    const Tensor lr_batch = stack(dataset, idx, false);
    const Tensor hr_batch = stack(dataset, idx, true);
    const LayerGraph& gen = *graphs.generator;

    Tape<float> gen_tape;
    const Tensor fake = models::forward(gen, state.generator, lr_batch, &gen_tape);
    LossReport report;
    report.step = step;
    report.l1 = l1_loss(fake, hr_batch);
    require_finite_loss(report.l1, "l1 loss", step);
    Tensor grad_fake = l1_loss_grad(fake, hr_batch);

    if (!adversarial) {
        report.g_loss = report.l1;
    } else {
        // Raw logits; the losses apply the sigmoid themselves.
        const LayerGraph disc = models::strip_output_sigmoid(*graphs.discriminator);
        const bool ra = config.mode == TrainMode::ragan;

        // Discriminator update.
        {
            Tape<float> real_tape, fake_tape;
            const auto c_real = to_doubles(models::forward(disc, state.discriminator, hr_batch, &real_tape));
            const auto c_fake = to_doubles(models::forward(disc, state.discriminator, fake, &fake_tape));
            std::vector<double> g_real, g_fake;
            if (ra) {
                auto r = rad_losses_with_grads(c_real, c_fake);
                report.d_loss = r.loss.d_loss;
                g_real = std::move(r.d_wrt_real);
                g_fake = std::move(r.d_wrt_fake);
            } else {
                auto r = gan_losses_from_logits(c_real, c_fake);
                report.d_loss = r.loss.d_loss;
                g_real = std::move(r.d_wrt_real);
                g_fake = std::move(r.d_wrt_fake);
            }
            require_finite_loss(report.d_loss, "discriminator loss", step);
            auto grads = models::backward(disc, state.discriminator, real_tape, column(g_real)).params;
            add_into(grads, models::backward(disc, state.discriminator, fake_tape, column(g_fake)).params);
            sgd(state.discriminator, grads, config.learning_rate);
        }

        // Generator adversarial gradient through the updated discriminator.
        Tape<float> fake_tape;
        const auto c_fake = to_doubles(models::forward(disc, state.discriminator, fake, &fake_tape));
        std::vector<double> g_fake;
        if (ra) {
            const auto c_real = to_doubles(models::forward(disc, state.discriminator, hr_batch));
            auto r = rad_losses_with_grads(c_real, c_fake);
            report.g_loss = r.loss.g_loss;
            g_fake = std::move(r.g_wrt_fake);
        } else {
            // Only the generator terms are used here.
            auto r = gan_losses_from_logits(c_fake, c_fake);
            report.g_loss = r.loss.g_loss;
            g_fake = std::move(r.g_wrt_fake);
        }
        require_finite_loss(report.g_loss, "generator loss", step);
        const Tensor adv = models::backward(disc, state.discriminator, fake_tape, column(g_fake)).input;
        const float w = static_cast<float>(config.adversarial_weight);
        for (std::size_t i = 0; i < grad_fake.size(); ++i) grad_fake[i] += w * adv[i];
    }

    const auto gen_grads = models::backward(gen, state.generator, gen_tape, grad_fake).params;
    sgd(state.generator, gen_grads, config.learning_rate);
    return {std::move(state), report};
}

bool has_converged(std::span<const LossReport> history, int window, double eps) {
    if (window < 1 || history.size() < static_cast<std::size_t>(window)) return false;
    const auto tail = history.subspan(history.size() - static_cast<std::size_t>(window));
    auto range = [&](auto field) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& r : tail) {
            lo = std::min(lo, r.*field);
            hi = std::max(hi, r.*field);
        }
        return hi - lo;
    };
    return range(&LossReport::g_loss) < eps && range(&LossReport::d_loss) < eps;
}

TrainResult train_loop(const TrainGraphs& graphs, TrainState initial, const Dataset& dataset,
                       const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train_loop: empty dataset");
    TrainResult result;
    result.state = std::move(initial);
    for (int step = 0; step < config.steps_max; ++step) {
        auto [next, report] = train_step(graphs, std::move(result.state), dataset, config, step);
        result.state = std::move(next);
        result.history.push_back(report);
        if (has_converged(result.history, config.convergence_window, config.convergence_eps)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

TrainState initial_state(const TrainGraphs& graphs, std::uint64_t seed) {
    TrainState s;
    if (graphs.generator != nullptr) s.generator = models::init_weights(*graphs.generator, seed);
    if (graphs.discriminator != nullptr) s.discriminator = models::init_weights(*graphs.discriminator, seed + 1);
    return s;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossReport> history) {
    std::ostringstream os;
    os << std::setprecision(17) << "step,g_loss,d_loss,l1\n";
    for (const auto& r : history) os << r.step << ',' << r.g_loss << ',' << r.d_loss << ',' << r.l1 << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << os.str();
}

// ---------------------------------------------------------------------------
// Gradient verification

namespace {

struct Evaluation {
    double loss = 0.0;
    std::vector<bool> pattern;
    TensorD grad_out;  // d loss / d output
};

Evaluation evaluate(const LayerGraph& graph, const BasicWeightStore<double>& w, const TensorD& x,
                    const TensorD& target, CheckLoss loss, Tape<double>* tape) {
    Tape<double> local;
    Tape<double>& t = tape ? *tape : local;
    const TensorD y = models::forward(graph, w, x, &t);
    Evaluation e;
    e.pattern = t.kink_pattern();
    if (loss == CheckLoss::l1) {
        if (!(y.shape() == target.shape())) throw ShapeError("grad_check: target shape mismatch");
        e.loss = l1_loss(y, target);
        for (std::size_t i = 0; i < y.size(); ++i) e.pattern.push_back(y[i] < target[i]);
        e.grad_out = l1_loss_grad(y, target);
    } else {
        // BCE against label 1 on probabilities.
        e.grad_out = TensorD(y.shape());
        const double n = static_cast<double>(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            e.loss -= std::log(y[i]) / n;
            e.grad_out[i] = -1.0 / (n * y[i]);
        }
    }
    return e;
}

}  // namespace

GradCheckResult grad_check(const LayerGraph& graph, const WeightStore& weights, const GradCheckOptions& options) {
    if (options.probes < 1) throw std::invalid_argument("grad_check: probes must be >= 1");
    if (graph.resampling_only()) throw std::invalid_argument("grad_check: graph has no parameters to probe");
    struct Coord {
        std::string slot;
        std::size_t size;
    };
    std::vector<Coord> coords;
    std::uint64_t total = 0;
    for (const auto& s : models::weight_slots(graph)) {
        if (s.role != models::SlotRole::parameter) continue;
        coords.push_back({s.name, s.shape.size()});
        total += s.shape.size();
    }
    if (total == 0) throw std::invalid_argument("grad_check: graph has no parameters to probe");

    const bool generator = models::is_generator(graph.arch.id);
    CheckLoss loss = options.loss;
    if (loss == CheckLoss::automatic) loss = generator ? CheckLoss::l1 : CheckLoss::bce;
    const std::int64_t extent = generator ? 16 : graph.arch.disc_input;
    const Shape in_shape = options.input.value_or(Shape{1, graph.arch.colors, extent, extent});

    Rng rng(options.seed);
    TensorD x(in_shape);
    for (auto& v : x.data()) v = rng.uniform();
    BasicWeightStore<double> w = weights.cast<double>();

    TensorD target(models::forward(graph, w, x).shape());
    for (auto& v : target.data()) v = rng.uniform();
    Tape<double> tape;
    const Evaluation base = evaluate(graph, w, x, target, loss, &tape);
    const auto analytic = models::backward(graph, w, tape, base.grad_out).params;

    GradCheckResult result;
    const int max_attempts = 50 * options.probes;
    int attempts = 0;
    while (result.probes < options.probes) {
        if (attempts++ >= max_attempts)
            throw std::runtime_error("grad_check: too many probes straddle a kink; reduce the step");
        std::uint64_t k = rng.below(total);
        std::size_t c = 0;
        while (k >= coords[c].size) k -= coords[c++].size;
        TensorD& param = w.get(coords[c].slot);
        const double keep = param[k];
        param[k] = keep + options.step;
        const Evaluation up = evaluate(graph, w, x, target, loss, nullptr);
        param[k] = keep - options.step;
        const Evaluation down = evaluate(graph, w, x, target, loss, nullptr);
        param[k] = keep;
        if (up.pattern != base.pattern || down.pattern != base.pattern) {
            ++result.rejected;
            continue;
        }
        const double fd = (up.loss - down.loss) / (2.0 * options.step);
        const double a = analytic.get(coords[c].slot)[k];
        const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-8});
        result.max_rel_error = std::max(result.max_rel_error, rel);
        ++result.probes;
    }
    return result;
}

}  // namespace srocr::training
