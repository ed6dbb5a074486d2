#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "srocr/models/executor.hpp"
#include "srocr/models/graph.hpp"
#include "srocr/models/weights.hpp"

namespace srocr::training {

using models::LayerGraph;
using models::WeightStore;
using tensor::Tensor;

enum class TrainMode { l1_only, gan, ragan };

std::string_view to_string(TrainMode mode);
/// Throws std::invalid_argument for anything but l1_only, gan or ragan.
TrainMode parse_mode(std::string_view name);

struct TrainConfig {
    int steps_max = 200;
    int batch = 1;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int convergence_window = 50;
    double convergence_eps = 1e-3;
    TrainMode mode = TrainMode::l1_only;
    /// Weight of the adversarial term in the generator objective
    /// (gan and ragan modes): l1 + adversarial_weight * g_loss.
    double adversarial_weight = 1e-3;

    /// Throws ConfigError. A zero learning rate is accepted (no-op updates).
    void validate() const;
};

/// g_loss is the adversarial generator loss in gan/ragan modes and the L1
/// loss in l1_only mode, where d_loss is 0.
struct LossReport {
    int step = 0;
    double g_loss = 0.0;
    double d_loss = 0.0;
    double l1 = 0.0;

    friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// One low/high resolution training pair, each of shape (1, C, h, w).
struct Sample {
    Tensor lr;
    Tensor hr;
};
using Dataset = std::vector<Sample>;

// ---------------------------------------------------------------------------
// Losses

/// Mean absolute difference.
template <typename T>
double l1_loss(const tensor::BasicTensor<T>& pred, const tensor::BasicTensor<T>& target);

/// d l1_loss / d pred: sign(pred - target) / N, zero where equal.
template <typename T>
tensor::BasicTensor<T> l1_loss_grad(const tensor::BasicTensor<T>& pred, const tensor::BasicTensor<T>& target);

struct AdversarialLosses {
    double g_loss = 0.0;
    double d_loss = 0.0;
};

/// Binary cross-entropy on probabilities in (0, 1), clamped to
/// [1e-7, 1 - 1e-7]: d = -mean(log d_real) - mean(log(1 - d_fake)),
/// g = -mean(log d_fake). Throws DomainError for scores outside (0, 1).
AdversarialLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake);

/// Same losses evaluated from raw logits without clamping, with gradients
/// with respect to the logits.
struct AdversarialGrads {
    AdversarialLosses loss;
    std::vector<double> d_wrt_real;  // d d_loss / d real logits
    std::vector<double> d_wrt_fake;  // d d_loss / d fake logits
    std::vector<double> g_wrt_fake;  // d g_loss / d fake logits
};
AdversarialGrads gan_losses_from_logits(std::span<const double> c_real, std::span<const double> c_fake);

/// Relativistic average losses on logits:
///   D_ra(r) = sigmoid(c_r - mean(c_fake)), D_ra(f) = sigmoid(c_f - mean(c_real))
///   d = -mean(log D_ra(r)) - mean(log(1 - D_ra(f)))
///   g = -mean(log(1 - D_ra(r))) - mean(log D_ra(f))
/// Throws DomainError on non-finite logits.
AdversarialLosses rad_losses(std::span<const double> c_real, std::span<const double> c_fake);

/// rad_losses plus gradients. g_wrt_real is also filled since the
/// generator loss depends on the real logits through the averages.
struct RadGrads {
    AdversarialLosses loss;
    std::vector<double> d_wrt_real;
    std::vector<double> d_wrt_fake;
    std::vector<double> g_wrt_real;
    std::vector<double> g_wrt_fake;
};
RadGrads rad_losses_with_grads(std::span<const double> c_real, std::span<const double> c_fake);

// ---------------------------------------------------------------------------
// Training

struct TrainState {
    WeightStore generator;
    WeightStore discriminator;  // empty in l1_only mode
};

/// Graphs taking part in training. The discriminator must accept the
/// generator's output size and ends in a sigmoid; it is required for gan
/// and ragan modes.
struct TrainGraphs {
    const LayerGraph* generator = nullptr;
    const LayerGraph* discriminator = nullptr;
};

/// Batch indices used at `step`: (step * batch + j) mod dataset size.
std::vector<std::size_t> batch_indices(int step, int batch, std::size_t dataset_size);

/// One discriminator update followed by one generator update (l1_only
/// skips the discriminator), plain gradient descent. Throws DomainError
/// naming the step when a loss is not finite.
std::pair<TrainState, LossReport> train_step(const TrainGraphs& graphs, TrainState state, const Dataset& dataset,
                                             const TrainConfig& config, int step);

/// True when the last `window` reports exist and both g_loss and d_loss
/// ranges over them are below `eps`.
bool has_converged(std::span<const LossReport> history, int window, double eps);

struct TrainResult {
    TrainState state;
    std::vector<LossReport> history;
    bool converged = false;
};

/// Runs train_step from step 0 until steps_max or convergence.
TrainResult train_loop(const TrainGraphs& graphs, TrainState initial, const Dataset& dataset,
                       const TrainConfig& config);

/// Fresh weights for the graphs: generator seeded with `seed`, the
/// discriminator with `seed + 1`.
TrainState initial_state(const TrainGraphs& graphs, std::uint64_t seed);

/// CSV with header step,g_loss,d_loss,l1 and 17 significant digits.
void write_loss_csv(const std::filesystem::path& path, std::span<const LossReport> history);

// ---------------------------------------------------------------------------
// Gradient verification

enum class CheckLoss { automatic, l1, bce };

struct GradCheckOptions {
    int probes = 64;
    std::uint64_t seed = 0;
    double step = 1e-3;
    CheckLoss loss = CheckLoss::automatic;
    /// Input shape; defaults to (1, colors, 16, 16) for generators and the
    /// discriminator's input size otherwise.
    std::optional<tensor::Shape> input;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    int probes = 0;
    int rejected = 0;  // probes redrawn because +-step crossed a kink
};

/// Compares reverse-mode parameter gradients with central finite
/// differences in double precision at uniformly drawn parameter
/// coordinates. The loss is L1 against a random target for generators and
/// BCE against label 1 for discriminators. Probes whose +-step moves any
/// ReLU-family input or L1 residual across zero are redrawn.
/// rel = |a - fd| / max(|a|, |fd|, 1e-8). Throws std::invalid_argument
/// for probes < 1 or a graph without parameters.
GradCheckResult grad_check(const LayerGraph& graph, const WeightStore& weights, const GradCheckOptions& options);

}  // namespace srocr::training
