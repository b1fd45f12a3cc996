#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kjm/error.hpp"
#include "kjm/image_codec.hpp"

namespace kjm::cnn {

struct Conv {
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    bool relu = true;

    friend bool operator==(const Conv&, const Conv&) = default;
};

struct MaxPool {
    int kernel = 2;
    int stride = 2;

    friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

struct FullyConnected {
    int out_features = 0;
    bool relu = true;
    double dropout = 0.0;

    friend bool operator==(const FullyConnected&, const FullyConnected&) = default;
};

/// Regression head; 0 means "sized at build time".
struct Output {
    int out_features = 0;

    friend bool operator==(const Output&, const Output&) = default;
};

using LayerSpec = std::variant<Conv, MaxPool, FullyConnected, Output>;

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

struct ArchitectureSpec {
    Shape input{3, 227, 227};
    std::vector<LayerSpec> layers;

    /// Minutes-scale preset: conv16k7s4 - pool3s2 - conv32k5s1p2 - pool3s2 - fc256 - out.
    static ArchitectureSpec desk();
    /// CaffeNet-shaped: 5 conv + 2 fc + regression head, no LRN, no grouping.
    static ArchitectureSpec reference();
    /// Preset name ("desk", "reference") or a descriptor such as
    /// "in3x227x227,conv16k7s4p0,pool3s2,conv32k5s1p2,pool3s2,fc256,out".
    static ArchitectureSpec parse(const std::string& text);
    [[nodiscard]] std::string describe() const;

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Output shape of every layer (flat layers report {n, 1, 1}). Throws IncompatibleArchitecture.
std::vector<Shape> chain_shapes(const ArchitectureSpec& arch, std::size_t output_dim);

/// Weight shape per parameterised layer: conv (out, in, k, k); fc / output (in, out).
std::vector<std::vector<int>> weight_shapes(const ArchitectureSpec& arch, std::size_t output_dim);

/// Inputs are flat tensors of arch.input.size() values in pixel units [0, 255].
using Tensor = std::vector<float>;

enum class Provenance { Scratch, Finetune, Cascade };

const char* to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct LayerWeights {
    std::size_t layer_index = 0;
    std::vector<int> weight_shape;
    std::vector<float> weights;
    std::vector<float> biases;
    bool transferred = false;

    friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct WeightStore {
    ArchitectureSpec arch;
    std::size_t output_dim = 0;
    /// parameterised layers only, in network order
    std::vector<LayerWeights> layers;
    Provenance provenance = Provenance::Scratch;
    /// e.g. {"scratch:GRFM", "cascade:KJM"}
    std::vector<std::string> chain;
    std::string donor_id;
    /// response family the head was trained for ("KJM", "GRFM")
    std::string target_family = "KJM";
    /// per-value input mean (empty: mid-grey 127.5) and scale applied before the first layer
    std::vector<float> input_mean;
    float input_scale = 1.0f / 127.5f;

    friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

/// Mean-image subtraction: input_mean = per-value training mean, input_scale = 1 / pooled sd.
void fit_input_normalization(WeightStore& model, std::span<const Tensor> inputs);

/// FNV-1a over architecture and weight bytes; used as donor id.
std::string weights_digest(const WeightStore& model);

WeightStore build(const ArchitectureSpec& arch, std::size_t output_dim, std::uint64_t seed,
                  std::string target_family = "KJM");

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;
};

/// loss = 1/2 |pred - target|^2, grad = pred - target.
LossResult euclidean_loss(std::span<const double> pred, std::span<const double> target);

struct TrainConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    double transferred_layer_lr_multiplier = 0.1;
    std::uint64_t seed = 0;
    /// called after every epoch with the mean training loss
    std::function<void(std::size_t, double)> on_epoch;

    void validate() const;
};

struct TrainResult {
    WeightStore model;
    std::vector<double> loss_history;
};

/// Thrown when a batch loss turns non-finite; carries the last finite state.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& message, WeightStore last_finite, std::vector<double> history);

    WeightStore last_finite;
    std::vector<double> history;
};

TrainResult train(WeightStore model, std::span<const Tensor> inputs, std::span<const double> targets,
                  const TrainConfig& cfg);
TrainResult train(WeightStore model, std::span<const EncodedImage> images, std::span<const double> targets,
                  const TrainConfig& cfg);

std::vector<double> predict(const WeightStore& model, std::span<const float> input);
std::vector<double> predict(const WeightStore& model, const EncodedImage& image);
/// Rows of predictions, one per input; identical to calling predict() on each.
std::vector<std::vector<double>> predict_batch(const WeightStore& model, std::span<const Tensor> inputs);

/// Activation of layer `layer_index` (inference mode).
std::vector<double> activations(const WeightStore& model, std::span<const float> input, std::size_t layer_index);

/// Copies every non-Output layer from the donor and re-initialises the head.
WeightStore transfer(const WeightStore& donor, const ArchitectureSpec& arch, std::size_t new_output_dim,
                     std::uint64_t seed, std::string target_family = "KJM");

/// Mean batch loss and analytic gradients in double precision (dropout disabled).
struct GradientReport {
    double loss = 0.0;
    std::vector<std::vector<double>> weight_grads;
    std::vector<std::vector<double>> bias_grads;
};

GradientReport gradients(const WeightStore& model, std::span<const Tensor> inputs, std::span<const double> targets);

/// Mean batch loss in double precision with the model's weights overridden.
double batch_loss(const WeightStore& model, const std::vector<std::vector<double>>& weights, const std::vector<std::vector<double>>& biases,
                  std::span<const Tensor> inputs, std::span<const double> targets);

}  // namespace kjm::cnn
