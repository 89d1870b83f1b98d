#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "triagenet/dataset.hpp"
#include "triagenet/samples.hpp"
#include "triagenet/tensor.hpp"

namespace triagenet::nn {

using data::BinaryLabel;
using data::ClassWeights;

enum class LayerKind { Conv, MaxPool, Flatten, Dense, Softmax };

const char* to_string(LayerKind kind);

// Conv layers are 3x3-style square kernels, stride 1, zero same-padding,
// followed by ReLU. MaxPool is a 2x2 window with stride 2. Dense layers get
// ReLU except the final one, which feeds the 2-way softmax.
struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    int kernel = 0;        // Conv
    int in_channels = 0;   // Conv
    int out_channels = 0;  // Conv
    int in_width = 0;      // Dense
    int out_width = 0;     // Dense

    static LayerSpec conv(int kernel, int in_channels, int out_channels);
    static LayerSpec maxpool();
    static LayerSpec flatten();
    static LayerSpec dense(int in_width, int out_width);
    static LayerSpec softmax();
};

// Blocks are conv groups each ending in a MaxPool; the head is
// Flatten + Dense layers + a final Dense of width 2 + Softmax.
// freeze_mask has one flag per block plus one for the whole head.
struct NetworkConfig {
    std::string name;
    int input_height = 0;
    int input_width = 0;
    std::vector<std::vector<LayerSpec>> blocks;
    std::vector<LayerSpec> head;
    std::vector<bool> freeze_mask;
};

// Throws ConfigError when the layer chain is not shape-compatible, the final
// Dense is not width 2, a pool would see odd spatial dims, or the freeze
// mask has the wrong length.
void validate(const NetworkConfig& config);

// "vgg16": the canonical 13-conv/5-pool topology with two Dense-4096 layers
// and a Dense-2 head at 224x224, blocks 1-3 frozen. "tiny": a desk-scale
// 2-block config at 32x32 with block 1 frozen.
NetworkConfig build_config(const std::string& name);

struct Shape3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::size_t count() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
};

// Layer list with block ownership (block == blocks.size() means head).
struct FlatLayer {
    LayerSpec spec;
    std::size_t block = 0;
};

std::vector<FlatLayer> flat_layers(const NetworkConfig& config);

// shapes[i] is the input of flat layer i; shapes.back() is the softmax input.
std::vector<Shape3> layer_input_shapes(const NetworkConfig& config);

// Stable parameter-layer names used by the model store ("b1_conv2", "head_fc1").
std::vector<std::string> layer_names(const NetworkConfig& config);

struct Prediction {
    double p_critical = 0.0;
    double p_noncritical = 0.0;
};

template <typename T>
struct LayerParams {
    std::vector<T> weight;
    std::vector<T> bias;
    bool empty() const { return weight.empty() && bias.empty(); }
};

// Gradients share this layout (one entry per flat layer, empty when the
// layer has no parameters).
template <typename T>
using ParamList = std::vector<LayerParams<T>>;

template <typename T>
struct Model {
    NetworkConfig config;
    ParamList<T> params;
};

// He-uniform weights (limit sqrt(6/fan_in)), zero biases, independent
// deterministic stream per layer. Frozen blocks are initialized too; the
// freeze mask only gates updates.
template <typename T>
Model<T> init_model(const NetworkConfig& config, std::uint64_t seed);

template <typename T>
Model<T> zero_model(const NetworkConfig& config);

// ---- layer primitives ----

template <typename T>
T relu(T x) {
    return x > T{} ? x : T{};
}

// Stride-1 zero-padded correlation; kernel layout [ky][kx][ci][co], spatial
// dims preserved. No activation applied.
template <typename T>
Tensor3<T> conv_forward(const Tensor3<T>& input, const std::vector<T>& kernel,
                        const std::vector<T>& bias, int kernel_size,
                        int out_channels);

// 2x2 window, stride 2; spatial dims must be even. argmax_out, when given,
// records the flat input index of each window maximum.
template <typename T>
Tensor3<T> maxpool_forward(const Tensor3<T>& input,
                           std::vector<int>* argmax_out = nullptr);

// Max-shifted two-way softmax.
Prediction softmax2(double z_critical, double z_noncritical);

// w_label * (-ln p_label) with p clamped to [1e-12, 1].
double weighted_cross_entropy(const Prediction& pred, BinaryLabel label,
                              const ClassWeights& weights);

// ---- whole-network passes ----

template <typename T>
Prediction forward(const Model<T>& model, const Tensor3<T>& image);

template <typename T>
struct BackpropResult {
    ParamList<T> grads;  // zero for frozen blocks
    double loss = 0.0;
    Prediction pred;
};

template <typename T>
BackpropResult<T> backprop(const Model<T>& model, const Tensor3<T>& image,
                           BinaryLabel label, const ClassWeights& weights);

// Exact gradients of weighted_cross_entropy(forward(.)) for non-frozen
// parameters; frozen blocks come back as zero tensors.
template <typename T>
ParamList<T> backward(const Model<T>& model, const Tensor3<T>& image,
                      BinaryLabel label, const ClassWeights& weights) {
    return backprop(model, image, label, weights).grads;
}

// p -= lr * g on non-frozen layers; frozen parameters are left untouched.
template <typename T>
void sgd_step(Model<T>& model, const ParamList<T>& grads, T learning_rate);

// ---- training ----

struct TrainConfig {
    double learning_rate = 1e-6;
    int epochs = 20;
    int batch_size = 20;
    int batches_per_epoch = 70;
    ClassWeights class_weights;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& tc);

struct LossRecord {
    int epoch = 0;
    int batch = 0;
    double loss = 0.0;
};

struct TrainResult {
    Model<float> model;
    std::vector<LossRecord> trace;
};

// Mini-batch SGD: epochs x batches_per_epoch steps, batch gradient = mean of
// per-example gradients accumulated in example order. A fresh epoch plan is
// drawn per epoch from a seed derived from (tc.seed, epoch), so identical
// configs reproduce bitwise-identical models.
TrainResult train(Model<float> model, const data::SampleSource& samples,
                  const TrainConfig& tc);

std::uint64_t epoch_plan_seed(std::uint64_t base_seed, int epoch);

void write_loss_trace_csv(const std::filesystem::path& path,
                          const std::vector<LossRecord>& trace);

// ---- persistence ----

// Store layout: <dir>/model.json (topology, shapes, dtype, byte order) plus
// <dir>/tensors/<layer>.<param>.f32, raw little-endian float32. Round trips
// are bitwise lossless.
void save_model(const Model<float>& model, const std::filesystem::path& dir);

Model<float> load_model(const std::filesystem::path& dir);

// Additionally requires the stored topology to match `expected`.
Model<float> load_model(const std::filesystem::path& dir,
                        const NetworkConfig& expected);

std::string config_to_json(const NetworkConfig& config);
NetworkConfig config_from_json(const std::string& json_text);

}  // namespace triagenet::nn
