#include "triagenet/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "triagenet/errors.hpp"
#include "triagenet/rng.hpp"

namespace triagenet::nn {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

LayerSpec LayerSpec::conv(int kernel, int in_channels, int out_channels) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.kernel = kernel;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    return s;
}

LayerSpec LayerSpec::maxpool() {
    LayerSpec s;
    s.kind = LayerKind::MaxPool;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

LayerSpec LayerSpec::dense(int in_width, int out_width) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_width = in_width;
    s.out_width = out_width;
    return s;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
}

void validate(const NetworkConfig& config) {
    if (config.input_height <= 0 || config.input_width <= 0)
        throw ConfigError("network input dims must be positive");
    if (config.blocks.empty())
        throw ConfigError("network needs at least one conv block");
    if (config.freeze_mask.size() != config.blocks.size() + 1)
        throw ConfigError("freeze mask needs one flag per block plus one for "
                          "the head; expected " +
                          std::to_string(config.blocks.size() + 1) + ", got " +
                          std::to_string(config.freeze_mask.size()));

    int h = config.input_height;
    int w = config.input_width;
    int c = 3;
    for (std::size_t b = 0; b < config.blocks.size(); ++b) {
        const auto& block = config.blocks[b];
        const std::string where = "block " + std::to_string(b + 1);
        if (block.size() < 2 || block.back().kind != LayerKind::MaxPool)
            throw ConfigError(where + " must be conv layers ending in a maxpool");
        for (std::size_t j = 0; j + 1 < block.size(); ++j) {
            const auto& s = block[j];
            if (s.kind != LayerKind::Conv)
                throw ConfigError(where + " may only contain conv layers "
                                          "before its maxpool");
            if (s.kernel <= 0 || s.kernel % 2 == 0)
                throw ConfigError(where + ": conv kernel must be odd and "
                                          "positive for same-padding");
            if (s.in_channels != c)
                throw ConfigError(where + ": conv expects " +
                                  std::to_string(s.in_channels) +
                                  " input channels but receives " +
                                  std::to_string(c));
            if (s.out_channels <= 0)
                throw ConfigError(where + ": conv out_channels must be positive");
            c = s.out_channels;
        }
        if (h % 2 != 0 || w % 2 != 0)
            throw ConfigError(where + ": maxpool would see odd spatial dims " +
                              std::to_string(h) + "x" + std::to_string(w));
        h /= 2;
        w /= 2;
    }

    if (config.head.size() < 3 || config.head.front().kind != LayerKind::Flatten ||
        config.head.back().kind != LayerKind::Softmax)
        throw ConfigError("head must be flatten, dense layers, then softmax");
    std::size_t width = static_cast<std::size_t>(h) * w * c;
    for (std::size_t j = 1; j + 1 < config.head.size(); ++j) {
        const auto& s = config.head[j];
        if (s.kind != LayerKind::Dense)
            throw ConfigError("head layer " + std::to_string(j) +
                              " must be dense");
        if (static_cast<std::size_t>(s.in_width) != width)
            throw ConfigError("head dense " + std::to_string(j) + " expects " +
                              std::to_string(s.in_width) +
                              " inputs but receives " + std::to_string(width));
        if (s.out_width <= 0)
            throw ConfigError("head dense out_width must be positive");
        width = static_cast<std::size_t>(s.out_width);
    }
    if (width != 2)
        throw ConfigError("final dense must have width 2, got " +
                          std::to_string(width));
}

NetworkConfig build_config(const std::string& name) {
    using L = LayerSpec;
    NetworkConfig config;
    config.name = name;
    if (name == "vgg16") {
        config.input_height = 224;
        config.input_width = 224;
        config.blocks = {
            {L::conv(3, 3, 64), L::conv(3, 64, 64), L::maxpool()},
            {L::conv(3, 64, 128), L::conv(3, 128, 128), L::maxpool()},
            {L::conv(3, 128, 256), L::conv(3, 256, 256), L::conv(3, 256, 256),
             L::maxpool()},
            {L::conv(3, 256, 512), L::conv(3, 512, 512), L::conv(3, 512, 512),
             L::maxpool()},
            {L::conv(3, 512, 512), L::conv(3, 512, 512), L::conv(3, 512, 512),
             L::maxpool()},
        };
        config.head = {L::flatten(), L::dense(7 * 7 * 512, 4096),
                       L::dense(4096, 4096), L::dense(4096, 2), L::softmax()};
        config.freeze_mask = {true, true, true, false, false, false};
    } else if (name == "tiny") {
        config.input_height = 32;
        config.input_width = 32;
        config.blocks = {
            {L::conv(3, 3, 4), L::maxpool()},
            {L::conv(3, 4, 8), L::maxpool()},
        };
        config.head = {L::flatten(), L::dense(8 * 8 * 8, 16), L::dense(16, 2),
                       L::softmax()};
        config.freeze_mask = {true, false, false};
    } else {
        throw ConfigError("unknown network config: " + name);
    }
    validate(config);
    return config;
}

std::vector<FlatLayer> flat_layers(const NetworkConfig& config) {
    std::vector<FlatLayer> layers;
    for (std::size_t b = 0; b < config.blocks.size(); ++b)
        for (const auto& spec : config.blocks[b]) layers.push_back({spec, b});
    for (const auto& spec : config.head)
        layers.push_back({spec, config.blocks.size()});
    return layers;
}

std::vector<Shape3> layer_input_shapes(const NetworkConfig& config) {
    std::vector<Shape3> shapes;
    Shape3 cur{config.input_height, config.input_width, 3};
    for (const auto& layer : flat_layers(config)) {
        shapes.push_back(cur);
        switch (layer.spec.kind) {
            case LayerKind::Conv:
                cur.channels = layer.spec.out_channels;
                break;
            case LayerKind::MaxPool:
                cur.height /= 2;
                cur.width /= 2;
                break;
            case LayerKind::Flatten:
                cur = {1, 1, static_cast<int>(cur.count())};
                break;
            case LayerKind::Dense:
                cur = {1, 1, layer.spec.out_width};
                break;
            case LayerKind::Softmax:
                break;
        }
    }
    return shapes;
}

std::vector<std::string> layer_names(const NetworkConfig& config) {
    std::vector<std::string> names;
    for (std::size_t b = 0; b < config.blocks.size(); ++b) {
        int conv_no = 0;
        for (const auto& spec : config.blocks[b]) {
            if (spec.kind == LayerKind::Conv)
                names.push_back("b" + std::to_string(b + 1) + "_conv" +
                                std::to_string(++conv_no));
            else
                names.push_back("b" + std::to_string(b + 1) + "_pool");
        }
    }
    int fc_no = 0;
    for (const auto& spec : config.head) {
        if (spec.kind == LayerKind::Dense)
            names.push_back("head_fc" + std::to_string(++fc_no));
        else if (spec.kind == LayerKind::Flatten)
            names.push_back("head_flatten");
        else
            names.push_back("head_softmax");
    }
    return names;
}

namespace {

template <typename T>
ParamList<T> zero_params(const NetworkConfig& config) {
    const auto layers = flat_layers(config);
    ParamList<T> params(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& spec = layers[i].spec;
        if (spec.kind == LayerKind::Conv) {
            params[i].weight.assign(static_cast<std::size_t>(spec.kernel) *
                                        spec.kernel * spec.in_channels *
                                        spec.out_channels,
                                    T{});
            params[i].bias.assign(static_cast<std::size_t>(spec.out_channels),
                                  T{});
        } else if (spec.kind == LayerKind::Dense) {
            params[i].weight.assign(static_cast<std::size_t>(spec.out_width) *
                                        spec.in_width,
                                    T{});
            params[i].bias.assign(static_cast<std::size_t>(spec.out_width), T{});
        }
    }
    return params;
}

}  // namespace

template <typename T>
Model<T> zero_model(const NetworkConfig& config) {
    validate(config);
    return Model<T>{config, zero_params<T>(config)};
}

template <typename T>
Model<T> init_model(const NetworkConfig& config, std::uint64_t seed) {
    Model<T> model = zero_model<T>(config);
    const auto layers = flat_layers(config);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& p = model.params[i];
        if (p.empty()) continue;
        const auto& spec = layers[i].spec;
        const std::size_t fan_in =
            spec.kind == LayerKind::Conv
                ? static_cast<std::size_t>(spec.kernel) * spec.kernel *
                      spec.in_channels
                : static_cast<std::size_t>(spec.in_width);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Rng rng(mix_seed(seed, i));
        for (auto& v : p.weight) v = static_cast<T>(rng.uniform(-limit, limit));
        // biases stay zero
    }
    return model;
}

template <typename T>
Tensor3<T> conv_forward(const Tensor3<T>& input, const std::vector<T>& kernel,
                        const std::vector<T>& bias, int kernel_size,
                        int out_channels) {
    const int ci = input.channels;
    const int co = out_channels;
    if (kernel_size <= 0 || kernel_size % 2 == 0)
        throw ConfigError("conv kernel must be odd and positive, got " +
                          std::to_string(kernel_size));
    if (kernel.size() != static_cast<std::size_t>(kernel_size) * kernel_size *
                             ci * co)
        throw ConfigError("conv kernel element count mismatch");
    if (bias.size() != static_cast<std::size_t>(co))
        throw ConfigError("conv bias length mismatch");

    const int pad = kernel_size / 2;
    Tensor3<T> out(input.height, input.width, co);
    std::vector<T> acc(static_cast<std::size_t>(co));
    for (int y = 0; y < input.height; ++y) {
        for (int x = 0; x < input.width; ++x) {
            for (int oc = 0; oc < co; ++oc) acc[oc] = bias[oc];
            for (int ky = 0; ky < kernel_size; ++ky) {
                const int iy = y + ky - pad;
                if (iy < 0 || iy >= input.height) continue;
                for (int kx = 0; kx < kernel_size; ++kx) {
                    const int ix = x + kx - pad;
                    if (ix < 0 || ix >= input.width) continue;
                    const T* in_px = input.data.data() +
                                     (static_cast<std::size_t>(iy) * input.width +
                                      ix) *
                                         ci;
                    const T* k_base =
                        kernel.data() +
                        (static_cast<std::size_t>(ky) * kernel_size + kx) * ci *
                            co;
                    for (int ic = 0; ic < ci; ++ic) {
                        const T v = in_px[ic];
                        const T* k_px = k_base + static_cast<std::size_t>(ic) * co;
                        for (int oc = 0; oc < co; ++oc) acc[oc] += v * k_px[oc];
                    }
                }
            }
            T* out_px = out.data.data() +
                        (static_cast<std::size_t>(y) * out.width + x) * co;
            for (int oc = 0; oc < co; ++oc) out_px[oc] = acc[oc];
        }
    }
    return out;
}

template <typename T>
Tensor3<T> maxpool_forward(const Tensor3<T>& input,
                           std::vector<int>* argmax_out) {
    if (input.height % 2 != 0 || input.width % 2 != 0)
        throw ConfigError("maxpool requires even spatial dims, got " +
                          std::to_string(input.height) + "x" +
                          std::to_string(input.width));
    Tensor3<T> out(input.height / 2, input.width / 2, input.channels);
    if (argmax_out) argmax_out->assign(out.data.size(), 0);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int c = 0; c < input.channels; ++c) {
                T best{};
                int best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx =
                            ((2 * y + dy) * input.width + (2 * x + dx)) *
                                input.channels +
                            c;
                        const T v = input.data[static_cast<std::size_t>(idx)];
                        // strict >: the first maximum in row-major order wins
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t oidx =
                    (static_cast<std::size_t>(y) * out.width + x) *
                        input.channels +
                    c;
                out.data[oidx] = best;
                if (argmax_out) (*argmax_out)[oidx] = best_idx;
            }
        }
    }
    return out;
}

Prediction softmax2(double z_critical, double z_noncritical) {
    const double m = std::max(z_critical, z_noncritical);
    const double e_c = std::exp(z_critical - m);
    const double e_nc = std::exp(z_noncritical - m);
    const double sum = e_c + e_nc;
    return {e_c / sum, e_nc / sum};
}

double weighted_cross_entropy(const Prediction& pred, BinaryLabel label,
                              const ClassWeights& weights) {
    const double p = label == BinaryLabel::Critical ? pred.p_critical
                                                    : pred.p_noncritical;
    const double w = weights.for_label(label);
    return w * -std::log(std::clamp(p, 1e-12, 1.0));
}

namespace {

template <typename T>
struct ForwardCache {
    // acts[i] is the input of flat layer i; acts.back() feeds the softmax.
    std::vector<Tensor3<T>> acts;
    std::vector<std::vector<int>> argmax;  // filled for pool layers only
    Prediction pred;
};

template <typename T>
Prediction eval_network(const Model<T>& model, const Tensor3<T>& image,
                        ForwardCache<T>* cache) {
    if (image.height != model.config.input_height ||
        image.width != model.config.input_width || image.channels != 3)
        throw DataError("network expects " +
                        std::to_string(model.config.input_height) + "x" +
                        std::to_string(model.config.input_width) +
                        "x3 input, got " + std::to_string(image.height) + "x" +
                        std::to_string(image.width) + "x" +
                        std::to_string(image.channels));

    const auto layers = flat_layers(model.config);
    if (cache) {
        cache->acts.clear();
        cache->acts.reserve(layers.size());
        cache->argmax.assign(layers.size(), {});
    }

    Tensor3<T> cur = image;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        const auto& spec = layers[i].spec;
        Tensor3<T> next;
        switch (spec.kind) {
            case LayerKind::Conv:
                next = conv_forward(cur, model.params[i].weight,
                                    model.params[i].bias, spec.kernel,
                                    spec.out_channels);
                for (auto& v : next.data) v = relu(v);
                break;
            case LayerKind::MaxPool: {
                std::vector<int> argmax;
                next = maxpool_forward(cur, cache ? &argmax : nullptr);
                if (cache) cache->argmax[i] = std::move(argmax);
                break;
            }
            case LayerKind::Flatten:
                next = Tensor3<T>(1, 1, static_cast<int>(cur.data.size()));
                next.data = cur.data;
                break;
            case LayerKind::Dense: {
                const auto& weight = model.params[i].weight;
                next = Tensor3<T>(1, 1, spec.out_width);
                for (int o = 0; o < spec.out_width; ++o) {
                    T sum = model.params[i].bias[static_cast<std::size_t>(o)];
                    const T* row = weight.data() +
                                   static_cast<std::size_t>(o) * spec.in_width;
                    for (int k = 0; k < spec.in_width; ++k)
                        sum += row[k] * cur.data[static_cast<std::size_t>(k)];
                    next.data[static_cast<std::size_t>(o)] = sum;
                }
                // the dense feeding the softmax keeps raw logits
                if (layers[i + 1].spec.kind != LayerKind::Softmax)
                    for (auto& v : next.data) v = relu(v);
                break;
            }
            case LayerKind::Softmax:
                throw ConfigError("softmax must be the last layer");
        }
        if (cache) cache->acts.push_back(std::move(cur));
        cur = std::move(next);
    }

    const Prediction pred =
        softmax2(static_cast<double>(cur.data[0]), static_cast<double>(cur.data[1]));
    if (cache) {
        cache->acts.push_back(std::move(cur));
        cache->pred = pred;
    }
    return pred;
}

}  // namespace

template <typename T>
Prediction forward(const Model<T>& model, const Tensor3<T>& image) {
    return eval_network(model, image, static_cast<ForwardCache<T>*>(nullptr));
}

template <typename T>
BackpropResult<T> backprop(const Model<T>& model, const Tensor3<T>& image,
                           BinaryLabel label, const ClassWeights& weights) {
    ForwardCache<T> cache;
    eval_network(model, image, &cache);

    BackpropResult<T> result;
    result.pred = cache.pred;
    result.loss = weighted_cross_entropy(cache.pred, label, weights);
    result.grads = zero_params<T>(model.config);

    const auto layers = flat_layers(model.config);
    const std::size_t n = layers.size();

    // The lowest layer whose parameters can move; everything beneath it needs
    // no gradients at all.
    std::size_t lowest = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (!model.params[i].empty() &&
            !model.config.freeze_mask[layers[i].block]) {
            lowest = i;
            break;
        }
    }
    if (lowest == n) return result;

    const double w = weights.for_label(label);
    const double target_c = label == BinaryLabel::Critical ? 1.0 : 0.0;
    // d(loss)/d(logits) of the softmax pair
    Tensor3<T> grad(1, 1, 2);
    grad.data[0] = static_cast<T>(w * (cache.pred.p_critical - target_c));
    grad.data[1] =
        static_cast<T>(w * (cache.pred.p_noncritical - (1.0 - target_c)));

    for (std::size_t i = n - 2;; --i) {
        const auto& spec = layers[i].spec;
        const bool frozen = model.config.freeze_mask[layers[i].block];
        const bool need_input_grad = i > lowest;
        const Tensor3<T>& a_in = cache.acts[i];
        const Tensor3<T>& a_out = cache.acts[i + 1];

        switch (spec.kind) {
            case LayerKind::Dense: {
                Tensor3<T> dz = std::move(grad);
                // hidden dense layers carry a ReLU; a_out > 0 iff the
                // pre-activation was > 0
                if (i != n - 2)
                    for (std::size_t j = 0; j < dz.data.size(); ++j)
                        if (!(a_out.data[j] > T{})) dz.data[j] = T{};

                const auto& weight = model.params[i].weight;
                if (!frozen) {
                    auto& g = result.grads[i];
                    for (int o = 0; o < spec.out_width; ++o) {
                        const T d = dz.data[static_cast<std::size_t>(o)];
                        g.bias[static_cast<std::size_t>(o)] = d;
                        T* grow = g.weight.data() +
                                  static_cast<std::size_t>(o) * spec.in_width;
                        for (int k = 0; k < spec.in_width; ++k)
                            grow[k] = d * a_in.data[static_cast<std::size_t>(k)];
                    }
                }
                if (need_input_grad) {
                    Tensor3<T> din(1, 1, spec.in_width);
                    for (int o = 0; o < spec.out_width; ++o) {
                        const T d = dz.data[static_cast<std::size_t>(o)];
                        const T* row = weight.data() +
                                       static_cast<std::size_t>(o) * spec.in_width;
                        for (int k = 0; k < spec.in_width; ++k)
                            din.data[static_cast<std::size_t>(k)] += row[k] * d;
                    }
                    grad = std::move(din);
                }
                break;
            }
            case LayerKind::Flatten: {
                Tensor3<T> din(a_in.height, a_in.width, a_in.channels);
                din.data = std::move(grad.data);
                grad = std::move(din);
                break;
            }
            case LayerKind::MaxPool: {
                Tensor3<T> din(a_in.height, a_in.width, a_in.channels);
                const auto& argmax = cache.argmax[i];
                for (std::size_t j = 0; j < grad.data.size(); ++j)
                    din.data[static_cast<std::size_t>(argmax[j])] += grad.data[j];
                grad = std::move(din);
                break;
            }
            case LayerKind::Conv: {
                Tensor3<T> dz = std::move(grad);
                for (std::size_t j = 0; j < dz.data.size(); ++j)
                    if (!(a_out.data[j] > T{})) dz.data[j] = T{};

                const int kernel_size = spec.kernel;
                const int pad = kernel_size / 2;
                const int ci = spec.in_channels;
                const int co = spec.out_channels;
                if (!frozen) {
                    auto& g = result.grads[i];
                    for (int y = 0; y < dz.height; ++y) {
                        for (int x = 0; x < dz.width; ++x) {
                            const T* dz_px =
                                dz.data.data() +
                                (static_cast<std::size_t>(y) * dz.width + x) * co;
                            for (int oc = 0; oc < co; ++oc)
                                g.bias[static_cast<std::size_t>(oc)] += dz_px[oc];
                            for (int ky = 0; ky < kernel_size; ++ky) {
                                const int iy = y + ky - pad;
                                if (iy < 0 || iy >= a_in.height) continue;
                                for (int kx = 0; kx < kernel_size; ++kx) {
                                    const int ix = x + kx - pad;
                                    if (ix < 0 || ix >= a_in.width) continue;
                                    const T* in_px =
                                        a_in.data.data() +
                                        (static_cast<std::size_t>(iy) *
                                             a_in.width +
                                         ix) *
                                            ci;
                                    T* g_base =
                                        g.weight.data() +
                                        (static_cast<std::size_t>(ky) *
                                             kernel_size +
                                         kx) *
                                            ci * co;
                                    for (int ic = 0; ic < ci; ++ic) {
                                        const T v = in_px[ic];
                                        T* g_px =
                                            g_base +
                                            static_cast<std::size_t>(ic) * co;
                                        for (int oc = 0; oc < co; ++oc)
                                            g_px[oc] += v * dz_px[oc];
                                    }
                                }
                            }
                        }
                    }
                }
                if (need_input_grad) {
                    const auto& kernel = model.params[i].weight;
                    Tensor3<T> din(a_in.height, a_in.width, ci);
                    for (int y = 0; y < dz.height; ++y) {
                        for (int x = 0; x < dz.width; ++x) {
                            const T* dz_px =
                                dz.data.data() +
                                (static_cast<std::size_t>(y) * dz.width + x) * co;
                            for (int ky = 0; ky < kernel_size; ++ky) {
                                const int iy = y + ky - pad;
                                if (iy < 0 || iy >= a_in.height) continue;
                                for (int kx = 0; kx < kernel_size; ++kx) {
                                    const int ix = x + kx - pad;
                                    if (ix < 0 || ix >= a_in.width) continue;
                                    T* din_px =
                                        din.data.data() +
                                        (static_cast<std::size_t>(iy) *
                                             din.width +
                                         ix) *
                                            ci;
                                    const T* k_base =
                                        kernel.data() +
                                        (static_cast<std::size_t>(ky) *
                                             kernel_size +
                                         kx) *
                                            ci * co;
                                    for (int ic = 0; ic < ci; ++ic) {
                                        const T* k_px =
                                            k_base +
                                            static_cast<std::size_t>(ic) * co;
                                        T sum{};
                                        for (int oc = 0; oc < co; ++oc)
                                            sum += k_px[oc] * dz_px[oc];
                                        din_px[ic] += sum;
                                    }
                                }
                            }
                        }
                    }
                    grad = std::move(din);
                }
                break;
            }
            case LayerKind::Softmax:
                break;  // folded into the logit gradient above
        }

        if (i == lowest) break;
    }
    return result;
}

template <typename T>
void sgd_step(Model<T>& model, const ParamList<T>& grads, T learning_rate) {
    const auto layers = flat_layers(model.config);
    if (grads.size() != model.params.size())
        throw ConfigError("gradient list length does not match the model");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& p = model.params[i];
        if (p.empty()) continue;
        if (model.config.freeze_mask[layers[i].block]) continue;
        const auto& g = grads[i];
        if (g.weight.size() != p.weight.size() || g.bias.size() != p.bias.size())
            throw ConfigError("gradient shape mismatch at layer " +
                              std::to_string(i));
        for (std::size_t j = 0; j < p.weight.size(); ++j)
            p.weight[j] -= learning_rate * g.weight[j];
        for (std::size_t j = 0; j < p.bias.size(); ++j)
            p.bias[j] -= learning_rate * g.bias[j];
    }
}

void validate(const TrainConfig& tc) {
    if (!(tc.learning_rate > 0.0) || !std::isfinite(tc.learning_rate))
        throw ConfigError("learning rate must be positive and finite");
    if (tc.epochs < 0)
        throw ConfigError("epochs must be >= 0");
    if (tc.batch_size < 1 || tc.batches_per_epoch < 1)
        throw ConfigError("batch_size and batches_per_epoch must be >= 1");
    data::validate(tc.class_weights);
}

std::uint64_t epoch_plan_seed(std::uint64_t base_seed, int epoch) {
    return mix_seed(base_seed,
                    0x45504F4348ULL + static_cast<std::uint64_t>(epoch));
}

TrainResult train(Model<float> model, const data::SampleSource& samples,
                  const TrainConfig& tc) {
    validate(tc);
    validate(model.config);

    TrainResult result{std::move(model), {}};
    auto& net = result.model;
    const auto batch_size = static_cast<std::size_t>(tc.batch_size);
    const float inv_batch = 1.0f / static_cast<float>(tc.batch_size);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto plan = data::sample_epoch_indices(
            samples.size(), batch_size,
            static_cast<std::size_t>(tc.batches_per_epoch),
            epoch_plan_seed(tc.seed, epoch));
        for (std::size_t b = 0; b < plan.size(); ++b) {
            ParamList<float> sum = zero_params<float>(net.config);
            double loss_sum = 0.0;
            for (const std::size_t idx : plan[b]) {
                const ImageTensor image = samples.image(idx);
                auto bp = backprop(net, image, samples.label(idx),
                                   tc.class_weights);
                loss_sum += bp.loss;
                for (std::size_t i = 0; i < sum.size(); ++i) {
                    for (std::size_t j = 0; j < sum[i].weight.size(); ++j)
                        sum[i].weight[j] += bp.grads[i].weight[j];
                    for (std::size_t j = 0; j < sum[i].bias.size(); ++j)
                        sum[i].bias[j] += bp.grads[i].bias[j];
                }
            }
            for (auto& layer : sum) {
                for (auto& v : layer.weight) v *= inv_batch;
                for (auto& v : layer.bias) v *= inv_batch;
            }
            sgd_step(net, sum, static_cast<float>(tc.learning_rate));
            result.trace.push_back(
                {epoch, static_cast<int>(b),
                 loss_sum / static_cast<double>(tc.batch_size)});
        }
    }
    return result;
}

void write_loss_trace_csv(const std::filesystem::path& path,
                          const std::vector<LossRecord>& trace) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write loss trace: " + path.string());
    out << "epoch,batch,loss\n";
    char buf[64];
    for (const auto& rec : trace) {
        std::snprintf(buf, sizeof(buf), "%.10g", rec.loss);
        out << rec.epoch << ',' << rec.batch << ',' << buf << '\n';
    }
    if (!out)
        throw DataError("failed writing loss trace: " + path.string());
}

template Model<float> zero_model<float>(const NetworkConfig&);
template Model<double> zero_model<double>(const NetworkConfig&);
template Model<float> init_model<float>(const NetworkConfig&, std::uint64_t);
template Model<double> init_model<double>(const NetworkConfig&, std::uint64_t);
template Tensor3<float> conv_forward<float>(const Tensor3<float>&,
                                            const std::vector<float>&,
                                            const std::vector<float>&, int, int);
template Tensor3<double> conv_forward<double>(const Tensor3<double>&,
                                              const std::vector<double>&,
                                              const std::vector<double>&, int,
                                              int);
template Tensor3<float> maxpool_forward<float>(const Tensor3<float>&,
                                               std::vector<int>*);
template Tensor3<double> maxpool_forward<double>(const Tensor3<double>&,
                                                 std::vector<int>*);
template Prediction forward<float>(const Model<float>&, const Tensor3<float>&);
template Prediction forward<double>(const Model<double>&,
                                    const Tensor3<double>&);
template BackpropResult<float> backprop<float>(const Model<float>&,
                                               const Tensor3<float>&,
                                               BinaryLabel,
                                               const ClassWeights&);
template BackpropResult<double> backprop<double>(const Model<double>&,
                                                 const Tensor3<double>&,
                                                 BinaryLabel,
                                                 const ClassWeights&);
template void sgd_step<float>(Model<float>&, const ParamList<float>&, float);
template void sgd_step<double>(Model<double>&, const ParamList<double>&, double);

}  // namespace triagenet::nn
