#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "triagenet/net.hpp"
#include "triagenet/rng.hpp"

using namespace triagenet;
using namespace triagenet::nn;

namespace {

// 4x4 single-block micro config used for hand-composed forward oracles.
NetworkConfig micro_config(std::vector<LayerSpec> head) {
    using L = LayerSpec;
    NetworkConfig config;
    config.name = "micro";
    config.input_height = 4;
    config.input_width = 4;
    config.blocks = {{L::conv(3, 3, 2), L::maxpool()}};
    config.head = std::move(head);
    config.freeze_mask = {false, false};
    validate(config);
    return config;
}

// Channel 0 is the ramp y*4+x, channels 1 and 2 are zero.
Tensor3<float> ramp_image() {
    Tensor3<float> img(4, 4, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            img.at(y, x, 0) = static_cast<float>(y * 4 + x);
    return img;
}

// Conv params: filter 0 passes input channel 0 through (center delta),
// filter 1 is all-zero with bias 1, giving a constant-1 feature map.
void fill_probe_conv(LayerParams<float>& conv) {
    const auto tap = [&](int ky, int kx, int ci, int co) -> float& {
        return conv.weight[((static_cast<std::size_t>(ky) * 3 + kx) * 3 + ci) *
                               2 +
                           co];
    };
    tap(1, 1, 0, 0) = 1.0f;
    conv.bias[1] = 1.0f;
}

std::size_t count_params(const Model<float>& model) {
    std::size_t n = 0;
    for (const auto& p : model.params) n += p.weight.size() + p.bias.size();
    return n;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("build_config(vgg16) pins the canonical 13-conv topology") {
    const auto config = build_config("vgg16");
    CHECK(config.input_height == 224);
    CHECK(config.input_width == 224);
    REQUIRE(config.blocks.size() == 5);
    const int convs_per_block[5] = {2, 2, 3, 3, 3};
    const int out_channels[5] = {64, 128, 256, 512, 512};
    for (std::size_t b = 0; b < 5; ++b) {
        REQUIRE(config.blocks[b].size() ==
                static_cast<std::size_t>(convs_per_block[b]) + 1);
        CHECK(config.blocks[b].back().kind == LayerKind::MaxPool);
        for (std::size_t j = 0; j + 1 < config.blocks[b].size(); ++j) {
            CHECK(config.blocks[b][j].kernel == 3);
            CHECK(config.blocks[b][j].out_channels == out_channels[b]);
        }
    }
    REQUIRE(config.head.size() == 5);
    CHECK(config.head[0].kind == LayerKind::Flatten);
    CHECK(config.head[1].in_width == 25088);  // 7 * 7 * 512 after five pools
    CHECK(config.head[1].out_width == 4096);
    CHECK(config.head[2].out_width == 4096);
    CHECK(config.head[3].out_width == 2);
    CHECK(config.head[4].kind == LayerKind::Softmax);
    CHECK(config.freeze_mask ==
          std::vector<bool>{true, true, true, false, false, false});
}

TEST_CASE("build_config(tiny) is the desk-scale two-block topology") {
    const auto config = build_config("tiny");
    CHECK(config.input_height == 32);
    CHECK(config.input_width == 32);
    REQUIRE(config.blocks.size() == 2);
    CHECK(config.blocks[0][0].in_channels == 3);
    CHECK(config.blocks[0][0].out_channels == 4);
    CHECK(config.blocks[1][0].in_channels == 4);
    CHECK(config.blocks[1][0].out_channels == 8);
    REQUIRE(config.head.size() == 4);
    CHECK(config.head[1].in_width == 512);  // 8 * 8 * 8 after two pools
    CHECK(config.head[1].out_width == 16);
    CHECK(config.head[2].out_width == 2);
    CHECK(config.freeze_mask == std::vector<bool>{true, false, false});
}

TEST_CASE("build_config rejects unknown names") {
    CHECK_THROWS_AS(build_config("resnet"), ConfigError);
    CHECK_THROWS_AS(build_config(""), ConfigError);
}

TEST_CASE("validate rejects shape-incompatible configs") {
    using L = LayerSpec;
    auto base = build_config("tiny");

    SUBCASE("channel mismatch between conv layers") {
        auto bad = base;
        bad.blocks[1][0] = L::conv(3, 8, 8);  // block 2 receives 4 channels
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("dense width mismatch after flatten") {
        auto bad = base;
        bad.head[1] = L::dense(100, 16);
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("final dense must be width 2") {
        auto bad = base;
        bad.head[2] = L::dense(16, 3);
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("pool on odd spatial dims") {
        auto bad = base;
        bad.input_height = 34;  // 34 -> 17, odd at the second pool
        bad.input_width = 34;
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("freeze mask length") {
        auto bad = base;
        bad.freeze_mask = {true, false};
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("even conv kernel") {
        auto bad = base;
        bad.blocks[0][0] = L::conv(2, 3, 4);
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("head must end in softmax") {
        auto bad = base;
        bad.head.pop_back();
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
    SUBCASE("block must end in maxpool") {
        auto bad = base;
        bad.blocks[0].pop_back();
        CHECK_THROWS_AS(validate(bad), ConfigError);
    }
}

TEST_CASE("flat_layers tags block ownership, head last") {
    const auto config = build_config("tiny");
    const auto layers = flat_layers(config);
    REQUIRE(layers.size() == 8);  // conv pool conv pool flatten fc fc softmax
    CHECK(layers[0].block == 0);
    CHECK(layers[1].block == 0);
    CHECK(layers[2].block == 1);
    CHECK(layers[3].block == 1);
    for (std::size_t i = 4; i < 8; ++i) CHECK(layers[i].block == 2);
}

TEST_CASE("layer_input_shapes walks the tensor shapes through the net") {
    const auto shapes = layer_input_shapes(build_config("tiny"));
    REQUIRE(shapes.size() == 8);
    CHECK(shapes[0].height == 32);
    CHECK(shapes[0].channels == 3);
    CHECK(shapes[1].channels == 4);   // after conv1
    CHECK(shapes[2].height == 16);    // after pool1
    CHECK(shapes[3].channels == 8);   // after conv2
    CHECK(shapes[4].height == 8);     // after pool2, flatten input
    CHECK(shapes[4].count() == 512);
    CHECK(shapes[5].channels == 512);  // fc1 input
    CHECK(shapes[6].channels == 16);   // fc2 input
    CHECK(shapes[7].channels == 2);    // softmax input
}

TEST_CASE("layer_names are stable store keys") {
    const auto names = layer_names(build_config("tiny"));
    const std::vector<std::string> expect = {
        "b1_conv1", "b1_pool", "b2_conv1", "b2_pool",
        "head_flatten", "head_fc1", "head_fc2", "head_softmax"};
    CHECK(names == expect);

    const auto vgg = layer_names(build_config("vgg16"));
    REQUIRE(vgg.size() == 23);
    CHECK(vgg[0] == "b1_conv1");
    CHECK(vgg[1] == "b1_conv2");
    CHECK(vgg[2] == "b1_pool");
    CHECK(vgg[18] == "head_flatten");
    CHECK(vgg[21] == "head_fc3");
    CHECK(vgg[22] == "head_softmax");
}

TEST_CASE("init_model is deterministic per seed with He-uniform bounds") {
    const auto config = build_config("tiny");
    const auto a = init_model<float>(config, 7);
    const auto b = init_model<float>(config, 7);
    const auto c = init_model<float>(config, 8);

    REQUIRE(a.params.size() == b.params.size());
    bool all_equal = true;
    bool any_diff_c = false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        all_equal = all_equal && a.params[i].weight == b.params[i].weight &&
                    a.params[i].bias == b.params[i].bias;
        any_diff_c = any_diff_c || a.params[i].weight != c.params[i].weight;
    }
    CHECK(all_equal);
    CHECK(any_diff_c);

    const auto layers = flat_layers(config);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& p = a.params[i];
        if (p.empty()) continue;
        const auto& spec = layers[i].spec;
        const double fan_in =
            spec.kind == LayerKind::Conv
                ? static_cast<double>(spec.kernel) * spec.kernel *
                      spec.in_channels
                : spec.in_width;
        const double limit = std::sqrt(6.0 / fan_in);
        double max_abs = 0.0;
        for (float w : p.weight) {
            CHECK(std::abs(w) <= limit * (1 + 1e-6));
            max_abs = std::max(max_abs, static_cast<double>(std::abs(w)));
        }
        CHECK(max_abs > 0.5 * limit);  // the draw actually spans the range
        for (float bias : p.bias) CHECK(bias == 0.0f);
    }
}

TEST_CASE("init_model fills frozen blocks too") {
    const auto model = init_model<float>(build_config("tiny"), 3);
    // Block 1 is frozen in the tiny config; its conv must still be random.
    bool any_nonzero = false;
    for (float w : model.params[0].weight) any_nonzero = any_nonzero || w != 0.0f;
    CHECK(any_nonzero);
}

TEST_CASE("zero_model has all parameters at zero and predicts 0.5") {
    const auto model = zero_model<float>(build_config("tiny"));
    CHECK(count_params(model) ==
          (3 * 3 * 3 * 4 + 4) + (3 * 3 * 4 * 8 + 8) + (512 * 16 + 16) +
              (16 * 2 + 2));
    for (const auto& p : model.params) {
        for (float w : p.weight) CHECK(w == 0.0f);
        for (float b : p.bias) CHECK(b == 0.0f);
    }
    const auto pred = forward(model, Tensor3<float>(32, 32, 3));
    CHECK(pred.p_critical == 0.5);
    CHECK(pred.p_noncritical == 0.5);
}

TEST_CASE("forward matches a hand-composed conv/pool/dense oracle") {
    const auto config =
        micro_config({LayerSpec::flatten(), LayerSpec::dense(8, 2),
                      LayerSpec::softmax()});
    auto model = zero_model<float>(config);
    fill_probe_conv(model.params[0]);

    // After conv+relu: ch0 = ramp, ch1 = 1. After pool: ch0 = {5,7,13,15},
    // ch1 = 1. Flatten (channel innermost): [5,1,7,1,13,1,15,1].
    // fc row 0 = e0 -> z_c = 5; row 1 = e2, bias 2 -> z_nc = 9.
    auto& fc = model.params[3];
    fc.weight[0] = 1.0f;
    fc.weight[8 + 2] = 1.0f;
    fc.bias[1] = 2.0f;

    const auto pred = forward(model, ramp_image());
    // softmax(5, 9): p_c = 1 / (1 + e^4)
    CHECK(pred.p_critical ==
          doctest::Approx(0.017986209962091559).epsilon(1e-9));
    CHECK(pred.p_noncritical ==
          doctest::Approx(0.98201379003790845).epsilon(1e-9));

    // Re-point row 0 at flat index 4 (pooled value 13) to confirm the
    // channel-innermost flatten order: z_c = 13 -> p_c = 1 / (1 + e^-4).
    fc.weight[0] = 0.0f;
    fc.weight[4] = 1.0f;
    const auto pred2 = forward(model, ramp_image());
    CHECK(pred2.p_critical ==
          doctest::Approx(0.98201379003790845).epsilon(1e-9));
}

TEST_CASE("hidden dense layers get ReLU, the final dense does not") {
    const auto config =
        micro_config({LayerSpec::flatten(), LayerSpec::dense(8, 3),
                      LayerSpec::dense(3, 2), LayerSpec::softmax()});
    auto model = zero_model<float>(config);
    fill_probe_conv(model.params[0]);

    // fc1: unit 0 = +5, unit 1 = -5 (clamped to 0), unit 2 = bias -1 (clamped).
    auto& fc1 = model.params[3];
    fc1.weight[0] = 1.0f;       // row 0 picks flat[0] = 5
    fc1.weight[8] = -1.0f;      // row 1 is -flat[0]
    fc1.bias[2] = -1.0f;
    // fc2: z_c = sum of hidden = 5, z_nc = bias 6.
    auto& fc2 = model.params[4];
    fc2.weight[0] = fc2.weight[1] = fc2.weight[2] = 1.0f;
    fc2.bias[1] = 6.0f;

    const auto pred = forward(model, ramp_image());
    // softmax(5, 6): p_c = 1 / (1 + e)
    CHECK(pred.p_critical == doctest::Approx(0.26894142136999512).epsilon(1e-9));

    // A negative final logit must pass through unclamped: z_c = 5 - 20 = -15.
    fc2.bias[0] = -20.0f;
    const auto low = forward(model, ramp_image());
    CHECK(low.p_critical < 1e-9);  // softmax(-15, 6), not softmax(0, 6)
}

TEST_CASE("forward rejects inputs of the wrong shape") {
    const auto model = zero_model<float>(build_config("tiny"));
    CHECK_THROWS_AS(forward(model, Tensor3<float>(16, 32, 3)), DataError);
    CHECK_THROWS_AS(forward(model, Tensor3<float>(32, 32, 1)), DataError);
}

}  // TEST_SUITE("network")
