#include <bit>
#include <fstream>
#include <map>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/net.hpp"

static_assert(std::endian::native == std::endian::little,
              "model store writes raw little-endian float32 tensors");

namespace triagenet::nn {

namespace {

using nlohmann::json;

json layer_to_json(const LayerSpec& spec) {
    json j;
    j["kind"] = to_string(spec.kind);
    switch (spec.kind) {
        case LayerKind::Conv:
            j["kernel"] = spec.kernel;
            j["in_channels"] = spec.in_channels;
            j["out_channels"] = spec.out_channels;
            break;
        case LayerKind::Dense:
            j["in_width"] = spec.in_width;
            j["out_width"] = spec.out_width;
            break;
        default:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv")
        return LayerSpec::conv(j.at("kernel").get<int>(),
                               j.at("in_channels").get<int>(),
                               j.at("out_channels").get<int>());
    if (kind == "maxpool") return LayerSpec::maxpool();
    if (kind == "flatten") return LayerSpec::flatten();
    if (kind == "dense")
        return LayerSpec::dense(j.at("in_width").get<int>(),
                                j.at("out_width").get<int>());
    if (kind == "softmax") return LayerSpec::softmax();
    throw DataError("unknown layer kind in stored config: " + kind);
}

json config_to_json_obj(const NetworkConfig& config) {
    json j;
    j["name"] = config.name;
    j["input_height"] = config.input_height;
    j["input_width"] = config.input_width;
    j["blocks"] = json::array();
    for (const auto& block : config.blocks) {
        json bj = json::array();
        for (const auto& spec : block) bj.push_back(layer_to_json(spec));
        j["blocks"].push_back(std::move(bj));
    }
    j["head"] = json::array();
    for (const auto& spec : config.head) j["head"].push_back(layer_to_json(spec));
    j["freeze_mask"] = json::array();
    for (const bool f : config.freeze_mask) j["freeze_mask"].push_back(f);
    return j;
}

NetworkConfig config_from_json_obj(const json& j) {
    NetworkConfig config;
    config.name = j.at("name").get<std::string>();
    config.input_height = j.at("input_height").get<int>();
    config.input_width = j.at("input_width").get<int>();
    for (const auto& bj : j.at("blocks")) {
        std::vector<LayerSpec> block;
        for (const auto& lj : bj) block.push_back(layer_from_json(lj));
        config.blocks.push_back(std::move(block));
    }
    for (const auto& lj : j.at("head"))
        config.head.push_back(layer_from_json(lj));
    for (const auto& fj : j.at("freeze_mask"))
        config.freeze_mask.push_back(fj.get<bool>());
    return config;
}

void write_floats(const std::filesystem::path& path,
                  const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write tensor file: " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out)
        throw DataError("failed writing tensor file: " + path.string());
}

std::vector<float> read_floats(const std::filesystem::path& path,
                               std::size_t expected) {
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec)
        throw DataError("cannot stat tensor file: " + path.string());
    if (bytes != expected * sizeof(float))
        throw DataError("tensor file " + path.string() + " holds " +
                        std::to_string(bytes) + " bytes, expected " +
                        std::to_string(expected * sizeof(float)));
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read tensor file: " + path.string());
    std::vector<float> values(expected);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(expected * sizeof(float)));
    if (!in)
        throw DataError("failed reading tensor file: " + path.string());
    return values;
}

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

std::string config_to_json(const NetworkConfig& config) {
    return config_to_json_obj(config).dump(2) + "\n";
}

NetworkConfig config_from_json(const std::string& json_text) {
    try {
        return config_from_json_obj(json::parse(json_text));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed network config JSON: ") +
                        e.what());
    }
}

void save_model(const Model<float>& model, const std::filesystem::path& dir) {
    validate(model.config);
    std::filesystem::create_directories(dir / "tensors");

    const auto layers = flat_layers(model.config);
    const auto names = layer_names(model.config);
    json meta;
    meta["format"] = "triagenet-model";
    meta["version"] = 1;
    meta["dtype"] = "float32";
    meta["byte_order"] = "little";
    meta["config"] = config_to_json_obj(model.config);
    meta["layers"] = json::array();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& p = model.params[i];
        if (p.empty()) continue;
        json lj;
        lj["name"] = names[i];
        lj["weight_count"] = p.weight.size();
        lj["bias_count"] = p.bias.size();
        meta["layers"].push_back(std::move(lj));
        write_floats(dir / "tensors" / (names[i] + ".weight.f32"), p.weight);
        write_floats(dir / "tensors" / (names[i] + ".bias.f32"), p.bias);
    }

    std::ofstream out(dir / "model.json");
    if (!out)
        throw DataError("cannot write " + (dir / "model.json").string());
    out << meta.dump(2) << '\n';
    if (!out)
        throw DataError("failed writing " + (dir / "model.json").string());
}

Model<float> load_model(const std::filesystem::path& dir) {
    const json meta = parse_json_file(dir / "model.json");
    try {
        if (meta.at("format").get<std::string>() != "triagenet-model")
            throw DataError("not a model store: " + dir.string());
        if (meta.at("dtype").get<std::string>() != "float32" ||
            meta.at("byte_order").get<std::string>() != "little")
            throw DataError("unsupported tensor encoding in " + dir.string());

        const NetworkConfig config = config_from_json_obj(meta.at("config"));
        validate(config);
        Model<float> model = zero_model<float>(config);

        std::map<std::string, std::pair<std::size_t, std::size_t>> declared;
        for (const auto& lj : meta.at("layers"))
            declared[lj.at("name").get<std::string>()] = {
                lj.at("weight_count").get<std::size_t>(),
                lj.at("bias_count").get<std::size_t>()};

        const auto names = layer_names(config);
        for (std::size_t i = 0; i < model.params.size(); ++i) {
            auto& p = model.params[i];
            if (p.empty()) continue;
            const auto it = declared.find(names[i]);
            if (it == declared.end())
                throw DataError("model store is missing layer " + names[i]);
            if (it->second.first != p.weight.size() ||
                it->second.second != p.bias.size())
                throw DataError("stored tensor counts for " + names[i] +
                                " do not match the network config");
            p.weight = read_floats(dir / "tensors" / (names[i] + ".weight.f32"),
                                   p.weight.size());
            p.bias = read_floats(dir / "tensors" / (names[i] + ".bias.f32"),
                                 p.bias.size());
        }
        return model;
    } catch (const json::exception& e) {
        throw DataError("malformed model store in " + dir.string() + ": " +
                        e.what());
    }
}

Model<float> load_model(const std::filesystem::path& dir,
                        const NetworkConfig& expected) {
    Model<float> model = load_model(dir);
    if (config_to_json_obj(model.config) != config_to_json_obj(expected))
        throw ConfigError("stored network config in " + dir.string() +
                          " does not match the expected topology");
    return model;
}

}  // namespace triagenet::nn
