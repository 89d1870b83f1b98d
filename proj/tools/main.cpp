#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "triagenet/conglomerate.hpp"
#include "triagenet/dataset.hpp"
#include "triagenet/errors.hpp"
#include "triagenet/eval.hpp"
#include "triagenet/image_io.hpp"
#include "triagenet/net.hpp"
#include "triagenet/samples.hpp"
#include "triagenet/synthetic.hpp"
#include "triagenet/triage.hpp"

namespace triagenet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
    std::string manifest;
    std::string image_dir;
    std::string store;
    std::string out;
    std::string arch = "vgg16";
    int n = 5;
    double m = 10.0;
    double beta = 2.0;
    double tau = 3.0;
    double lr = 1e-6;
    int epochs = 20;
    int batch_size = 20;
    int batches_per_epoch = 70;
    std::uint64_t seed = 0;
    int jobs = 1;
    double test_fraction = 0.5;
    int image_size = 32;
    // explicit baseline class weights; 0 = derive from the training manifest
    double weight_critical = 0.0;
    double weight_noncritical = 0.0;
    bool synthetic = false;
    std::string sweep;
    std::vector<std::string> images;  // triage positional arguments
};

void apply_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config file " + path + ": " + e.what());
    }

    auto str = [&](const char* key, std::string& out) {
        if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    try {
        str("manifest", rc.manifest);
        str("image_dir", rc.image_dir);
        str("store", rc.store);
        str("out", rc.out);
        str("arch", rc.arch);
        str("sweep", rc.sweep);
        if (j.contains("n")) rc.n = j.at("n").get<int>();
        if (j.contains("m")) rc.m = j.at("m").get<double>();
        if (j.contains("beta")) rc.beta = j.at("beta").get<double>();
        if (j.contains("tau")) rc.tau = j.at("tau").get<double>();
        if (j.contains("lr")) rc.lr = j.at("lr").get<double>();
        if (j.contains("epochs")) rc.epochs = j.at("epochs").get<int>();
        if (j.contains("batch_size"))
            rc.batch_size = j.at("batch_size").get<int>();
        if (j.contains("batches_per_epoch"))
            rc.batches_per_epoch = j.at("batches_per_epoch").get<int>();
        if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("jobs")) rc.jobs = j.at("jobs").get<int>();
        if (j.contains("test_fraction"))
            rc.test_fraction = j.at("test_fraction").get<double>();
        if (j.contains("image_size"))
            rc.image_size = j.at("image_size").get<int>();
        if (j.contains("weight_critical"))
            rc.weight_critical = j.at("weight_critical").get<double>();
        if (j.contains("weight_noncritical"))
            rc.weight_noncritical = j.at("weight_noncritical").get<double>();
        if (j.contains("synthetic"))
            rc.synthetic = j.at("synthetic").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value in config file " + path + ": " + e.what());
    }

    static const std::vector<std::string> known = {
        "manifest",    "image_dir",         "store",
        "out",         "arch",              "sweep",
        "n",           "m",                 "beta",
        "tau",         "lr",                "epochs",
        "batch_size",  "batches_per_epoch", "seed",
        "jobs",        "test_fraction",     "image_size",
        "weight_critical", "weight_noncritical", "synthetic"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown key \"" + key + "\" in config file " +
                              path);
}

namespace {

void require(bool present, const char* what) {
    if (!present)
        throw ConfigError(std::string("missing required option: ") + what);
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
    if (!out)
        throw DataError("failed writing " + path.string());
}

json distribution_json(const std::vector<data::ManifestEntry>& entries) {
    const auto dist = data::class_distribution(entries);
    const auto weights = data::baseline_weights(dist);
    return json{{"n_critical", dist.n_critical},
                {"n_noncritical", dist.n_noncritical},
                {"f_critical", dist.f_critical},
                {"f_noncritical", dist.f_noncritical},
                {"baseline_weights",
                 {{"critical", weights.critical},
                  {"noncritical", weights.noncritical}}}};
}

std::vector<double> parse_sweep(const std::string& text) {
    std::vector<double> thresholds;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        try {
            thresholds.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw ConfigError("bad --sweep value: \"" + token + "\"");
        }
    }
    if (thresholds.empty())
        throw ConfigError("--sweep needs a comma-separated threshold list");
    return thresholds;
}

data::ClassWeights resolve_baseline(
    const RunConfig& rc, const std::vector<data::ManifestEntry>& entries) {
    if (rc.weight_critical != 0.0 || rc.weight_noncritical != 0.0) {
        if (rc.weight_critical == 0.0 || rc.weight_noncritical == 0.0)
            throw ConfigError("--weight-critical and --weight-noncritical "
                              "must be given together");
        data::ClassWeights w{rc.weight_critical, rc.weight_noncritical};
        data::validate(w);
        return w;
    }
    return data::baseline_weights(data::class_distribution(entries));
}

}  // namespace

int cmd_prepare(const RunConfig& rc) {
    require(!rc.out.empty(), "--out");
    const fs::path out_dir = rc.out;

    if (rc.synthetic) {
        synth::SyntheticSpec spec;
        spec.image_size = rc.image_size;
        spec.seed = rc.seed;
        const auto fixture = synth::generate(spec, out_dir);
        const auto entries =
            data::load_manifest(fixture.train_manifest, fixture.image_dir);
        write_text_file(out_dir / "distribution.json",
                        distribution_json(entries).dump(2) + "\n");
        std::cout << "synthetic fixture written to " << out_dir.string() << "\n"
                  << "  train manifest: " << fixture.train_manifest.string()
                  << "\n"
                  << "  test manifest:  " << fixture.test_manifest.string()
                  << "\n";
        return 0;
    }

    require(!rc.manifest.empty(), "--manifest");
    require(!rc.image_dir.empty(), "--image-dir");
    const auto entries = data::load_manifest(rc.manifest, rc.image_dir);
    auto [train, test] = data::split(entries, rc.test_fraction, rc.seed);

    fs::create_directories(out_dir);
    data::write_manifest(out_dir / "train_manifest.csv", train);
    data::write_manifest(out_dir / "test_manifest.csv", test);
    json report = distribution_json(entries);
    report["n_train"] = train.size();
    report["n_test"] = test.size();
    write_text_file(out_dir / "distribution.json", report.dump(2) + "\n");

    std::cout << "split " << entries.size() << " entries into " << train.size()
              << " train / " << test.size() << " test\n"
              << "reports under " << out_dir.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& rc) {
    require(!rc.manifest.empty(), "--manifest");
    require(!rc.image_dir.empty(), "--image-dir");
    require(!rc.store.empty(), "--store");

    const auto config = nn::build_config(rc.arch);
    const auto entries = data::load_manifest(rc.manifest, rc.image_dir);

    conglomerate::EnsembleSpec spec;
    spec.n = rc.n;
    spec.m = rc.m;
    spec.beta = rc.beta;
    spec.baseline = resolve_baseline(rc, entries);
    spec.member_train.learning_rate = rc.lr;
    spec.member_train.epochs = rc.epochs;
    spec.member_train.batch_size = rc.batch_size;
    spec.member_train.batches_per_epoch = rc.batches_per_epoch;
    spec.member_train.class_weights = spec.baseline;
    spec.member_train.seed = rc.seed;
    spec.member_seeds = conglomerate::default_member_seeds(rc.seed, rc.n);
    conglomerate::validate(spec);

    const auto samples =
        data::open_samples(entries, config.input_height, config.input_width);

    std::cout << "training " << spec.n << " x " << config.name << " on "
              << samples->size() << " images (" << rc.epochs << " epochs, "
              << rc.batches_per_epoch << " x " << rc.batch_size
              << " per epoch)\n";

    std::vector<std::vector<nn::LossRecord>> traces;
    const auto ensemble =
        conglomerate::train_ensemble(spec, config, *samples, rc.jobs, &traces);

    for (std::size_t k = 0; k < traces.size(); ++k) {
        double epoch_sum = 0.0;
        int epoch_batches = 0;
        for (std::size_t i = 0; i < traces[k].size(); ++i) {
            epoch_sum += traces[k][i].loss;
            ++epoch_batches;
            const bool epoch_end = i + 1 == traces[k].size() ||
                                   traces[k][i + 1].epoch != traces[k][i].epoch;
            if (epoch_end) {
                std::printf("member %zu epoch %d/%d mean loss %.6f\n", k,
                            traces[k][i].epoch + 1, rc.epochs,
                            epoch_sum / epoch_batches);
                epoch_sum = 0.0;
                epoch_batches = 0;
            }
        }
    }

    const fs::path store_dir = rc.store;
    try {
        conglomerate::save_ensemble(ensemble, store_dir);
        for (std::size_t k = 0; k < traces.size(); ++k)
            nn::write_loss_trace_csv(
                store_dir / ("member_" + std::to_string(k)) / "loss.csv",
                traces[k]);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(store_dir, ec);
        throw;
    }
    std::cout << "ensemble store written to " << store_dir.string() << "\n";
    return 0;
}

int cmd_triage(const RunConfig& rc) {
    require(!rc.store.empty(), "--store");
    const auto ensemble = conglomerate::load_ensemble(rc.store);
    const int height = ensemble.config.input_height;
    const int width = ensemble.config.input_width;

    std::vector<std::pair<std::string, ImageTensor>> batch;
    if (!rc.images.empty()) {
        for (const auto& path : rc.images)
            batch.emplace_back(fs::path(path).stem().string(),
                               data::load_image_file(path, height, width));
    } else if (!rc.manifest.empty()) {
        require(!rc.image_dir.empty(), "--image-dir");
        for (const auto& entry : data::load_manifest(rc.manifest, rc.image_dir))
            batch.emplace_back(entry.image_id,
                               data::load_image(entry, height, width));
    } else {
        throw ConfigError(
            "triage needs image files or --manifest with --image-dir");
    }

    const conglomerate::TriagePolicy policy{rc.tau};
    auto records = triage::score_batch(ensemble, batch, policy, rc.jobs);
    const auto report = triage::order(std::move(records), policy, ensemble.id);

    if (!rc.out.empty()) {
        fs::create_directories(rc.out);
        write_text_file(fs::path(rc.out) / "triage.json",
                        triage::render_report(report, triage::ReportFormat::Json));
        write_text_file(fs::path(rc.out) / "triage.csv",
                        triage::render_report(report, triage::ReportFormat::Csv));
    }
    std::cout << triage::render_report(report, triage::ReportFormat::Text);
    return 0;
}

int cmd_eval(const RunConfig& rc) {
    require(!rc.store.empty(), "--store");
    require(!rc.manifest.empty(), "--manifest");
    require(!rc.image_dir.empty(), "--image-dir");
    require(!rc.out.empty(), "--out");

    const auto ensemble = conglomerate::load_ensemble(rc.store);
    const auto entries = data::load_manifest(rc.manifest, rc.image_dir);
    const auto samples = data::open_samples(entries, ensemble.config.input_height,
                                            ensemble.config.input_width);
    const conglomerate::TriagePolicy policy{rc.tau};

    fs::create_directories(rc.out);
    const auto result = eval::evaluate(ensemble, *samples, policy, rc.jobs);
    write_text_file(fs::path(rc.out) / "eval.json",
                    eval::eval_result_to_json(result));
    eval::write_histogram_csv(fs::path(rc.out) / "histogram.csv", result);
    std::printf("critical accuracy %.4f (%zu/%zu), non-critical accuracy "
                "%.4f (%zu/%zu)\n",
                result.acc_critical, result.confusion[0][0], result.n_critical,
                result.acc_noncritical, result.confusion[1][1],
                result.n_noncritical);

    if (!rc.sweep.empty()) {
        const auto thresholds = parse_sweep(rc.sweep);
        const auto swept =
            eval::sweep_threshold(ensemble, *samples, thresholds, rc.jobs);
        json out = json::array();
        for (const auto& [tau, res] : swept)
            out.push_back({{"tau", tau},
                           {"result", json::parse(eval::eval_result_to_json(res))}});
        write_text_file(fs::path(rc.out) / "sweep.json", out.dump(2) + "\n");
        for (const auto& [tau, res] : swept)
            std::printf("tau %.2f: critical %.4f, non-critical %.4f\n", tau,
                        res.acc_critical, res.acc_noncritical);
    }
    return 0;
}

}  // namespace triagenet::cli

int main(int argc, char** argv) {
    using namespace triagenet;
    cli::RunConfig rc;

    // The config file is applied before flag parsing so flags win.
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc)
            config_path = argv[i + 1];
        else if (arg.rfind("--config=", 0) == 0)
            config_path = arg.substr(9);
    }
    try {
        if (!config_path.empty()) cli::apply_config_file(rc, config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    CLI::App app{"ensemble-based critical-image triage"};
    app.require_subcommand(1);
    std::string config_dummy;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_dummy,
                        "JSON config file; flags override its values");
        cmd->add_option("--seed", rc.seed, "base RNG seed");
        cmd->add_option("--jobs", rc.jobs, "worker thread cap");
    };

    auto* prepare = app.add_subcommand(
        "prepare", "split a manifest or generate the synthetic fixture");
    add_common(prepare);
    prepare->add_option("--manifest", rc.manifest, "input manifest CSV");
    prepare->add_option("--image-dir", rc.image_dir, "image directory");
    prepare->add_option("--out", rc.out, "output directory");
    prepare->add_option("--test-fraction", rc.test_fraction,
                        "held-out fraction per class");
    prepare->add_flag("--synthetic", rc.synthetic,
                      "generate the seeded synthetic fixture instead");
    prepare->add_option("--image-size", rc.image_size,
                        "synthetic image edge length");

    auto* train =
        app.add_subcommand("train", "train an ensemble and write its store");
    add_common(train);
    train->add_option("--manifest", rc.manifest, "training manifest CSV");
    train->add_option("--image-dir", rc.image_dir, "image directory");
    train->add_option("--store", rc.store, "ensemble store directory");
    train->add_option("--arch", rc.arch, "network architecture")
        ->check(CLI::IsMember({"vgg16", "tiny"}));
    train->add_option("--n", rc.n, "ensemble member count");
    train->add_option("--m", rc.m, "critical index scale maximum");
    train->add_option("--beta", rc.beta, "class-weight bias strength");
    train->add_option("--lr", rc.lr, "SGD learning rate");
    train->add_option("--epochs", rc.epochs, "training epochs");
    train->add_option("--batch-size", rc.batch_size, "images per batch");
    train->add_option("--batches-per-epoch", rc.batches_per_epoch,
                      "batches per epoch");
    train->add_option("--weight-critical", rc.weight_critical,
                      "explicit baseline critical weight");
    train->add_option("--weight-noncritical", rc.weight_noncritical,
                      "explicit baseline non-critical weight");

    auto* triage_cmd = app.add_subcommand(
        "triage", "order a batch of images from most to least critical");
    add_common(triage_cmd);
    triage_cmd->add_option("images", rc.images, "image files to triage");
    triage_cmd->add_option("--manifest", rc.manifest,
                           "manifest CSV naming the batch");
    triage_cmd->add_option("--image-dir", rc.image_dir, "image directory");
    triage_cmd->add_option("--store", rc.store, "ensemble store directory");
    triage_cmd->add_option("--out", rc.out, "report output directory");
    triage_cmd->add_option("--tau", rc.tau, "critical threshold");

    auto* eval_cmd = app.add_subcommand(
        "eval", "per-class accuracy of a store on a labeled manifest");
    add_common(eval_cmd);
    eval_cmd->add_option("--manifest", rc.manifest, "test manifest CSV");
    eval_cmd->add_option("--image-dir", rc.image_dir, "image directory");
    eval_cmd->add_option("--store", rc.store, "ensemble store directory");
    eval_cmd->add_option("--out", rc.out, "output directory");
    eval_cmd->add_option("--tau", rc.tau, "critical threshold");
    eval_cmd->add_option("--sweep", rc.sweep,
                         "comma-separated threshold list to sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(prepare)) return cli::cmd_prepare(rc);
        if (app.got_subcommand(train)) return cli::cmd_train(rc);
        if (app.got_subcommand(triage_cmd)) return cli::cmd_triage(rc);
        if (app.got_subcommand(eval_cmd)) return cli::cmd_eval(rc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
