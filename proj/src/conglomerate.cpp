#include "triagenet/conglomerate.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/parallel.hpp"
#include "triagenet/rng.hpp"

namespace triagenet::conglomerate {

namespace {

using nlohmann::json;

json weights_to_json(const ClassWeights& w) {
    return json{{"critical", w.critical}, {"noncritical", w.noncritical}};
}

ClassWeights weights_from_json(const json& j) {
    ClassWeights w;
    w.critical = j.at("critical").get<double>();
    w.noncritical = j.at("noncritical").get<double>();
    return w;
}

json train_config_to_json(const nn::TrainConfig& tc) {
    json j;
    j["learning_rate"] = tc.learning_rate;
    j["epochs"] = tc.epochs;
    j["batch_size"] = tc.batch_size;
    j["batches_per_epoch"] = tc.batches_per_epoch;
    j["class_weights"] = weights_to_json(tc.class_weights);
    j["seed"] = tc.seed;
    return j;
}

nn::TrainConfig train_config_from_json(const json& j) {
    nn::TrainConfig tc;
    tc.learning_rate = j.at("learning_rate").get<double>();
    tc.epochs = j.at("epochs").get<int>();
    tc.batch_size = j.at("batch_size").get<int>();
    tc.batches_per_epoch = j.at("batches_per_epoch").get<int>();
    tc.class_weights = weights_from_json(j.at("class_weights"));
    tc.seed = j.at("seed").get<std::uint64_t>();
    return tc;
}

std::string member_dir_name(int k) {
    return "member_" + std::to_string(k);
}

}  // namespace

std::vector<std::uint64_t> default_member_seeds(std::uint64_t base_seed, int n) {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        seeds.push_back(base_seed + static_cast<std::uint64_t>(k));
    return seeds;
}

void validate(const EnsembleSpec& spec) {
    if (spec.n < 1)
        throw ConfigError("ensemble needs at least one member");
    if (!(spec.m > 0.0) || !std::isfinite(spec.m))
        throw ConfigError("index scale m must be positive");
    if (!(spec.beta >= 1.0) || !std::isfinite(spec.beta))
        throw ConfigError("bias strength beta must be >= 1");
    data::validate(spec.baseline);
    nn::validate(spec.member_train);
    if (spec.member_seeds.size() != static_cast<std::size_t>(spec.n))
        throw ConfigError("expected " + std::to_string(spec.n) +
                          " member seeds, got " +
                          std::to_string(spec.member_seeds.size()));
    const std::set<std::uint64_t> unique(spec.member_seeds.begin(),
                                         spec.member_seeds.end());
    if (unique.size() != spec.member_seeds.size())
        throw ConfigError("member seeds must be distinct");
}

void validate(const TriagePolicy& policy, double m) {
    if (!(policy.threshold > 0.0) || !(policy.threshold < m))
        throw ConfigError("critical threshold must lie in (0, m); got " +
                          std::to_string(policy.threshold) + " with m = " +
                          std::to_string(m));
}

double delta(int n, double m) {
    if (n < 1)
        throw ConfigError("delta needs n >= 1");
    return m / static_cast<double>(n);
}

std::vector<ClassWeights> weight_schedule(const EnsembleSpec& spec) {
    std::vector<ClassWeights> schedule;
    schedule.reserve(static_cast<std::size_t>(spec.n));
    for (int k = 0; k < spec.n; ++k) {
        // geometric ramp from beta down to 1/beta across members
        const double exponent =
            spec.n == 1 ? 0.0
                        : 1.0 - 2.0 * static_cast<double>(k) /
                                    static_cast<double>(spec.n - 1);
        const double g = std::pow(spec.beta, exponent);
        ClassWeights w;
        w.critical = spec.baseline.critical * g;
        w.noncritical = spec.baseline.noncritical / g;
        schedule.push_back(w);
    }
    return schedule;
}

Ensemble train_ensemble(const EnsembleSpec& spec,
                        const nn::NetworkConfig& config,
                        const data::SampleSource& samples, int jobs,
                        std::vector<std::vector<nn::LossRecord>>* traces) {
    validate(spec);
    nn::validate(config);

    Ensemble ensemble;
    ensemble.spec = spec;
    ensemble.config = config;
    ensemble.id = config.name + "-n" + std::to_string(spec.n) + "-seed" +
                  std::to_string(spec.member_train.seed);
    ensemble.member_weights = weight_schedule(spec);
    ensemble.members.resize(static_cast<std::size_t>(spec.n));
    if (traces) traces->assign(ensemble.members.size(), {});

    // Same topology and epoch plan for every member; only the class weights
    // and the init seed vary.
    parallel_for(static_cast<std::size_t>(spec.n), jobs, [&](std::size_t k) {
        try {
            nn::TrainConfig tc = spec.member_train;
            tc.class_weights = ensemble.member_weights[k];
            auto model = nn::init_model<float>(config, spec.member_seeds[k]);
            auto result = nn::train(std::move(model), samples, tc);
            ensemble.members[k] = std::move(result.model);
            if (traces) (*traces)[k] = std::move(result.trace);
        } catch (const std::exception& e) {
            throw TrainError("member " + std::to_string(k) +
                             " failed: " + e.what());
        }
    });
    return ensemble;
}

VoteVector make_vote_vector(const std::vector<double>& critical_probs) {
    VoteVector v;
    v.critical_probs = critical_probs;
    v.votes.reserve(critical_probs.size());
    for (const double p : critical_probs) v.votes.push_back(p > 0.5);
    return v;
}

VoteVector vote(const Ensemble& ensemble, const ImageTensor& image) {
    std::vector<double> probs(ensemble.members.size());
    for (std::size_t k = 0; k < ensemble.members.size(); ++k)
        probs[k] = nn::forward(ensemble.members[k], image).p_critical;
    return make_vote_vector(probs);
}

CriticalIndex critical_index(const VoteVector& votes, double m) {
    if (votes.votes.empty())
        throw ConfigError("vote vector is empty");
    std::size_t critical = 0;
    for (const bool v : votes.votes) critical += v ? 1 : 0;
    return {m * static_cast<double>(critical) /
            static_cast<double>(votes.votes.size())};
}

BinaryLabel classify(const CriticalIndex& index, const TriagePolicy& policy) {
    return index.value > policy.threshold ? BinaryLabel::Critical
                                          : BinaryLabel::NonCritical;
}

double tiebreak_score(const VoteVector& votes) {
    if (votes.critical_probs.empty())
        throw ConfigError("vote vector is empty");
    double sum = 0.0;
    for (const double p : votes.critical_probs) sum += p;
    return sum / static_cast<double>(votes.critical_probs.size());
}

void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir) {
    validate(ensemble.spec);
    if (ensemble.members.size() != static_cast<std::size_t>(ensemble.spec.n) ||
        ensemble.member_weights.size() != ensemble.members.size())
        throw ConfigError("ensemble member count does not match its spec");
    std::filesystem::create_directories(dir);

    json meta;
    meta["format"] = "triagenet-ensemble";
    meta["version"] = 1;
    meta["id"] = ensemble.id;
    meta["n"] = ensemble.spec.n;
    meta["m"] = ensemble.spec.m;
    meta["beta"] = ensemble.spec.beta;
    meta["baseline"] = weights_to_json(ensemble.spec.baseline);
    meta["member_train"] = train_config_to_json(ensemble.spec.member_train);
    meta["member_seeds"] = ensemble.spec.member_seeds;
    meta["member_weights"] = json::array();
    for (const auto& w : ensemble.member_weights)
        meta["member_weights"].push_back(weights_to_json(w));

    for (std::size_t k = 0; k < ensemble.members.size(); ++k)
        nn::save_model(ensemble.members[k],
                       dir / member_dir_name(static_cast<int>(k)));

    std::ofstream out(dir / "ensemble.json");
    if (!out)
        throw DataError("cannot write " + (dir / "ensemble.json").string());
    out << meta.dump(2) << '\n';
    if (!out)
        throw DataError("failed writing " + (dir / "ensemble.json").string());
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
    std::ifstream in(dir / "ensemble.json");
    if (!in)
        throw DataError("cannot open " + (dir / "ensemble.json").string());
    json meta;
    try {
        meta = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " +
                        (dir / "ensemble.json").string() + ": " + e.what());
    }

    Ensemble ensemble;
    try {
        if (meta.at("format").get<std::string>() != "triagenet-ensemble")
            throw DataError("not an ensemble store: " + dir.string());
        ensemble.id = meta.at("id").get<std::string>();
        ensemble.spec.n = meta.at("n").get<int>();
        ensemble.spec.m = meta.at("m").get<double>();
        ensemble.spec.beta = meta.at("beta").get<double>();
        ensemble.spec.baseline = weights_from_json(meta.at("baseline"));
        ensemble.spec.member_train =
            train_config_from_json(meta.at("member_train"));
        ensemble.spec.member_seeds =
            meta.at("member_seeds").get<std::vector<std::uint64_t>>();
        for (const auto& wj : meta.at("member_weights"))
            ensemble.member_weights.push_back(weights_from_json(wj));
    } catch (const json::exception& e) {
        throw DataError("malformed ensemble store in " + dir.string() + ": " +
                        e.what());
    }
    validate(ensemble.spec);
    if (ensemble.member_weights.size() !=
        static_cast<std::size_t>(ensemble.spec.n))
        throw DataError("ensemble store lists " +
                        std::to_string(ensemble.member_weights.size()) +
                        " member weights for n = " +
                        std::to_string(ensemble.spec.n));

    for (int k = 0; k < ensemble.spec.n; ++k)
        ensemble.members.push_back(nn::load_model(dir / member_dir_name(k)));
    ensemble.config = ensemble.members.front().config;
    for (const auto& member : ensemble.members)
        if (nn::config_to_json(member.config) !=
            nn::config_to_json(ensemble.config))
            throw DataError("ensemble members disagree on network topology");
    return ensemble;
}

}  // namespace triagenet::conglomerate
