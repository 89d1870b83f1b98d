#include "triagenet/eval.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/parallel.hpp"

namespace triagenet::eval {

std::vector<conglomerate::VoteVector> score_votes(
    const conglomerate::Ensemble& ensemble, const data::SampleSource& samples,
    int jobs) {
    std::vector<conglomerate::VoteVector> votes(samples.size());
    parallel_for(samples.size(), jobs, [&](std::size_t i) {
        votes[i] = conglomerate::vote(ensemble, samples.image(i));
    });
    return votes;
}

EvalResult metrics_from_votes(const std::vector<conglomerate::VoteVector>& votes,
                              const std::vector<data::BinaryLabel>& labels,
                              int n, double m,
                              const conglomerate::TriagePolicy& policy) {
    if (votes.size() != labels.size())
        throw ConfigError("vote and label counts disagree");
    if (votes.empty())
        throw DataError("cannot evaluate an empty set");
    conglomerate::validate(policy, m);

    EvalResult result;
    result.n = n;
    result.m = m;
    result.histogram.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t i = 0; i < votes.size(); ++i) {
        if (votes[i].votes.size() != static_cast<std::size_t>(n))
            throw ConfigError("vote vector " + std::to_string(i) +
                              " has wrong member count");
        std::size_t critical_votes = 0;
        for (const bool v : votes[i].votes) critical_votes += v ? 1 : 0;
        ++result.histogram[critical_votes];

        const auto index = conglomerate::critical_index(votes[i], m);
        const auto pred = conglomerate::classify(index, policy);
        const std::size_t t =
            labels[i] == data::BinaryLabel::Critical ? 0 : 1;
        const std::size_t p = pred == data::BinaryLabel::Critical ? 0 : 1;
        ++result.confusion[t][p];
    }
    result.n_critical = result.confusion[0][0] + result.confusion[0][1];
    result.n_noncritical = result.confusion[1][0] + result.confusion[1][1];
    if (result.n_critical > 0)
        result.acc_critical = static_cast<double>(result.confusion[0][0]) /
                              static_cast<double>(result.n_critical);
    if (result.n_noncritical > 0)
        result.acc_noncritical = static_cast<double>(result.confusion[1][1]) /
                                 static_cast<double>(result.n_noncritical);
    return result;
}

namespace {

std::vector<data::BinaryLabel> collect_labels(
    const data::SampleSource& samples) {
    std::vector<data::BinaryLabel> labels;
    labels.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        labels.push_back(samples.label(i));
    return labels;
}

}  // namespace

EvalResult evaluate(const conglomerate::Ensemble& ensemble,
                    const data::SampleSource& samples,
                    const conglomerate::TriagePolicy& policy, int jobs) {
    const auto labels = collect_labels(samples);
    bool has_critical = false, has_noncritical = false;
    for (const auto label : labels)
        (label == data::BinaryLabel::Critical ? has_critical
                                              : has_noncritical) = true;
    if (!has_critical || !has_noncritical)
        throw DataError("evaluation needs both classes in the test set");

    const auto votes = score_votes(ensemble, samples, jobs);
    return metrics_from_votes(votes, labels, ensemble.spec.n, ensemble.spec.m,
                              policy);
}

std::vector<std::pair<double, EvalResult>> sweep_threshold(
    const conglomerate::Ensemble& ensemble, const data::SampleSource& samples,
    const std::vector<double>& thresholds, int jobs) {
    if (thresholds.empty())
        throw ConfigError("threshold sweep needs at least one value");
    const auto labels = collect_labels(samples);
    const auto votes = score_votes(ensemble, samples, jobs);

    std::vector<std::pair<double, EvalResult>> results;
    results.reserve(thresholds.size());
    for (const double tau : thresholds)
        results.emplace_back(
            tau, metrics_from_votes(votes, labels, ensemble.spec.n,
                                    ensemble.spec.m, {tau}));
    return results;
}

std::string eval_result_to_json(const EvalResult& result) {
    nlohmann::json j;
    j["n_critical"] = result.n_critical;
    j["n_noncritical"] = result.n_noncritical;
    j["acc_critical"] = result.acc_critical;
    j["acc_noncritical"] = result.acc_noncritical;
    j["confusion"] = {{result.confusion[0][0], result.confusion[0][1]},
                      {result.confusion[1][0], result.confusion[1][1]}};
    j["index_histogram"] = nlohmann::json::array();
    for (std::size_t k = 0; k < result.histogram.size(); ++k)
        j["index_histogram"].push_back(
            {{"index", result.index_value(k)}, {"count", result.histogram[k]}});
    return j.dump(2) + "\n";
}

void write_histogram_csv(const std::filesystem::path& path,
                         const EvalResult& result) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write histogram: " + path.string());
    out << "index,count\n";
    char buf[64];
    for (std::size_t k = 0; k < result.histogram.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.10g", result.index_value(k));
        out << buf << ',' << result.histogram[k] << '\n';
    }
    if (!out)
        throw DataError("failed writing histogram: " + path.string());
}

}  // namespace triagenet::eval
