#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "triagenet/conglomerate.hpp"
#include "triagenet/samples.hpp"

namespace triagenet::eval {

// Per-class accuracy at the critical threshold, confusion counts and the
// histogram of attainable index values. confusion[true][pred] with
// 0 = critical, 1 = non-critical.
struct EvalResult {
    std::size_t n_critical = 0;
    std::size_t n_noncritical = 0;
    double acc_critical = 0.0;
    double acc_noncritical = 0.0;
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::vector<std::size_t> histogram;  // count per vote total k = 0..n
    int n = 0;
    double m = 0.0;

    double index_value(std::size_t k) const {
        return m * static_cast<double>(k) / n;
    }
};

// One forward sweep over the set; the vote vectors are the cache every
// threshold analysis reuses.
std::vector<conglomerate::VoteVector> score_votes(
    const conglomerate::Ensemble& ensemble, const data::SampleSource& samples,
    int jobs = 1);

// Pure function of cached votes; no model forward happens here.
EvalResult metrics_from_votes(const std::vector<conglomerate::VoteVector>& votes,
                              const std::vector<data::BinaryLabel>& labels,
                              int n, double m,
                              const conglomerate::TriagePolicy& policy);

// Requires both classes in the test set.
EvalResult evaluate(const conglomerate::Ensemble& ensemble,
                    const data::SampleSource& samples,
                    const conglomerate::TriagePolicy& policy, int jobs = 1);

// Scores votes once, then recomputes metrics per threshold.
std::vector<std::pair<double, EvalResult>> sweep_threshold(
    const conglomerate::Ensemble& ensemble, const data::SampleSource& samples,
    const std::vector<double>& thresholds, int jobs = 1);

std::string eval_result_to_json(const EvalResult& result);

void write_histogram_csv(const std::filesystem::path& path,
                         const EvalResult& result);

}  // namespace triagenet::eval
