#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "triagenet/net.hpp"

namespace triagenet::conglomerate {

using data::BinaryLabel;
using data::ClassWeights;

// n independently trained members vote on a 0..m index scale; bias_strength
// beta sets how far the per-member class weights are skewed away from the
// baseline (member 0 favors critical, member n-1 favors non-critical).
struct EnsembleSpec {
    int n = 5;
    double m = 10.0;
    double beta = 2.0;
    ClassWeights baseline;
    nn::TrainConfig member_train;
    std::vector<std::uint64_t> member_seeds;
};

std::vector<std::uint64_t> default_member_seeds(std::uint64_t base_seed, int n);

void validate(const EnsembleSpec& spec);

struct Ensemble {
    EnsembleSpec spec;
    std::string id;
    nn::NetworkConfig config;
    std::vector<nn::Model<float>> members;
    std::vector<ClassWeights> member_weights;
};

struct VoteVector {
    std::vector<bool> votes;            // true = critical
    std::vector<double> critical_probs; // retained for tie-breaking
};

struct CriticalIndex {
    double value = 0.0;
};

struct TriagePolicy {
    double threshold = 3.0;
};

void validate(const TriagePolicy& policy, double m);

// Smallest gap between consecutive attainable index values: m / n.
double delta(int n, double m);

// Member k gets (baseline.critical * g_k, baseline.noncritical / g_k) with
// g_k = beta^(1 - 2k/(n-1)); a single member just keeps the baseline.
std::vector<ClassWeights> weight_schedule(const EnsembleSpec& spec);

// Trains the n members independently (same topology and data plan, different
// class weights and seeds). `jobs` caps member-level parallelism; results do
// not depend on it. A member failure aborts with that member's index.
// `traces`, when given, receives each member's per-batch loss trace.
Ensemble train_ensemble(const EnsembleSpec& spec, const nn::NetworkConfig& config,
                        const data::SampleSource& samples, int jobs = 1,
                        std::vector<std::vector<nn::LossRecord>>* traces = nullptr);

// Strict majority per member: vote_k is true iff p_critical > 0.5, so an
// exact 0.5 tie votes non-critical.
VoteVector make_vote_vector(const std::vector<double>& critical_probs);

VoteVector vote(const Ensemble& ensemble, const ImageTensor& image);

// m * (critical votes) / n.
CriticalIndex critical_index(const VoteVector& votes, double m);

// Critical iff value is strictly above the threshold.
BinaryLabel classify(const CriticalIndex& index, const TriagePolicy& policy);

// Mean of the members' critical softmax outputs; orders images that share an
// index value.
double tiebreak_score(const VoteVector& votes);

// Store: <dir>/ensemble.json + member_<k>/ model stores.
void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir);

Ensemble load_ensemble(const std::filesystem::path& dir);

}  // namespace triagenet::conglomerate
