#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "triagenet/errors.hpp"

namespace triagenet::data {

// Binary relabeling of the seven diagnosis codes: melanocytic nevi ("nv",
// the only benign class) is non-critical, everything else is critical.
enum class BinaryLabel { Critical = 0, NonCritical = 1 };

const char* to_string(BinaryLabel label);
BinaryLabel label_from_string(std::string_view s);

struct ManifestEntry {
    std::string image_id;
    std::string diagnosis_code;  // one of nv, mel, bkl, bcc, akiec, vasc, df
    std::filesystem::path image_path;
};

struct ClassDistribution {
    std::size_t n_critical = 0;
    std::size_t n_noncritical = 0;
    double f_critical = 0.0;
    double f_noncritical = 0.0;
};

// Per-class loss multipliers. Both strictly positive and finite.
struct ClassWeights {
    double critical = 1.0;
    double noncritical = 1.0;

    double for_label(BinaryLabel label) const {
        return label == BinaryLabel::Critical ? critical : noncritical;
    }
};

void validate(const ClassWeights& w);

// One training epoch: batches_per_epoch batches of batch_size entries,
// sampled without replacement, so no image id repeats within the epoch.
struct EpochPlan {
    std::vector<std::vector<ManifestEntry>> batches;
};

bool is_known_code(std::string_view code);

BinaryLabel relabel(std::string_view diagnosis_code);

// Reads a CSV manifest (header row with image_id and dx columns, extra
// columns ignored) and resolves each image under image_dir by trying the
// usual raster extensions. Errors carry the 1-based data row number.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& csv_path,
                                         const std::filesystem::path& image_dir);

ClassDistribution class_distribution(const std::vector<ManifestEntry>& entries);

// Inverse-frequency weights normalized to mean 1: w_c = 0.5 / f_c, so that
// w_critical*f_critical + w_noncritical*f_noncritical == 1.
ClassWeights baseline_weights(const ClassDistribution& dist);

// Index-level sampling shared by make_epoch_plan and the trainer: a seeded
// shuffle of [0, count) chunked into batches. Deterministic per seed.
std::vector<std::vector<std::size_t>> sample_epoch_indices(
    std::size_t count, std::size_t batch_size, std::size_t batches_per_epoch,
    std::uint64_t seed);

EpochPlan make_epoch_plan(const std::vector<ManifestEntry>& entries,
                          std::size_t batch_size, std::size_t batches_per_epoch,
                          std::uint64_t seed);

// JSON form (list of lists of image ids) for reproducibility audits.
std::string epoch_plan_to_json(const EpochPlan& plan);

// Stratified by BinaryLabel, disjoint and exhaustive, deterministic per seed.
std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split(
    const std::vector<ManifestEntry>& entries, double test_fraction,
    std::uint64_t seed);

void write_manifest(const std::filesystem::path& csv_path,
                    const std::vector<ManifestEntry>& entries);

}  // namespace triagenet::data
