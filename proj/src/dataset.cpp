#include "triagenet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "triagenet/rng.hpp"

namespace triagenet::data {

namespace {

constexpr std::array<std::string_view, 7> kKnownCodes = {
    "nv", "mel", "bkl", "bcc", "akiec", "vasc", "df"};

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// Comma-separated with double-quote quoting; enough for the metadata files
// this tool ingests.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"') {
            if (in_quote && i + 1 < line.size() && line[i + 1] == '"') {
                current.push_back('"');
                ++i;
            } else {
                in_quote = !in_quote;
            }
        } else if (c == ',' && !in_quote) {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(trim(current));
    return fields;
}

std::string strip_bom(std::string s) {
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF &&
        static_cast<unsigned char>(s[1]) == 0xBB &&
        static_cast<unsigned char>(s[2]) == 0xBF) {
        s.erase(0, 3);
    }
    return s;
}

std::filesystem::path resolve_image_path(const std::filesystem::path& image_dir,
                                         const std::string& image_id) {
    static constexpr std::array<const char*, 6> kExtensions = {
        ".jpg", ".jpeg", ".png", ".JPG", ".JPEG", ".PNG"};
    for (const char* ext : kExtensions) {
        auto candidate = image_dir / (image_id + ext);
        std::error_code ec;
        if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
    }
    return {};
}

}  // namespace

const char* to_string(BinaryLabel label) {
    return label == BinaryLabel::Critical ? "critical" : "noncritical";
}

BinaryLabel label_from_string(std::string_view s) {
    if (s == "critical") return BinaryLabel::Critical;
    if (s == "noncritical") return BinaryLabel::NonCritical;
    throw DataError("unknown label string: " + std::string(s));
}

void validate(const ClassWeights& w) {
    if (!(w.critical > 0.0) || !(w.noncritical > 0.0) ||
        !std::isfinite(w.critical) || !std::isfinite(w.noncritical)) {
        throw ConfigError("class weights must be strictly positive and finite");
    }
}

bool is_known_code(std::string_view code) {
    return std::find(kKnownCodes.begin(), kKnownCodes.end(), code) !=
           kKnownCodes.end();
}

BinaryLabel relabel(std::string_view diagnosis_code) {
    if (!is_known_code(diagnosis_code))
        throw DataError("unknown diagnosis code: " + std::string(diagnosis_code));
    return diagnosis_code == "nv" ? BinaryLabel::NonCritical
                                  : BinaryLabel::Critical;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& csv_path,
                                         const std::filesystem::path& image_dir) {
    std::ifstream file(csv_path);
    if (!file)
        throw DataError("cannot open manifest: " + csv_path.string());

    std::string line;
    if (!std::getline(file, line))
        throw DataError("manifest has no header row: " + csv_path.string());

    const auto header = split_csv_line(strip_bom(line));
    std::ptrdiff_t id_col = -1;
    std::ptrdiff_t dx_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "image_id") id_col = static_cast<std::ptrdiff_t>(i);
        if (header[i] == "dx") dx_col = static_cast<std::ptrdiff_t>(i);
    }
    if (id_col < 0 || dx_col < 0)
        throw DataError("manifest header must contain image_id and dx columns: " +
                        csv_path.string());

    std::vector<ManifestEntry> entries;
    std::size_t row = 0;  // 1-based data row number
    while (std::getline(file, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= static_cast<std::size_t>(std::max(id_col, dx_col)))
            throw DataError("manifest row " + std::to_string(row) +
                            ": expected at least " +
                            std::to_string(std::max(id_col, dx_col) + 1) +
                            " columns, got " + std::to_string(fields.size()));

        ManifestEntry entry;
        entry.image_id = fields[static_cast<std::size_t>(id_col)];
        entry.diagnosis_code = fields[static_cast<std::size_t>(dx_col)];
        if (entry.image_id.empty())
            throw DataError("manifest row " + std::to_string(row) +
                            ": empty image_id");
        if (!is_known_code(entry.diagnosis_code))
            throw DataError("manifest row " + std::to_string(row) +
                            ": unknown diagnosis code \"" + entry.diagnosis_code +
                            "\"");
        entry.image_path = resolve_image_path(image_dir, entry.image_id);
        if (entry.image_path.empty())
            throw DataError("manifest row " + std::to_string(row) +
                            ": no image file for id \"" + entry.image_id +
                            "\" under " + image_dir.string());
        entries.push_back(std::move(entry));
    }
    return entries;
}

ClassDistribution class_distribution(const std::vector<ManifestEntry>& entries) {
    if (entries.empty())
        throw DataError("class distribution of an empty entry list");
    ClassDistribution dist;
    for (const auto& entry : entries) {
        if (relabel(entry.diagnosis_code) == BinaryLabel::Critical)
            ++dist.n_critical;
        else
            ++dist.n_noncritical;
    }
    if (dist.n_critical == 0 || dist.n_noncritical == 0)
        throw DataError("both classes must be present; got " +
                        std::to_string(dist.n_critical) + " critical and " +
                        std::to_string(dist.n_noncritical) + " non-critical");
    const double total = static_cast<double>(entries.size());
    dist.f_critical = static_cast<double>(dist.n_critical) / total;
    dist.f_noncritical = static_cast<double>(dist.n_noncritical) / total;
    return dist;
}

ClassWeights baseline_weights(const ClassDistribution& dist) {
    ClassWeights w;
    w.critical = 0.5 / dist.f_critical;
    w.noncritical = 0.5 / dist.f_noncritical;
    validate(w);
    return w;
}

std::vector<std::vector<std::size_t>> sample_epoch_indices(
    std::size_t count, std::size_t batch_size, std::size_t batches_per_epoch,
    std::uint64_t seed) {
    if (batch_size == 0 || batches_per_epoch == 0)
        throw ConfigError("batch_size and batches_per_epoch must be >= 1");
    const std::size_t needed = batch_size * batches_per_epoch;
    if (count < needed)
        throw DataError("epoch plan needs " + std::to_string(needed) +
                        " entries but only " + std::to_string(count) +
                        " are available");

    std::vector<std::size_t> indices(count);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(indices);

    std::vector<std::vector<std::size_t>> batches(batches_per_epoch);
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
        batches[b].assign(indices.begin() + b * batch_size,
                          indices.begin() + (b + 1) * batch_size);
    }
    return batches;
}

EpochPlan make_epoch_plan(const std::vector<ManifestEntry>& entries,
                          std::size_t batch_size, std::size_t batches_per_epoch,
                          std::uint64_t seed) {
    const auto index_batches =
        sample_epoch_indices(entries.size(), batch_size, batches_per_epoch, seed);
    EpochPlan plan;
    plan.batches.reserve(index_batches.size());
    for (const auto& batch : index_batches) {
        std::vector<ManifestEntry> resolved;
        resolved.reserve(batch.size());
        for (std::size_t i : batch) resolved.push_back(entries[i]);
        plan.batches.push_back(std::move(resolved));
    }
    return plan;
}

std::string epoch_plan_to_json(const EpochPlan& plan) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& batch : plan.batches) {
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& entry : batch) ids.push_back(entry.image_id);
        out.push_back(std::move(ids));
    }
    return out.dump(2) + "\n";
}

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> split(
    const std::vector<ManifestEntry>& entries, double test_fraction,
    std::uint64_t seed) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw ConfigError("test fraction must be in (0, 1), got " +
                          std::to_string(test_fraction));

    // Shuffle index lists per class, carve the test prefix of each, then
    // restore manifest order inside both partitions.
    std::vector<std::size_t> critical, noncritical;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (relabel(entries[i].diagnosis_code) == BinaryLabel::Critical)
            critical.push_back(i);
        else
            noncritical.push_back(i);
    }

    std::vector<std::size_t> test_indices;
    auto take = [&](std::vector<std::size_t>& pool, std::uint64_t tag) {
        Rng rng(mix_seed(seed, tag));
        rng.shuffle(pool);
        const auto want = static_cast<std::size_t>(
            std::llround(static_cast<double>(pool.size()) * test_fraction));
        test_indices.insert(test_indices.end(), pool.begin(),
                            pool.begin() + want);
    };
    take(critical, 0xC717);
    take(noncritical, 0x17C7);

    std::vector<bool> in_test(entries.size(), false);
    for (std::size_t i : test_indices) in_test[i] = true;

    std::vector<ManifestEntry> train, test;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        (in_test[i] ? test : train).push_back(entries[i]);
    }
    return {std::move(train), std::move(test)};
}

void write_manifest(const std::filesystem::path& csv_path,
                    const std::vector<ManifestEntry>& entries) {
    std::ofstream out(csv_path);
    if (!out)
        throw DataError("cannot write manifest: " + csv_path.string());
    out << "image_id,dx\n";
    for (const auto& entry : entries)
        out << entry.image_id << ',' << entry.diagnosis_code << '\n';
    if (!out)
        throw DataError("failed writing manifest: " + csv_path.string());
}

}  // namespace triagenet::data
