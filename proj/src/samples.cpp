#include "triagenet/samples.hpp"

#include <utility>

#include "triagenet/errors.hpp"

namespace triagenet::data {

InMemorySamples::InMemorySamples(std::vector<std::string> ids,
                                 std::vector<BinaryLabel> labels,
                                 std::vector<ImageTensor> images)
    : ids_(std::move(ids)),
      labels_(std::move(labels)),
      images_(std::move(images)) {
    if (ids_.size() != labels_.size() || ids_.size() != images_.size())
        throw DataError("sample id/label/image counts disagree");
}

InMemorySamples InMemorySamples::from_entries(
    const std::vector<ManifestEntry>& entries, int height, int width) {
    std::vector<std::string> ids;
    std::vector<BinaryLabel> labels;
    std::vector<ImageTensor> images;
    ids.reserve(entries.size());
    labels.reserve(entries.size());
    images.reserve(entries.size());
    for (const auto& entry : entries) {
        ids.push_back(entry.image_id);
        labels.push_back(relabel(entry.diagnosis_code));
        images.push_back(load_image(entry, height, width));
    }
    return InMemorySamples(std::move(ids), std::move(labels), std::move(images));
}

DiskSamples::DiskSamples(std::vector<ManifestEntry> entries, int height,
                         int width)
    : entries_(std::move(entries)), height_(height), width_(width) {
    for (const auto& entry : entries_)
        relabel(entry.diagnosis_code);  // fail fast on bad codes
}

BinaryLabel DiskSamples::label(std::size_t i) const {
    return relabel(entries_[i].diagnosis_code);
}

ImageTensor DiskSamples::image(std::size_t i) const {
    return load_image(entries_[i], height_, width_);
}

std::unique_ptr<SampleSource> open_samples(
    const std::vector<ManifestEntry>& entries, int height, int width,
    std::size_t memory_budget_bytes) {
    const std::size_t footprint = entries.size() *
                                  static_cast<std::size_t>(height) * width * 3 *
                                  sizeof(float);
    if (footprint <= memory_budget_bytes)
        return std::make_unique<InMemorySamples>(
            InMemorySamples::from_entries(entries, height, width));
    return std::make_unique<DiskSamples>(entries, height, width);
}

}  // namespace triagenet::data
