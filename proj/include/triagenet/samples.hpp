#pragma once

#include <memory>
#include <string>
#include <vector>

#include "triagenet/dataset.hpp"
#include "triagenet/image_io.hpp"
#include "triagenet/tensor.hpp"

namespace triagenet::data {

// Labeled image supply for training and evaluation. Implementations must be
// safe for concurrent reads on distinct indices.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual const std::string& id(std::size_t i) const = 0;
    virtual BinaryLabel label(std::size_t i) const = 0;
    virtual ImageTensor image(std::size_t i) const = 0;
};

// Fully decoded in memory; right choice for fixtures and small manifests.
class InMemorySamples : public SampleSource {
public:
    InMemorySamples(std::vector<std::string> ids, std::vector<BinaryLabel> labels,
                    std::vector<ImageTensor> images);

    static InMemorySamples from_entries(const std::vector<ManifestEntry>& entries,
                                        int height, int width);

    std::size_t size() const override { return ids_.size(); }
    const std::string& id(std::size_t i) const override { return ids_[i]; }
    BinaryLabel label(std::size_t i) const override { return labels_[i]; }
    ImageTensor image(std::size_t i) const override { return images_[i]; }

private:
    std::vector<std::string> ids_;
    std::vector<BinaryLabel> labels_;
    std::vector<ImageTensor> images_;
};

// Decodes from disk on every access; keeps memory flat for full-size runs.
class DiskSamples : public SampleSource {
public:
    DiskSamples(std::vector<ManifestEntry> entries, int height, int width);

    std::size_t size() const override { return entries_.size(); }
    const std::string& id(std::size_t i) const override {
        return entries_[i].image_id;
    }
    BinaryLabel label(std::size_t i) const override;
    ImageTensor image(std::size_t i) const override;

private:
    std::vector<ManifestEntry> entries_;
    int height_;
    int width_;
};

// Picks in-memory vs on-disk by decoded footprint.
std::unique_ptr<SampleSource> open_samples(
    const std::vector<ManifestEntry>& entries, int height, int width,
    std::size_t memory_budget_bytes = std::size_t{1} << 30);

}  // namespace triagenet::data
