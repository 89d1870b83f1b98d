#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace triagenet::synth {

// Seeded fixture of two separable lesion-like texture classes. Every image
// carries a severity in [0, 1] driving the size, darkness and texture of a
// blob on a noisy skin-toned background; non-critical images sit well below
// the critical band so a small network can learn the split, while the
// severity spread inside the critical band leaves the low end genuinely
// borderline. Image ids are prefixed hi_/lo_/nc_ by group.
struct SyntheticSpec {
    int train_critical = 250;
    int train_noncritical = 250;
    int test_high = 25;       // severity 0.80..1.00
    int test_low = 25;        // severity 0.50..0.65
    int test_noncritical = 50;
    int image_size = 32;
    std::uint64_t seed = 42;
};

struct SyntheticFixture {
    std::filesystem::path image_dir;
    std::filesystem::path train_manifest;
    std::filesystem::path test_manifest;
};

// Writes <out_dir>/images/*.png plus train_manifest.csv and
// test_manifest.csv (image_id, dx columns; critical groups use "mel",
// non-critical "nv"). Deterministic per spec.
SyntheticFixture generate(const SyntheticSpec& spec,
                          const std::filesystem::path& out_dir);

}  // namespace triagenet::synth
