#include "triagenet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "triagenet/dataset.hpp"
#include "triagenet/errors.hpp"
#include "triagenet/image_io.hpp"
#include "triagenet/rng.hpp"

namespace triagenet::synth {

namespace {

struct Band {
    double lo;
    double hi;
};

// Seed-stream tags per image group, so resizing one group never shifts the
// pixels of another.
constexpr std::uint64_t kTagTrainCritical = 0x100000;
constexpr std::uint64_t kTagTrainNonCritical = 0x200000;
constexpr std::uint64_t kTagTestHigh = 0x300000;
constexpr std::uint64_t kTagTestLow = 0x400000;
constexpr std::uint64_t kTagTestNonCritical = 0x500000;

double mix(double a, double b, double t) { return a + (b - a) * t; }

// Lesion-like blob on a noisy skin-toned background; severity drives blob
// size, darkness and speckle texture together. The channel-correlated
// speckle keeps the lesion visible to any frozen random conv filter,
// including ones whose DC response to plain brightness is negative.
ImageTensor render_image(Rng& rng, double severity, int size) {
    ImageTensor img(size, size, 3);
    const double bright = rng.uniform(0.90, 1.10);
    const double base[3] = {0.82 * bright, 0.62 * bright, 0.52 * bright};
    const double lesion[3] = {0.30 + rng.uniform(-0.05, 0.05),
                              0.16 + rng.uniform(-0.04, 0.04),
                              0.14 + rng.uniform(-0.04, 0.04)};
    const double jitter = size / 8.0;
    const double cx = size * 0.5 + rng.uniform(-jitter, jitter);
    const double cy = size * 0.5 + rng.uniform(-jitter, jitter);
    const double radius = size * (0.10 + 0.28 * severity);
    const double strength = 0.35 + 0.65 * severity;
    const double speckle_amp = 0.45 * (0.15 + 0.85 * severity);
    const double edge = size * 0.08;

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dist = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
            const double rim = std::clamp((radius - dist) / edge, 0.0, 1.0);
            const double alpha = strength * rim;
            const double speckle =
                rim * speckle_amp * rng.uniform(-1.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double noise = rng.uniform(-0.05, 0.05);
                img.at(y, x, c) = static_cast<float>(
                    mix(base[c], lesion[c], alpha) + speckle + noise);
            }
        }
    }
    return img;
}

std::string image_name(const char* prefix, int j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix, j);
    return buf;
}

}  // namespace

SyntheticFixture generate(const SyntheticSpec& spec,
                          const std::filesystem::path& out_dir) {
    if (spec.image_size < 8 || spec.image_size % 4 != 0)
        throw ConfigError("synthetic image size must be >= 8 and divisible by 4");
    if (spec.train_critical < 1 || spec.train_noncritical < 1 ||
        spec.test_high < 1 || spec.test_low < 1 || spec.test_noncritical < 1)
        throw ConfigError("synthetic group sizes must be >= 1");

    SyntheticFixture fixture;
    fixture.image_dir = out_dir / "images";
    fixture.train_manifest = out_dir / "train_manifest.csv";
    fixture.test_manifest = out_dir / "test_manifest.csv";
    std::filesystem::create_directories(fixture.image_dir);

    std::vector<data::ManifestEntry> train, test;
    auto emit = [&](std::vector<data::ManifestEntry>& manifest,
                    const char* prefix, const char* code, int count,
                    std::uint64_t tag, Band band) {
        for (int j = 0; j < count; ++j) {
            Rng rng(mix_seed(spec.seed, tag + static_cast<std::uint64_t>(j)));
            const double severity = rng.uniform(band.lo, band.hi);
            const auto image = render_image(rng, severity, spec.image_size);

            data::ManifestEntry entry;
            entry.image_id = image_name(prefix, j);
            entry.diagnosis_code = code;
            entry.image_path = fixture.image_dir / (entry.image_id + ".png");
            data::write_png(entry.image_path, image);
            manifest.push_back(std::move(entry));
        }
    };

    emit(train, "tr_c_", "mel", spec.train_critical, kTagTrainCritical,
         {0.50, 1.00});
    emit(train, "tr_n_", "nv", spec.train_noncritical, kTagTrainNonCritical,
         {0.00, 0.35});
    emit(test, "hi_", "mel", spec.test_high, kTagTestHigh, {0.80, 1.00});
    emit(test, "lo_", "mel", spec.test_low, kTagTestLow, {0.50, 0.65});
    emit(test, "nc_", "nv", spec.test_noncritical, kTagTestNonCritical,
         {0.00, 0.35});

    data::write_manifest(fixture.train_manifest, train);
    data::write_manifest(fixture.test_manifest, test);
    return fixture;
}

}  // namespace triagenet::synth
