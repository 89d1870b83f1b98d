#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "triagenet/conglomerate.hpp"
#include "triagenet/rng.hpp"
#include "triagenet/triage.hpp"

using namespace triagenet;
using namespace triagenet::triage;
using conglomerate::Ensemble;
using conglomerate::TriagePolicy;

namespace {

nn::NetworkConfig small_config() {
    using L = nn::LayerSpec;
    nn::NetworkConfig config;
    config.name = "small";
    config.input_height = 8;
    config.input_width = 8;
    config.blocks = {
        {L::conv(3, 3, 2), L::maxpool()},
        {L::conv(3, 2, 3), L::maxpool()},
    };
    config.head = {L::flatten(), L::dense(12, 5), L::dense(5, 2), L::softmax()};
    config.freeze_mask = {true, false, false};
    nn::validate(config);
    return config;
}

Ensemble random_ensemble(int n, std::uint64_t seed) {
    Ensemble ensemble;
    ensemble.spec.n = n;
    ensemble.spec.baseline = {1.0, 1.0};
    ensemble.spec.member_seeds = conglomerate::default_member_seeds(seed, n);
    ensemble.id = "test-ensemble";
    ensemble.config = small_config();
    ensemble.member_weights = conglomerate::weight_schedule(ensemble.spec);
    for (int k = 0; k < n; ++k)
        ensemble.members.push_back(nn::init_model<float>(
            ensemble.config, ensemble.spec.member_seeds[static_cast<size_t>(k)]));
    return ensemble;
}

ImageTensor random_image(std::uint64_t seed) {
    Rng rng(seed);
    ImageTensor img(8, 8, 3);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    return img;
}

TriageRecord record(const std::string& id, double index, double tiebreak) {
    TriageRecord r;
    r.image_id = id;
    r.index = index;
    r.tiebreak = tiebreak;
    r.label = index > 3.0 ? data::BinaryLabel::Critical
                          : data::BinaryLabel::NonCritical;
    return r;
}

}  // namespace

TEST_SUITE("triage") {

TEST_CASE("score_batch composes vote, index, tie-break and label per image") {
    const auto ensemble = random_ensemble(3, 40);
    std::vector<std::pair<std::string, ImageTensor>> batch;
    for (std::uint64_t i = 0; i < 6; ++i)
        batch.emplace_back("img_" + std::to_string(i), random_image(700 + i));

    const auto records = score_batch(ensemble, batch, TriagePolicy{3.0});
    REQUIRE(records.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto vv = conglomerate::vote(ensemble, batch[i].second);
        const auto index = conglomerate::critical_index(vv, ensemble.spec.m);
        CHECK(records[i].image_id == batch[i].first);
        CHECK(records[i].index == index.value);
        CHECK(records[i].tiebreak == conglomerate::tiebreak_score(vv));
        CHECK(records[i].label ==
              conglomerate::classify(index, TriagePolicy{3.0}));
        CHECK(records[i].rank == 0);  // ranks are left to order()
    }
}

TEST_CASE("score_batch results do not depend on the jobs count") {
    const auto ensemble = random_ensemble(3, 41);
    std::vector<std::pair<std::string, ImageTensor>> batch;
    for (std::uint64_t i = 0; i < 9; ++i)
        batch.emplace_back("img_" + std::to_string(i), random_image(800 + i));

    const auto seq = score_batch(ensemble, batch, TriagePolicy{3.0}, 1);
    const auto par = score_batch(ensemble, batch, TriagePolicy{3.0}, 4);
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(seq[i].image_id == par[i].image_id);
        CHECK(seq[i].index == par[i].index);
        CHECK(seq[i].tiebreak == par[i].tiebreak);
    }
}

TEST_CASE("score_batch rejects empty batches and misshaped images") {
    const auto ensemble = random_ensemble(2, 42);
    CHECK_THROWS_AS(score_batch(ensemble, {}, TriagePolicy{3.0}), ConfigError);

    std::vector<std::pair<std::string, ImageTensor>> bad;
    bad.emplace_back("wrong_size", ImageTensor(4, 4, 3));
    CHECK_THROWS_WITH_AS(score_batch(ensemble, bad, TriagePolicy{3.0}),
                         doctest::Contains("wrong_size"), DataError);
}

TEST_CASE("order sorts by index descending") {
    auto report = order({record("a", 4.0, 0.5), record("b", 10.0, 0.9),
                         record("c", 6.0, 0.7)},
                        TriagePolicy{3.0}, "e1");
    REQUIRE(report.records.size() == 3);
    CHECK(report.records[0].image_id == "b");
    CHECK(report.records[1].image_id == "c");
    CHECK(report.records[2].image_id == "a");
    CHECK(report.records[0].index == 10.0);
    CHECK(report.records[1].index == 6.0);
    CHECK(report.records[2].index == 4.0);
}

TEST_CASE("equal indices fall back to the tie-break score") {
    const auto report = order({record("a", 6.0, 0.64), record("b", 6.0, 0.71)},
                              TriagePolicy{3.0}, "e1");
    CHECK(report.records[0].image_id == "b");  // 0.71 first
    CHECK(report.records[1].image_id == "a");
}

TEST_CASE("fully tied records order by image id for a stable report") {
    const auto report = order({record("b", 6.0, 0.7), record("a", 6.0, 0.7)},
                              TriagePolicy{3.0}, "e1");
    CHECK(report.records[0].image_id == "a");
    CHECK(report.records[1].image_id == "b");
}

TEST_CASE("order assigns ranks 1..N and keeps policy and ensemble id") {
    const auto report = order({record("a", 2.0, 0.1), record("b", 8.0, 0.9),
                               record("c", 0.0, 0.05), record("d", 8.0, 0.95)},
                              TriagePolicy{5.0}, "ens-7");
    REQUIRE(report.records.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(report.records[i].rank == i + 1);
    CHECK(report.policy.threshold == 5.0);
    CHECK(report.ensemble_id == "ens-7");
    CHECK_FALSE(report.timestamp.empty());
    // ISO 8601 UTC shape: 2024-01-31T12:00:00Z
    CHECK(report.timestamp.size() == 20);
    CHECK(report.timestamp[4] == '-');
    CHECK(report.timestamp[10] == 'T');
    CHECK(report.timestamp.back() == 'Z');
}

TEST_CASE("order rejects duplicate image ids and empty input") {
    CHECK_THROWS_WITH_AS(
        order({record("dup", 2.0, 0.1), record("dup", 4.0, 0.2)},
              TriagePolicy{3.0}, "e1"),
        doctest::Contains("dup"), DataError);
    CHECK_THROWS_AS(order({}, TriagePolicy{3.0}, "e1"), ConfigError);
}

TEST_CASE("a shuffled batch yields the identical ordered report") {
    std::vector<TriageRecord> records;
    Rng rng(17);
    for (int i = 0; i < 40; ++i) {
        const double index = 2.0 * static_cast<double>(rng.uniform_index(6));
        records.push_back(record("img_" + std::to_string(i), index,
                                 rng.uniform(0.0, 1.0)));
    }
    auto shuffled = records;
    Rng(18).shuffle(shuffled);

    const auto a = order(records, TriagePolicy{3.0}, "e1");
    const auto b = order(shuffled, TriagePolicy{3.0}, "e1");
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].image_id == b.records[i].image_id);
        CHECK(a.records[i].rank == b.records[i].rank);
        CHECK(a.records[i].index == b.records[i].index);
    }
    // The rendered bodies agree byte for byte.
    CHECK(render_report(a, ReportFormat::Csv) ==
          render_report(b, ReportFormat::Csv));
}

TEST_CASE("csv report has a header and one row per record, in rank order") {
    const auto report = order({record("a", 4.0, 0.5), record("b", 10.0, 0.9)},
                              TriagePolicy{3.0}, "e1");
    const auto csv = render_report(report, ReportFormat::Csv);
    CHECK(csv.rfind("rank,image_id,index,tiebreak,label\n", 0) == 0);
    CHECK(csv.find("1,b,10,0.9,") != std::string::npos);
    CHECK(csv.find("2,a,4,0.5,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    const auto pos_b = csv.find("1,b");
    const auto pos_a = csv.find("2,a");
    CHECK(pos_b < pos_a);
}

TEST_CASE("json report round-trips through parse_report_json") {
    const auto report = order({record("a", 4.0, 0.53), record("b", 10.0, 0.91),
                               record("c", 0.0, 0.02)},
                              TriagePolicy{3.0}, "ens-9");
    const auto text = render_report(report, ReportFormat::Json);
    const auto parsed = parse_report_json(text);

    CHECK(parsed.ensemble_id == report.ensemble_id);
    CHECK(parsed.policy.threshold == report.policy.threshold);
    CHECK(parsed.timestamp == report.timestamp);
    REQUIRE(parsed.records.size() == report.records.size());
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        CHECK(parsed.records[i].image_id == report.records[i].image_id);
        CHECK(parsed.records[i].index == report.records[i].index);
        CHECK(parsed.records[i].tiebreak == report.records[i].tiebreak);
        CHECK(parsed.records[i].label == report.records[i].label);
        CHECK(parsed.records[i].rank == report.records[i].rank);
    }

    const auto as_json = nlohmann::json::parse(text);
    CHECK(as_json.at("format") == "triagenet-triage-report");
    CHECK(as_json.at("records").is_array());
}

TEST_CASE("parse_report_json rejects malformed input") {
    CHECK_THROWS_AS(parse_report_json("nope"), DataError);
    CHECK_THROWS_AS(parse_report_json("{}"), DataError);
}

TEST_CASE("text report lists ranks first, most critical on top") {
    const auto report = order({record("calm", 0.0, 0.1),
                               record("urgent", 10.0, 0.97)},
                              TriagePolicy{3.0}, "e1");
    const auto text = render_report(report, ReportFormat::Text);
    const auto pos_urgent = text.find("urgent");
    const auto pos_calm = text.find("calm");
    REQUIRE(pos_urgent != std::string::npos);
    REQUIRE(pos_calm != std::string::npos);
    CHECK(pos_urgent < pos_calm);
    CHECK(text.find("critical") != std::string::npos);
}

}  // TEST_SUITE("triage")
