#include "triagenet/triage.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>

#include <json.hpp>

#include "triagenet/errors.hpp"
#include "triagenet/parallel.hpp"

namespace triagenet::triage {

namespace {

using nlohmann::json;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

std::vector<TriageRecord> score_batch(
    const conglomerate::Ensemble& ensemble,
    const std::vector<std::pair<std::string, ImageTensor>>& images,
    const conglomerate::TriagePolicy& policy, int jobs) {
    if (images.empty())
        throw ConfigError("triage batch is empty");
    conglomerate::validate(policy, ensemble.spec.m);

    std::vector<TriageRecord> records(images.size());
    parallel_for(images.size(), jobs, [&](std::size_t i) {
        const auto& [id, image] = images[i];
        try {
            const auto votes = conglomerate::vote(ensemble, image);
            const auto index =
                conglomerate::critical_index(votes, ensemble.spec.m);
            records[i] = {id, index.value, conglomerate::tiebreak_score(votes),
                          conglomerate::classify(index, policy), 0};
        } catch (const DataError& e) {
            throw DataError("image \"" + id + "\": " + e.what());
        }
    });
    return records;
}

TriageReport order(std::vector<TriageRecord> records,
                   const conglomerate::TriagePolicy& policy,
                   const std::string& ensemble_id) {
    if (records.empty())
        throw ConfigError("cannot order an empty record list");
    std::set<std::string> ids;
    for (const auto& rec : records)
        if (!ids.insert(rec.image_id).second)
            throw DataError("duplicate image id in batch: " + rec.image_id);

    std::sort(records.begin(), records.end(),
              [](const TriageRecord& a, const TriageRecord& b) {
                  if (a.index != b.index) return a.index > b.index;
                  if (a.tiebreak != b.tiebreak) return a.tiebreak > b.tiebreak;
                  return a.image_id < b.image_id;
              });
    for (std::size_t i = 0; i < records.size(); ++i)
        records[i].rank = static_cast<int>(i) + 1;

    TriageReport report;
    report.policy = policy;
    report.ensemble_id = ensemble_id;
    report.timestamp = utc_timestamp();
    report.records = std::move(records);
    return report;
}

std::string render_report(const TriageReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::Json: {
            json j;
            j["format"] = "triagenet-triage-report";
            j["version"] = 1;
            j["ensemble_id"] = report.ensemble_id;
            j["policy"] = {{"threshold", report.policy.threshold}};
            j["timestamp"] = report.timestamp;
            j["records"] = json::array();
            for (const auto& rec : report.records)
                j["records"].push_back({{"rank", rec.rank},
                                        {"image_id", rec.image_id},
                                        {"index", rec.index},
                                        {"tiebreak", rec.tiebreak},
                                        {"label", data::to_string(rec.label)}});
            return j.dump(2) + "\n";
        }
        case ReportFormat::Csv: {
            std::ostringstream out;
            out << "rank,image_id,index,tiebreak,label\n";
            for (const auto& rec : report.records)
                out << rec.rank << ',' << rec.image_id << ','
                    << format_double(rec.index) << ','
                    << format_double(rec.tiebreak) << ','
                    << data::to_string(rec.label) << '\n';
            return out.str();
        }
        case ReportFormat::Text: {
            std::size_t id_width = 8;
            for (const auto& rec : report.records)
                id_width = std::max(id_width, rec.image_id.size());
            std::ostringstream out;
            char line[256];
            std::snprintf(line, sizeof(line), "%4s  %-*s  %6s  %8s  %s\n",
                          "rank", static_cast<int>(id_width), "image_id",
                          "index", "tiebreak", "label");
            out << line;
            for (const auto& rec : report.records) {
                std::snprintf(line, sizeof(line), "%4d  %-*s  %6.2f  %8.4f  %s\n",
                              rec.rank, static_cast<int>(id_width),
                              rec.image_id.c_str(), rec.index, rec.tiebreak,
                              data::to_string(rec.label));
                out << line;
            }
            return out.str();
        }
    }
    throw ConfigError("unknown report format");
}

TriageReport parse_report_json(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        if (j.at("format").get<std::string>() != "triagenet-triage-report")
            throw DataError("not a triage report");
        TriageReport report;
        report.ensemble_id = j.at("ensemble_id").get<std::string>();
        report.policy.threshold = j.at("policy").at("threshold").get<double>();
        report.timestamp = j.at("timestamp").get<std::string>();
        for (const auto& rj : j.at("records")) {
            TriageRecord rec;
            rec.rank = rj.at("rank").get<int>();
            rec.image_id = rj.at("image_id").get<std::string>();
            rec.index = rj.at("index").get<double>();
            rec.tiebreak = rj.at("tiebreak").get<double>();
            rec.label =
                data::label_from_string(rj.at("label").get<std::string>());
            report.records.push_back(std::move(rec));
        }
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed triage report JSON: ") +
                        e.what());
    }
}

}  // namespace triagenet::triage
