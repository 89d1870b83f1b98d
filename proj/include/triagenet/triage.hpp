#pragma once

#include <string>
#include <utility>
#include <vector>

#include "triagenet/conglomerate.hpp"

namespace triagenet::triage {

struct TriageRecord {
    std::string image_id;
    double index = 0.0;
    double tiebreak = 0.0;
    data::BinaryLabel label = data::BinaryLabel::NonCritical;
    int rank = 0;  // 1-based, assigned by order()
};

struct TriageReport {
    conglomerate::TriagePolicy policy;
    std::string ensemble_id;
    std::string timestamp;  // ISO 8601 UTC; excluded from determinism checks
    std::vector<TriageRecord> records;
};

enum class ReportFormat { Json, Csv, Text };

// Scores every image (index, tie-break score, label); record order follows
// the input batch, ranks are not assigned yet. Throws DataError naming the
// image id on a resolution mismatch.
std::vector<TriageRecord> score_batch(
    const conglomerate::Ensemble& ensemble,
    const std::vector<std::pair<std::string, ImageTensor>>& images,
    const conglomerate::TriagePolicy& policy, int jobs = 1);

// Most-to-least critical: index desc, tie-break desc, image_id asc; assigns
// ranks 1..N. Duplicate image ids are an error.
TriageReport order(std::vector<TriageRecord> records,
                   const conglomerate::TriagePolicy& policy,
                   const std::string& ensemble_id);

std::string render_report(const TriageReport& report, ReportFormat format);

TriageReport parse_report_json(const std::string& json_text);

}  // namespace triagenet::triage
