#pragma once

// Evaluation reports: one flat key-value line per image plus a MEAN row in
// the text file, and the same data as a single JSON document. Both carry
// the effective configuration for provenance.

#include <string>
#include <utility>
#include <vector>

#include "amsdb/metrics.hpp"

namespace amsdb {

struct EvalRow {
    std::string name;
    MetricsReport m;
};

struct EvalSummary {
    std::vector<EvalRow> rows;
    MetricsReport mean;     // unweighted over defined rows
    i64 defined_rows = 0;
};

EvalSummary summarize(std::vector<EvalRow> rows);

void write_eval_report(
    const std::string& txt_path, const std::string& json_path,
    const std::vector<std::pair<std::string, std::string>>& config_echo,
    const EvalSummary& summary);

}  // namespace amsdb
