#include "amsdb/report.hpp"

#include <cstdio>

#include <json.hpp>

#include "amsdb/fsio.hpp"

namespace amsdb {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string row_line(const std::string& name, const MetricsReport& m) {
    std::string s = "image=" + name + " psnr=" + fmt(m.psnr);
    if (m.defined) {
        s += " precision=" + fmt(m.precision) + " recall=" + fmt(m.recall) +
             " fmeasure=" + fmt(m.fmeasure) +
             " pseudo_recall=" + fmt(m.pseudo_recall) +
             " pseudo_fmeasure=" + fmt(m.pseudo_fmeasure);
    } else {
        s += " error=gt_has_no_foreground";
    }
    s += " tp=" + std::to_string(m.tp) + " fp=" + std::to_string(m.fp) +
         " fn=" + std::to_string(m.fn) + " tn=" + std::to_string(m.tn);
    return s;
}

json row_json(const MetricsReport& m) {
    json j{{"psnr", m.psnr}, {"tp", m.tp},   {"fp", m.fp},
           {"fn", m.fn},     {"tn", m.tn},   {"defined", m.defined}};
    if (m.defined) {
        j["precision"] = m.precision;
        j["recall"] = m.recall;
        j["fmeasure"] = m.fmeasure;
        j["pseudo_recall"] = m.pseudo_recall;
        j["pseudo_fmeasure"] = m.pseudo_fmeasure;
    }
    return j;
}

}  // namespace

EvalSummary summarize(std::vector<EvalRow> rows) {
    EvalSummary s;
    s.rows = std::move(rows);
    MetricsReport acc;
    i64 n = 0;
    for (const auto& r : s.rows) {
        acc.tp += r.m.tp;
        acc.fp += r.m.fp;
        acc.fn += r.m.fn;
        acc.tn += r.m.tn;
        if (!r.m.defined) continue;
        ++n;
        acc.psnr += r.m.psnr;
        acc.precision += r.m.precision;
        acc.recall += r.m.recall;
        acc.fmeasure += r.m.fmeasure;
        acc.pseudo_recall += r.m.pseudo_recall;
        acc.pseudo_fmeasure += r.m.pseudo_fmeasure;
    }
    s.defined_rows = n;
    if (n > 0) {
        const double inv = 1.0 / static_cast<double>(n);
        acc.psnr *= inv;
        acc.precision *= inv;
        acc.recall *= inv;
        acc.fmeasure *= inv;
        acc.pseudo_recall *= inv;
        acc.pseudo_fmeasure *= inv;
        acc.defined = true;
    } else {
        acc.defined = false;
    }
    s.mean = acc;
    return s;
}

void write_eval_report(
    const std::string& txt_path, const std::string& json_path,
    const std::vector<std::pair<std::string, std::string>>& config_echo,
    const EvalSummary& summary) {
    std::string txt;
    json jcfg = json::object();
    for (const auto& [k, v] : config_echo) {
        txt += "config." + k + "=" + v + "\n";
        jcfg[k] = v;
    }
    json jrows = json::object();
    for (const auto& r : summary.rows) {
        txt += row_line(r.name, r.m) + "\n";
        jrows[r.name] = row_json(r.m);
    }
    txt += row_line("MEAN", summary.mean) + "\n";
    json doc{{"config", jcfg},
             {"images", jrows},
             {"mean", row_json(summary.mean)},
             {"defined_rows", summary.defined_rows}};
    atomic_write_file(txt_path, txt);
    atomic_write_file(json_path, doc.dump(2) + "\n");
}

}  // namespace amsdb
