#include "amsdb/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "amsdb/fsio.hpp"

namespace amsdb {

const std::vector<std::string>& dibco_years() {
    static const std::vector<std::string> years = {
        "2009", "2010", "2011", "2012", "2013", "2014", "2016"};
    return years;
}

DatasetIndex parse_manifest(const std::string& path,
                            const std::vector<std::string>& allowed) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    DatasetIndex index;
    std::map<std::string, i64> seen;  // degraded path -> first line
    std::string line;
    i64 lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos
                                                  : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected <year>TAB<degraded>TAB<gt>");
        DatasetEntry e;
        e.year = line.substr(0, t1);
        e.degraded = line.substr(t1 + 1, t2 - t1 - 1);
        e.gt = line.substr(t2 + 1);
        if (e.year.empty() || e.degraded.empty() || e.gt.empty())
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": empty field");
        if (!allowed.empty() &&
            std::find(allowed.begin(), allowed.end(), e.year) ==
                allowed.end()) {
            std::string known;
            for (const auto& y : allowed) known += (known.empty() ? "" : ", ") + y;
            throw DataError(path + ":" + std::to_string(lineno) + ": year '" +
                            e.year + "' not in corpus list (" + known + ")");
        }
        auto [it, inserted] = seen.emplace(e.degraded, lineno);
        if (!inserted)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": duplicate record for '" + e.degraded +
                            "' (first at line " + std::to_string(it->second) +
                            ")");
        index.entries.push_back(std::move(e));
    }
    return index;
}

void write_manifest(const std::string& path, const DatasetIndex& index) {
    std::string out;
    for (const auto& e : index.entries)
        out += e.year + "\t" + e.degraded + "\t" + e.gt + "\n";
    atomic_write_file(path, out);
}

std::pair<DatasetIndex, DatasetIndex> leave_one_out_split(
    const DatasetIndex& index, const std::string& held_out_year) {
    DatasetIndex train, test;
    std::set<std::string> present;
    for (const auto& e : index.entries) {
        present.insert(e.year);
        (e.year == held_out_year ? test : train).entries.push_back(e);
    }
    if (test.entries.empty()) {
        std::string known;
        for (const auto& y : present) known += (known.empty() ? "" : ", ") + y;
        throw ValueError("no entries for held-out year '" + held_out_year +
                         "'; years present: " +
                         (known.empty() ? "(none)" : known));
    }
    return {std::move(train), std::move(test)};
}

LoadedPair load_pair(const DatasetEntry& entry) {
    LoadedPair p;
    p.img = to_rgb(read_image(entry.degraded));
    const Image gt_img = read_image(entry.gt);
    if (gt_img.w != p.img.w || gt_img.h != p.img.h)
        throw DataError(entry.degraded + " is " + std::to_string(p.img.w) +
                        "x" + std::to_string(p.img.h) + " but " + entry.gt +
                        " is " + std::to_string(gt_img.w) + "x" +
                        std::to_string(gt_img.h));
    p.gt = mask_from_image(gt_img);
    p.year = entry.year;
    return p;
}

}  // namespace amsdb
