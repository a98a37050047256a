#pragma once

// Manifest-backed dataset index and the leave-one-year-out split. Manifest
// lines are `<year>TAB<degraded-path>TAB<gt-path>`; blank lines and lines
// starting with '#' are skipped.

#include <string>
#include <utility>
#include <vector>

#include "amsdb/image.hpp"

namespace amsdb {

struct DatasetEntry {
    std::string year, degraded, gt;
};

struct DatasetIndex {
    std::vector<DatasetEntry> entries;
};

const std::vector<std::string>& dibco_years();  // 2009-2014 and 2016

// Rejects malformed lines, years outside `allowed` (empty = accept any),
// and duplicate degraded paths — all with line numbers.
DatasetIndex parse_manifest(const std::string& path,
                            const std::vector<std::string>& allowed =
                                dibco_years());
void write_manifest(const std::string& path, const DatasetIndex& index);

// Partition by year tag. ValueError when the held-out year has no entries,
// listing the years that are present.
std::pair<DatasetIndex, DatasetIndex> leave_one_out_split(
    const DatasetIndex& index, const std::string& held_out_year);

struct LoadedPair {
    Image img;  // rgb, [0,1]
    Mask gt;    // 1 = ink
    std::string year;
};

// Reads both files, converts to rgb + ink mask, checks matching dims.
LoadedPair load_pair(const DatasetEntry& entry);

}  // namespace amsdb
