#pragma once

// Small file helpers. Artifact writes go through a temp file + rename so an
// interrupted run never leaves a half-written checkpoint or report behind.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "amsdb/common.hpp"

namespace amsdb {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw DataError("read failed: " + path);
    return ss.str();
}

inline void atomic_write_file(const std::string& path,
                              const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out.good()) throw DataError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw DataError("cannot rename " + tmp + " to " + path);
    }
}

}  // namespace amsdb
