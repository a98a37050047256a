#include <cstdlib>
#include <cstring>
#include <string>

#include "amsdb/kernels.hpp"

namespace amsdb::kern {

bool avx2_available() {
#ifdef AMSDB_BUILD_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

#ifndef AMSDB_BUILD_AVX2
const Kernels& avx2_table() {
    throw Error("AVX2 kernel lane was not compiled into this binary");
}
#endif

namespace {
const Kernels* resolve() {
    const char* env = std::getenv("AMSDB_SIMD");
    if (env != nullptr && *env != '\0') {
        if (std::strcmp(env, "scalar") == 0) return &scalar_table();
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2_available())
                throw ConfigError(
                    "AMSDB_SIMD=avx2 requested but the AVX2 lane is "
                    "unavailable on this machine");
            return &avx2_table();
        }
        throw ConfigError(std::string("unknown AMSDB_SIMD value '") + env +
                          "' (expected 'scalar' or 'avx2')");
    }
    return avx2_available() ? &avx2_table() : &scalar_table();
}
}  // namespace

const Kernels& active() {
    static const Kernels* table = resolve();
    return *table;
}

}  // namespace amsdb::kern
