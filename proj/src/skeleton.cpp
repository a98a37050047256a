#include "amsdb/skeleton.hpp"

#include <array>

namespace amsdb {

namespace {

// Neighbors in Zhang-Suen order P2..P9, clockwise from north.
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

Mask skeletonize(const Mask& m) {
    Mask cur = m;
    const i64 h = m.h, w = m.w;
    auto px = [&](const Mask& mm, i64 y, i64 x) -> int {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0;
        return mm.ink[y * w + x];
    };
    std::vector<std::pair<i64, i64>> kill;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int phase = 0; phase < 2; ++phase) {
            kill.clear();
            for (i64 y = 0; y < h; ++y)
                for (i64 x = 0; x < w; ++x) {
                    if (!cur.ink[y * w + x]) continue;
                    std::array<int, 8> p;
                    int b = 0;
                    for (int i = 0; i < 8; ++i) {
                        p[i] = px(cur, y + kDy[i], x + kDx[i]);
                        b += p[i];
                    }
                    if (b < 2 || b > 6) continue;
                    int a = 0;
                    for (int i = 0; i < 8; ++i)
                        if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
                    if (a != 1) continue;
                    // p[0]=P2, p[2]=P4, p[4]=P6, p[6]=P8.
                    if (phase == 0) {
                        if (p[0] * p[2] * p[4] != 0) continue;
                        if (p[2] * p[4] * p[6] != 0) continue;
                    } else {
                        if (p[0] * p[2] * p[6] != 0) continue;
                        if (p[0] * p[4] * p[6] != 0) continue;
                    }
                    kill.emplace_back(y, x);
                }
            for (auto [y, x] : kill) cur.ink[y * w + x] = 0;
            if (!kill.empty()) changed = true;
        }
    }
    return cur;
}

}  // namespace amsdb
