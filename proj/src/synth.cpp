#include "amsdb/synth.hpp"

#include <cmath>

namespace amsdb {

namespace {

void stamp_disc(Mask& m, i64 cy, i64 cx, i64 r) {
    for (i64 dy = -r; dy <= r; ++dy)
        for (i64 dx = -r; dx <= r; ++dx) {
            if (dy * dy + dx * dx > r * r) continue;
            const i64 y = cy + dy, x = cx + dx;
            if (y >= 0 && y < m.h && x >= 0 && x < m.w) m.at(y, x) = 1;
        }
}

void draw_segment(Mask& m, double y0, double x0, double y1, double x1,
                  i64 r) {
    const double len = std::hypot(y1 - y0, x1 - x0);
    const i64 steps = std::max<i64>(2, static_cast<i64>(std::ceil(len * 2.0)));
    for (i64 i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(steps);
        stamp_disc(m, static_cast<i64>(std::lround(y0 + t * (y1 - y0))),
                   static_cast<i64>(std::lround(x0 + t * (x1 - x0))), r);
    }
}

float clamp01(double v) {
    return static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
}

}  // namespace

SynthPair synth_pair(i64 size, Rng& rng) {
    if (size < 16) throw ValueError("synthetic pairs need size >= 16");
    SynthPair p;
    p.gt = make_mask(size, size);

    const double margin = 6.0;
    const i64 strokes = 3 + rng.index(3);
    for (i64 s = 0; s < strokes; ++s) {
        const i64 r = 1 + rng.index(2);  // stroke half-width 1..2
        const i64 segments = 2 + rng.index(3);
        double y = rng.uniform(margin, size - margin);
        double x = rng.uniform(margin, size - margin);
        for (i64 seg = 0; seg < segments; ++seg) {
            const double ny = rng.uniform(margin, size - margin);
            const double nx = rng.uniform(margin, size - margin);
            draw_segment(p.gt, y, x, ny, nx, r);
            y = ny;
            x = nx;
        }
    }
    // one ring per page for curved strokes
    {
        const double cy = rng.uniform(size * 0.25, size * 0.75);
        const double cx = rng.uniform(size * 0.25, size * 0.75);
        const double rad = rng.uniform(8.0, size * 0.2);
        const i64 steps = static_cast<i64>(rad * 8.0);
        for (i64 i = 0; i < steps; ++i) {
            const double a = 2.0 * 3.14159265358979 * i / steps;
            stamp_disc(p.gt,
                       static_cast<i64>(std::lround(cy + rad * std::sin(a))),
                       static_cast<i64>(std::lround(cx + rad * std::cos(a))),
                       1);
        }
    }

    const double base = rng.uniform(0.78, 0.9);
    const double ink = rng.uniform(0.12, 0.25);
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979);
    const double cs = std::cos(angle), sn = std::sin(angle);
    const double shade = rng.uniform(0.03, 0.08);
    p.degraded = make_image(size, size, 1);
    for (i64 y = 0; y < size; ++y)
        for (i64 x = 0; x < size; ++x) {
            const double g =
                shade * ((cs * x + sn * y) / static_cast<double>(size));
            const double noise = rng.normal() * 0.05;
            const double v = p.gt.at(y, x) ? ink + noise : base + g + noise;
            p.degraded.at(0, y, x) = clamp01(v);
        }
    return p;
}

DatasetIndex write_synth_corpus(const std::string& dir, i64 count, i64 size,
                                std::uint64_t seed) {
    if (count <= 0) throw ValueError("corpus needs at least one pair");
    Rng rng(seed);
    DatasetIndex index;
    const auto& years = dibco_years();
    for (i64 i = 0; i < count; ++i) {
        const SynthPair p = synth_pair(size, rng);
        DatasetEntry e;
        e.year = years[static_cast<size_t>(i) % years.size()];
        e.degraded = dir + "/synth_" + std::to_string(i) + ".png";
        e.gt = dir + "/synth_" + std::to_string(i) + "_gt.png";
        write_image(e.degraded, p.degraded);
        write_image(e.gt, mask_to_image(p.gt));
        index.entries.push_back(std::move(e));
    }
    write_manifest(dir + "/manifest.tsv", index);
    return index;
}

}  // namespace amsdb
