#include "amsdb/metrics.hpp"

#include <cmath>

#include "amsdb/skeleton.hpp"

namespace amsdb {

namespace {

void check_dims(const Mask& a, const Mask& b) {
    if (a.w != b.w || a.h != b.h)
        throw ShapeError("mask dims differ: " + std::to_string(a.w) + "x" +
                         std::to_string(a.h) + " vs " + std::to_string(b.w) +
                         "x" + std::to_string(b.h));
}

struct Counts {
    i64 tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts count(const Mask& pred, const Mask& ref) {
    Counts c;
    for (size_t i = 0; i < pred.ink.size(); ++i) {
        const bool p = pred.ink[i] != 0, r = ref.ink[i] != 0;
        if (p && r)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (r)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double harmonic_pct(double p, double r) {
    return (p + r > 0.0) ? 200.0 * p * r / (p + r) : 0.0;
}

}  // namespace

double psnr(const Mask& pred, const Mask& gt) {
    check_dims(pred, gt);
    i64 diff = 0;
    for (size_t i = 0; i < pred.ink.size(); ++i)
        diff += (pred.ink[i] != gt.ink[i]) ? 1 : 0;
    if (diff == 0) return 100.0;
    const double mse =
        static_cast<double>(diff) / static_cast<double>(pred.ink.size());
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

PRF f_measure(const Mask& pred, const Mask& gt) {
    check_dims(pred, gt);
    const Counts c = count(pred, gt);
    PRF out;
    if (c.tp + c.fn == 0) {
        out.defined = false;
        return out;
    }
    out.precision = (c.tp + c.fp > 0)
                        ? static_cast<double>(c.tp) /
                              static_cast<double>(c.tp + c.fp)
                        : 0.0;
    out.recall =
        static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    out.f = harmonic_pct(out.precision, out.recall);
    return out;
}

PRF pseudo_f_measure(const Mask& pred, const Mask& gt) {
    check_dims(pred, gt);
    PRF base = f_measure(pred, gt);
    if (!base.defined) return base;
    Mask skel = skeletonize(gt);
    bool skel_empty = true;
    for (auto v : skel.ink)
        if (v) {
            skel_empty = false;
            break;
        }
    // Thinning can erase tiny blobs entirely; recall then falls back to the
    // full ground truth so the metric stays defined.
    const Mask& ref = skel_empty ? gt : skel;
    const Counts c = count(pred, ref);
    PRF out;
    out.precision = base.precision;
    out.recall =
        static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    out.f = harmonic_pct(out.precision, out.recall);
    return out;
}

MetricsReport evaluate_pair(const Mask& pred, const Mask& gt) {
    check_dims(pred, gt);
    MetricsReport r;
    const Counts c = count(pred, gt);
    r.tp = c.tp;
    r.fp = c.fp;
    r.fn = c.fn;
    r.tn = c.tn;
    r.psnr = psnr(pred, gt);
    const PRF f = f_measure(pred, gt);
    if (!f.defined) {
        r.defined = false;
        return r;
    }
    r.precision = 100.0 * f.precision;
    r.recall = 100.0 * f.recall;
    r.fmeasure = f.f;
    const PRF pf = pseudo_f_measure(pred, gt);
    r.pseudo_recall = 100.0 * pf.recall;
    r.pseudo_fmeasure = pf.f;
    return r;
}

}  // namespace amsdb
