#include "amsdb/threshold.hpp"

#include <cmath>

#include "amsdb/kernels_ref.hpp"

namespace amsdb {

namespace {

void check_gray(const Image& img, const char* who) {
    if (img.c != 1 || img.w <= 0 || img.h <= 0)
        throw ValueError(std::string(who) + " expects a nonempty gray image");
}

void check_window(i64 window, const char* who) {
    if (window < 3 || window % 2 == 0)
        throw ValueError(std::string(who) + ": window must be odd and >= 3, got " +
                         std::to_string(window));
}

int bin_of(float v) {
    const long b = std::lround(static_cast<double>(v) * 255.0);
    return static_cast<int>(b < 0 ? 0 : (b > 255 ? 255 : b));
}

struct LocalStats {
    std::vector<double> mean, sqmean;  // per pixel, h*w
};

// Windowed mean / mean-of-squares via integral images of the reflect-padded
// frame; exact up to double rounding.
LocalStats local_stats(const Image& img, i64 window) {
    const i64 h = img.h, w = img.w, r = window / 2;
    const i64 ph = h + 2 * r, pw = w + 2 * r;
    std::vector<double> s((ph + 1) * (pw + 1), 0.0);
    std::vector<double> s2((ph + 1) * (pw + 1), 0.0);
    for (i64 y = 0; y < ph; ++y) {
        const i64 sy = kern::reflect_index(y - r, h);
        for (i64 x = 0; x < pw; ++x) {
            const double v = img.pix[sy * w + kern::reflect_index(x - r, w)];
            const i64 i = (y + 1) * (pw + 1) + (x + 1);
            s[i] = v + s[i - 1] + s[i - pw - 1] - s[i - pw - 2];
            s2[i] = v * v + s2[i - 1] + s2[i - pw - 1] - s2[i - pw - 2];
        }
    }
    LocalStats st;
    st.mean.resize(h * w);
    st.sqmean.resize(h * w);
    const double inv = 1.0 / static_cast<double>(window * window);
    for (i64 y = 0; y < h; ++y)
        for (i64 x = 0; x < w; ++x) {
            // Window [y, y+window) x [x, x+window) in padded coordinates.
            const i64 y0 = y, x0 = x, y1 = y + window, x1 = x + window;
            const double sum = s[y1 * (pw + 1) + x1] - s[y0 * (pw + 1) + x1] -
                               s[y1 * (pw + 1) + x0] + s[y0 * (pw + 1) + x0];
            const double sq = s2[y1 * (pw + 1) + x1] -
                              s2[y0 * (pw + 1) + x1] -
                              s2[y1 * (pw + 1) + x0] + s2[y0 * (pw + 1) + x0];
            st.mean[y * w + x] = sum * inv;
            st.sqmean[y * w + x] = sq * inv;
        }
    return st;
}

}  // namespace

std::pair<int, Mask> otsu(const Image& gray) {
    check_gray(gray, "otsu");
    i64 hist[256] = {};
    for (float v : gray.pix) ++hist[bin_of(v)];
    const i64 total = static_cast<i64>(gray.pix.size());

    int lo = 0, hi = 255;
    while (hist[lo] == 0) ++lo;
    while (hist[hi] == 0) --hi;
    int best_t;
    if (lo == hi) {
        best_t = lo;  // constant image: threshold at its own bin
    } else {
        best_t = 0;
        double best_var = -1.0;
        i64 w0 = 0;
        double sum0 = 0.0, sum_all = 0.0;
        for (int b = 0; b < 256; ++b)
            sum_all += static_cast<double>(b) * static_cast<double>(hist[b]);
        for (int t = 0; t <= 255; ++t) {
            // classes: bins < t vs bins >= t
            const i64 w1 = total - w0;
            if (w0 > 0 && w1 > 0) {
                const double mu0 = sum0 / static_cast<double>(w0);
                const double mu1 =
                    (sum_all - sum0) / static_cast<double>(w1);
                const double var = static_cast<double>(w0) *
                                   static_cast<double>(w1) * (mu0 - mu1) *
                                   (mu0 - mu1);
                if (var > best_var) {
                    best_var = var;
                    best_t = t;
                }
            }
            if (t < 256) {
                w0 += hist[t];
                sum0 += static_cast<double>(t) * static_cast<double>(hist[t]);
            }
        }
    }
    Mask m = make_mask(gray.w, gray.h);
    for (size_t i = 0; i < gray.pix.size(); ++i)
        m.ink[i] = bin_of(gray.pix[i]) < best_t ? 1 : 0;
    return {best_t, m};
}

Mask sauvola(const Image& gray, i64 window, double k, double R) {
    check_gray(gray, "sauvola");
    check_window(window, "sauvola");
    if (R <= 0.0) throw ValueError("sauvola: R must be positive");
    const LocalStats st = local_stats(gray, window);
    Mask out = make_mask(gray.w, gray.h);
    for (size_t i = 0; i < gray.pix.size(); ++i) {
        const double m = st.mean[i];
        const double var = std::max(0.0, st.sqmean[i] - m * m);
        const double t = m * (1.0 + k * (std::sqrt(var) / R - 1.0));
        out.ink[i] = static_cast<double>(gray.pix[i]) < t ? 1 : 0;
    }
    return out;
}

Mask bradley(const Image& gray, i64 window, double t_percent) {
    check_gray(gray, "bradley");
    check_window(window, "bradley");
    const LocalStats st = local_stats(gray, window);
    const double scale = 1.0 - t_percent / 100.0;
    Mask out = make_mask(gray.w, gray.h);
    for (size_t i = 0; i < gray.pix.size(); ++i)
        out.ink[i] =
            static_cast<double>(gray.pix[i]) < st.mean[i] * scale ? 1 : 0;
    return out;
}

}  // namespace amsdb
