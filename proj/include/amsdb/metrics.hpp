#pragma once

// Binarisation quality metrics over ink masks (1 = foreground). PSNR treats
// pixels as {0,1} intensities and caps at 100 dB for identical inputs. The
// pseudo-F variant scores recall against the skeleton of the ground truth,
// keeping precision against the full ground truth.

#include "amsdb/image.hpp"

namespace amsdb {

struct PRF {
    double precision = 0.0;  // fractions in [0,1]
    double recall = 0.0;
    double f = 0.0;          // percent (x100)
    bool defined = true;     // false when gt has no foreground
};

struct MetricsReport {
    double psnr = 0.0;
    double precision = 0.0, recall = 0.0, fmeasure = 0.0;      // percent
    double pseudo_recall = 0.0, pseudo_fmeasure = 0.0;         // percent
    i64 tp = 0, fp = 0, fn = 0, tn = 0;
    bool defined = true;  // false when gt has no foreground
};

double psnr(const Mask& pred, const Mask& gt);       // ShapeError on dims
PRF f_measure(const Mask& pred, const Mask& gt);
PRF pseudo_f_measure(const Mask& pred, const Mask& gt);
MetricsReport evaluate_pair(const Mask& pred, const Mask& gt);

}  // namespace amsdb
