#ifndef DBTKIT_POSTPROCESS_HPP
#define DBTKIT_POSTPROCESS_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dbtkit/gridcodec.hpp"
#include "dbtkit/preprocess.hpp"
#include "dbtkit/types.hpp"

namespace dbtkit {

struct MergeRule {
    double max_score_ratio = 10.0;  // >= 1
    double min_iou = 0.5;           // in (0,1]

    void validate() const {
        if (max_score_ratio < 1.0) throw std::invalid_argument("max_score_ratio must be >= 1");
        if (!(min_iou > 0.0 && min_iou <= 1.0))
            throw std::invalid_argument("min_iou must be in (0,1]");
    }
};

/// Continuous-area intersection over union of two rectangles.
inline double iou(const Box2D& a, const Box2D& b) {
    if (a.width <= 0.0 || a.height <= 0.0 || b.width <= 0.0 || b.height <= 0.0)
        throw std::invalid_argument("boxes need positive dims");
    const double ix = std::max(0.0, std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x));
    const double iy =
        std::max(0.0, std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y));
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

/// Volume-level aggregation: the slice stack is split into halves
/// [0, ceil(Z/2)) and [ceil(Z/2), Z); per-cell channels are averaged within
/// each half, each averaged grid is decoded, and every emitted prediction
/// carries the middle slice of its half.
inline std::vector<Prediction> combine_volume_predictions(
    const std::vector<GridOutput>& per_slice_grids, const GridSpec& spec,
    double score_threshold = 0.0, const VolumeKey& key = {}) {
    if (per_slice_grids.empty()) throw std::invalid_argument("need at least one slice grid");
    const int z = static_cast<int>(per_slice_grids.size());
    for (const auto& g : per_slice_grids)
        if (g.grid_rows != spec.grid_rows || g.grid_cols != spec.grid_cols)
            throw std::invalid_argument("slice grid dims disagree with the grid spec");

    const int split = (z + 1) / 2;  // first half gets the extra slice
    std::vector<Prediction> out;
    for (const auto& [begin, end] : {std::pair{0, split}, std::pair{split, z}}) {
        if (begin == end) continue;
        GridOutput avg(spec.grid_rows, spec.grid_cols);
        for (int s = begin; s < end; ++s)
            for (std::size_t i = 0; i < avg.cells.size(); ++i) {
                const CellPred& c = per_slice_grids[static_cast<std::size_t>(s)].cells[i];
                avg.cells[i].objectness += c.objectness;
                avg.cells[i].dx += c.dx;
                avg.cells[i].dy += c.dy;
                avg.cells[i].sw += c.sw;
                avg.cells[i].sh += c.sh;
            }
        const double inv = 1.0 / (end - begin);
        for (auto& c : avg.cells) {
            c.objectness *= inv;
            c.dx *= inv;
            c.dy *= inv;
            c.sw *= inv;
            c.sh *= inv;
        }
        const int mid = begin + (end - begin - 1) / 2;
        for (const ScoredBox& sb : decode_grid(avg, spec, score_threshold)) {
            Prediction p;
            p.volume_key = key;
            p.box = sb.box;
            p.center_slice = mid;
            p.score = sb.score;
            out.push_back(p);
        }
    }
    return out;
}

/// Fraction of a box covered by the mask, counted over integer pixels whose
/// center falls inside the box. Zero when no pixel center is inside.
inline double mask_coverage(const Box2D& box, const Mask2D& mask) {
    // Pixel (r, c) has its center at (c + 0.5, r + 0.5); membership is
    // half-open in the box. Pixels outside the image count toward the
    // denominator but never toward the mask.
    const int r_lo = static_cast<int>(std::ceil(box.y - 0.5));
    const int r_hi = static_cast<int>(std::floor(box.y + box.height - 0.5 - 1e-12));
    const int c_lo = static_cast<int>(std::ceil(box.x - 0.5));
    const int c_hi = static_cast<int>(std::floor(box.x + box.width - 0.5 - 1e-12));
    long total = 0, inside = 0;
    for (int r = r_lo; r <= r_hi; ++r)
        for (int c = c_lo; c <= c_hi; ++c) {
            ++total;
            if (r >= 0 && r < mask.rows && c >= 0 && c < mask.cols && mask.at(r, c)) ++inside;
        }
    return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

/// Drops boxes with less than half of their pixels in the breast region.
/// The mask slice nearest the prediction's center slice is used.
inline std::vector<Prediction> filter_by_breast_mask(const std::vector<Prediction>& preds,
                                                     const BreastMask& mask) {
    if (mask.slices.empty()) throw std::invalid_argument("empty breast mask");
    std::vector<Prediction> kept;
    for (const auto& p : preds) {
        const int s = std::clamp(p.center_slice, 0, static_cast<int>(mask.slices.size()) - 1);
        if (mask_coverage(p.box, mask.slices[static_cast<std::size_t>(s)]) >= 0.5)
            kept.push_back(p);
    }
    return kept;
}

/// Greedy merge, highest score first: a same-volume pair with IoU above the
/// gate and score ratio below the cap collapses onto its higher-score member,
/// which keeps its geometry and score (the max of the two). Repeats to
/// fixpoint; output sorted by descending score.
inline std::vector<Prediction> ratio_nms(std::vector<Prediction> preds, const MergeRule& rule) {
    rule.validate();
    for (const auto& p : preds)
        if (!(p.score > 0.0 && p.score <= 1.0))
            throw std::invalid_argument("prediction scores must be in (0,1]");

    auto by_score = [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.box.x != b.box.x) return a.box.x < b.box.x;
        return a.box.y < b.box.y;
    };
    std::sort(preds.begin(), preds.end(), by_score);

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            for (std::size_t j = i + 1; j < preds.size();) {
                const double ratio = preds[i].score / preds[j].score;  // >= 1 by sort order
                if (preds[i].volume_key == preds[j].volume_key &&
                    ratio < rule.max_score_ratio && iou(preds[i].box, preds[j].box) > rule.min_iou) {
                    preds.erase(preds.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                } else {
                    ++j;
                }
            }
        }
    }
    return preds;
}

}  // namespace dbtkit

#endif  // DBTKIT_POSTPROCESS_HPP
