#ifndef DBTKIT_GRIDCODEC_HPP
#define DBTKIT_GRIDCODEC_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dbtkit/rng.hpp"
#include "dbtkit/types.hpp"

namespace dbtkit {

/// Detector lattice: square cells, one square anchor box.
struct GridSpec {
    int cell_size = 96;
    int anchor_size = 256;
    int grid_rows = 0;
    int grid_cols = 0;

    double cell_center_x(int col) const { return col * cell_size + cell_size / 2.0; }
    double cell_center_y(int row) const { return row * cell_size + cell_size / 2.0; }
};

struct CellPred {
    double objectness = 0.0;  // in [0,1]
    double dx = 0.0;          // center offset in cell units
    double dy = 0.0;
    double sw = 0.0;          // ln(size / anchor)
    double sh = 0.0;
};

/// One box per cell, row-major.
struct GridOutput {
    int grid_rows = 0;
    int grid_cols = 0;
    std::vector<CellPred> cells;

    GridOutput() = default;
    GridOutput(int r, int c) : grid_rows(r), grid_cols(c), cells(static_cast<std::size_t>(r) * c) {}

    CellPred& at(int r, int c) { return cells[static_cast<std::size_t>(r) * grid_cols + c]; }
    const CellPred& at(int r, int c) const {
        return cells[static_cast<std::size_t>(r) * grid_cols + c];
    }
};

struct PaddedDims {
    int rows = 0;
    int cols = 0;
    GridSpec spec;
};

/// Smallest multiple-of-cell dims covering the image, plus the induced grid.
inline PaddedDims pad_to_grid(int rows, int cols, int cell_size = 96, int anchor_size = 256) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("image dims must be >= 1");
    PaddedDims p;
    p.spec.cell_size = cell_size;
    p.spec.anchor_size = anchor_size;
    p.spec.grid_rows = (rows + cell_size - 1) / cell_size;
    p.spec.grid_cols = (cols + cell_size - 1) / cell_size;
    p.rows = p.spec.grid_rows * cell_size;
    p.cols = p.spec.grid_cols * cell_size;
    return p;
}

struct EncodedBox {
    int cell_row = 0;
    int cell_col = 0;
    double dx = 0.0;
    double dy = 0.0;
    double sw = 0.0;
    double sh = 0.0;
};

/// Box -> (cell, offsets, log-scales). Half-open cells, so every center maps
/// to exactly one cell; offsets land in [-0.5, 0.5).
inline EncodedBox encode_box(const Box2D& box, const GridSpec& spec) {
    if (box.width <= 0.0 || box.height <= 0.0)
        throw std::invalid_argument("box dims must be positive");
    const double cx = box.center_x();
    const double cy = box.center_y();
    if (cx < 0.0 || cy < 0.0 || cx >= spec.grid_cols * spec.cell_size ||
        cy >= spec.grid_rows * spec.cell_size)
        throw std::invalid_argument("box center outside the padded image");
    EncodedBox e;
    e.cell_col = static_cast<int>(std::floor(cx / spec.cell_size));
    e.cell_row = static_cast<int>(std::floor(cy / spec.cell_size));
    e.dx = (cx - spec.cell_center_x(e.cell_col)) / spec.cell_size;
    e.dy = (cy - spec.cell_center_y(e.cell_row)) / spec.cell_size;
    e.sw = std::log(box.width / spec.anchor_size);
    e.sh = std::log(box.height / spec.anchor_size);
    return e;
}

struct ScoredBox {
    Box2D box;  // same pixel grid as the grid spec (downscaled units)
    double score = 0.0;
};

inline Box2D decode_cell(const CellPred& p, int row, int col, const GridSpec& spec) {
    const double cx = spec.cell_center_x(col) + p.dx * spec.cell_size;
    const double cy = spec.cell_center_y(row) + p.dy * spec.cell_size;
    const double w = spec.anchor_size * std::exp(p.sw);
    const double h = spec.anchor_size * std::exp(p.sh);
    return Box2D{cx - w / 2.0, cy - h / 2.0, w, h};
}

/// Every cell at or above the objectness threshold becomes a scored box.
inline std::vector<ScoredBox> decode_grid(const GridOutput& out, const GridSpec& spec,
                                          double score_threshold) {
    if (score_threshold < 0.0 || score_threshold > 1.0)
        throw std::invalid_argument("score threshold must be in [0,1]");
    std::vector<ScoredBox> boxes;
    for (int r = 0; r < out.grid_rows; ++r)
        for (int c = 0; c < out.grid_cols; ++c) {
            const CellPred& p = out.at(r, c);
            if (p.objectness >= score_threshold)
                boxes.push_back(ScoredBox{decode_cell(p, r, c, spec), p.objectness});
        }
    return boxes;
}

/// Slice span of a ground-truth box: sqrt of the mean side length, rounded
/// half-to-even, floored at one. Validation halves the span (same rounding).
inline int positive_slice_span(const Box2D& box, bool validation_mode = false) {
    if (box.width <= 0.0 || box.height <= 0.0)
        throw std::invalid_argument("box dims must be positive");
    const double raw = std::sqrt((box.width + box.height) / 2.0);
    int span = std::max(1, static_cast<int>(std::nearbyint(raw)));
    if (validation_mode) span = std::max(1, static_cast<int>(std::nearbyint(span / 2.0)));
    return span;
}

/// 3D ground-truth extent: the annotated slice plus `span`-1 neighbors,
/// extra slice after the center for even spans. Clamped to [0, slices).
inline std::pair<int, int> slice_range(int center_slice, int span, int total_slices) {
    const int before = (span - 1) / 2;
    const int after = span - 1 - before;
    return {std::max(0, center_slice - before), std::min(total_slices - 1, center_slice + after)};
}

struct CropOrigin {
    int x = 0;  // column of the crop's top-left corner
    int y = 0;  // row
};

/// Uniformly random crop origin such that the crop contains the whole
/// ground-truth box and stays inside the image. Dims are rows x cols.
inline CropOrigin sample_training_crop(int image_rows, int image_cols, const Box2D& gt_box,
                                       Rng& rng, int crop_rows = 1056, int crop_cols = 672) {
    if (gt_box.width > crop_cols || gt_box.height > crop_rows)
        throw std::invalid_argument("ground-truth box larger than the crop");
    if (image_rows < crop_rows || image_cols < crop_cols)
        throw std::invalid_argument("image smaller than the crop; pad first");

    const auto feasible = [](double box_lo, double box_hi, int crop_len,
                             int image_len) -> std::pair<int, int> {
        int lo = static_cast<int>(std::ceil(box_hi - crop_len));
        int hi = static_cast<int>(std::floor(box_lo));
        lo = std::max(lo, 0);
        hi = std::min(hi, image_len - crop_len);
        return {lo, hi};
    };
    const auto [x_lo, x_hi] = feasible(gt_box.x, gt_box.x + gt_box.width, crop_cols, image_cols);
    const auto [y_lo, y_hi] = feasible(gt_box.y, gt_box.y + gt_box.height, crop_rows, image_rows);
    if (x_lo > x_hi || y_lo > y_hi)
        throw std::invalid_argument("no integer crop origin contains the box");
    return CropOrigin{static_cast<int>(rng.uniform_int(x_lo, x_hi)),
                      static_cast<int>(rng.uniform_int(y_lo, y_hi))};
}

}  // namespace dbtkit

#endif  // DBTKIT_GRIDCODEC_HPP
