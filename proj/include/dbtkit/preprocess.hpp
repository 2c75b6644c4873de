#ifndef DBTKIT_PREPROCESS_HPP
#define DBTKIT_PREPROCESS_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dbtkit/types.hpp"

namespace dbtkit {

struct Mask2D {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> data;  // 0 or 1, row-major

    Mask2D() = default;
    Mask2D(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0) {}

    std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1));
    }
    bool operator==(const Mask2D&) const = default;
};

struct Slice2D {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Slice2D() = default;
    Slice2D(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

    float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Per-slice breast segmentation on the (downscaled) pixel grid.
struct BreastMask {
    int rows = 0;
    int cols = 0;
    int scale_factor = 1;
    std::vector<Mask2D> slices;
};

inline Slice2D extract_slice(const Volume& v, int s) {
    Slice2D out(v.meta.rows, v.meta.cols);
    const std::size_t n = static_cast<std::size_t>(v.meta.rows) * v.meta.cols;
    std::copy_n(v.voxels.begin() + static_cast<std::ptrdiff_t>(n * s), n, out.data.begin());
    return out;
}

/// Linear VOI transform: clamp((raw - (center - width/2)) / width, 0, 1).
inline Volume window_level(const Volume& v) {
    if (v.meta.window_width <= 0.0) throw std::invalid_argument("window_width must be > 0");
    Volume out;
    out.meta = v.meta;
    out.dtype = VoxelType::float32;
    out.voxels.resize(v.voxels.size());
    const double lo = v.meta.window_center - v.meta.window_width / 2.0;
    const double inv = 1.0 / v.meta.window_width;
    for (std::size_t i = 0; i < v.voxels.size(); ++i) {
        const double t = (static_cast<double>(v.voxels[i]) - lo) * inv;
        out.voxels[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
    return out;
}

/// 2x2 local-mean downscale; odd trailing row/col discarded.
inline Slice2D downscale_2x(const Slice2D& in) {
    if (in.rows < 2 || in.cols < 2)
        throw std::invalid_argument("downscale_2x needs at least 2x2 input");
    Slice2D out(in.rows / 2, in.cols / 2);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c)
            out.at(r, c) = (in.at(2 * r, 2 * c) + in.at(2 * r, 2 * c + 1) +
                            in.at(2 * r + 1, 2 * c) + in.at(2 * r + 1, 2 * c + 1)) /
                           4.0f;
    return out;
}

inline Volume downscale_volume_2x(const Volume& v) {
    if (v.meta.rows < 2 || v.meta.cols < 2)
        throw std::invalid_argument("downscale_2x needs at least 2x2 slices");
    Volume out;
    out.meta = v.meta;
    out.meta.rows = v.meta.rows / 2;
    out.meta.cols = v.meta.cols / 2;
    out.meta.scale_factor = v.meta.scale_factor * 2;
    out.dtype = VoxelType::float32;
    out.voxels.resize(static_cast<std::size_t>(out.meta.slices) * out.meta.rows * out.meta.cols);
    for (int s = 0; s < v.meta.slices; ++s) {
        Slice2D ds = downscale_2x(extract_slice(v, s));
        std::copy(ds.data.begin(), ds.data.end(),
                  out.voxels.begin() + static_cast<std::ptrdiff_t>(out.index(s, 0, 0)));
    }
    return out;
}

/// Binary erosion with a Euclidean disc (d^2 <= r^2 on integer offsets);
/// pixels outside the image count as zero.
inline Mask2D erode_nonzero(const Mask2D& mask, int radius = 5) {
    if (radius < 0) throw std::invalid_argument("radius must be >= 0");
    if (radius == 0) return mask;

    std::vector<std::pair<int, int>> disc;
    for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
            if (dr * dr + dc * dc <= radius * radius) disc.emplace_back(dr, dc);

    Mask2D out(mask.rows, mask.cols);
    for (int r = 0; r < mask.rows; ++r) {
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            bool keep = true;
            for (const auto& [dr, dc] : disc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= mask.rows || cc < 0 || cc >= mask.cols ||
                    !mask.at(rr, cc)) {
                    keep = false;
                    break;
                }
            }
            out.at(r, c) = keep ? 1 : 0;
        }
    }
    return out;
}

/// Keeps the 8-connected component with the most pixels; earliest in scan
/// order wins a tie. Empty input stays empty.
inline Mask2D largest_connected_component(const Mask2D& mask) {
    Mask2D out(mask.rows, mask.cols);
    std::vector<int> label(mask.data.size(), -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> stack;

    for (int r = 0; r < mask.rows; ++r) {
        for (int c = 0; c < mask.cols; ++c) {
            const std::size_t start = static_cast<std::size_t>(r) * mask.cols + c;
            if (!mask.data[start] || label[start] != -1) continue;
            const int id = static_cast<int>(sizes.size());
            sizes.push_back(0);
            stack.assign(1, start);
            label[start] = id;
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                ++sizes[id];
                const int cr = static_cast<int>(cur) / mask.cols;
                const int cc = static_cast<int>(cur) % mask.cols;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= mask.rows || nc < 0 || nc >= mask.cols) continue;
                        const std::size_t ni = static_cast<std::size_t>(nr) * mask.cols + nc;
                        if (mask.data[ni] && label[ni] == -1) {
                            label[ni] = id;
                            stack.push_back(ni);
                        }
                    }
                }
            }
        }
    }
    if (sizes.empty()) return out;

    const int best = static_cast<int>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t i = 0; i < label.size(); ++i)
        if (label[i] == best) out.data[i] = 1;
    return out;
}

inline Mask2D nonzero_mask(const Slice2D& s) {
    Mask2D m(s.rows, s.cols);
    for (std::size_t i = 0; i < s.data.size(); ++i) m.data[i] = s.data[i] != 0.0f ? 1 : 0;
    return m;
}

/// Per-slice: nonzero -> disc erosion -> largest connected component.
/// Expects a window-leveled (and typically downscaled) volume.
inline BreastMask breast_mask(const Volume& v, int erosion_radius = 5) {
    BreastMask bm;
    bm.rows = v.meta.rows;
    bm.cols = v.meta.cols;
    bm.scale_factor = v.meta.scale_factor;
    bm.slices.reserve(static_cast<std::size_t>(v.meta.slices));
    for (int s = 0; s < v.meta.slices; ++s) {
        Mask2D m = nonzero_mask(extract_slice(v, s));
        m = erode_nonzero(m, erosion_radius);
        bm.slices.push_back(largest_connected_component(m));
    }
    return bm;
}

}  // namespace dbtkit

#endif  // DBTKIT_PREPROCESS_HPP
