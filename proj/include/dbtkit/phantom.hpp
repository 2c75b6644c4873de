#ifndef DBTKIT_PHANTOM_HPP
#define DBTKIT_PHANTOM_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbtkit/froceval.hpp"
#include "dbtkit/rng.hpp"
#include "dbtkit/types.hpp"

namespace dbtkit {

/// Synthetic half-disc "breast" on a dark background with bright ellipsoidal
/// lesions. Everything is driven by the seed; the same (seed, index) pair
/// reproduces the volume bitwise.
struct PhantomParams {
    int slices = 24;
    int rows = 512;
    int cols = 384;
    double breast_radius_fraction = 0.85;  // of the row half-extent
    double background_intensity = 1000.0;  // raw units
    int lesion_count = 2;
    double lesion_min_size = 40.0;  // box side, original px
    double lesion_max_size = 120.0;
    double lesion_contrast = 500.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (slices < 1 || rows < 16 || cols < 16)
            throw std::invalid_argument("phantom dims too small");
        if (!(breast_radius_fraction > 0.0 && breast_radius_fraction <= 1.0))
            throw std::invalid_argument("breast_radius_fraction must be in (0,1]");
        if (lesion_count < 0) throw std::invalid_argument("lesion_count must be >= 0");
        if (lesion_min_size <= 0.0 || lesion_max_size < lesion_min_size)
            throw std::invalid_argument("bad lesion size range");
        if (background_intensity <= 0.0 || lesion_contrast <= 0.0)
            throw std::invalid_argument("intensities must be positive");
    }
};

struct PhantomVolume {
    Volume volume;
    std::vector<GroundTruthLesion> lesions;
};

namespace detail {

// Chest wall sits at column 0; the breast is the half-disc around
// (rows/2, 0) of radius R.
struct BreastGeometry {
    double center_row;
    double radius;

    bool contains(double r, double c, double margin = 0.0) const {
        const double dr = r - center_row;
        return c >= 0.0 && std::sqrt(dr * dr + c * c) <= radius - margin;
    }
};

inline BreastGeometry breast_geometry(const PhantomParams& p) {
    return BreastGeometry{p.rows / 2.0, p.breast_radius_fraction * (p.rows / 2.0)};
}

}  // namespace detail

/// One synthetic volume plus its ground truth, keyed "P<index>". Lesions are
/// placed fully inside the breast with margin for the skin erosion and do not
/// overlap each other; placement failure after bounded retries throws.
inline PhantomVolume generate_phantom(const PhantomParams& p, int index = 0,
                                      Laterality laterality = Laterality::L,
                                      View view = View::CC) {
    p.validate();
    Rng rng = Rng::derive(p.seed, static_cast<std::uint64_t>(index));

    PhantomVolume out;
    VolumeMeta& meta = out.volume.meta;
    meta.patient_id = "P" + std::to_string(index);
    meta.study_id = "S" + std::to_string(index);
    meta.laterality = laterality;
    meta.view = view;
    meta.slices = p.slices;
    meta.rows = p.rows;
    meta.cols = p.cols;
    meta.scale_factor = 1;
    // Lower window edge at raw 0 so air stays exactly zero after leveling.
    meta.window_center = p.background_intensity;
    meta.window_width = 2.0 * p.background_intensity;

    const auto geo = detail::breast_geometry(p);
    out.volume.dtype = VoxelType::uint16;
    out.volume.voxels.assign(
        static_cast<std::size_t>(p.slices) * p.rows * p.cols, 0.0f);
    for (int s = 0; s < p.slices; ++s)
        for (int r = 0; r < p.rows; ++r)
            for (int c = 0; c < p.cols; ++c)
                if (geo.contains(r, c))
                    out.volume.at(s, r, c) = static_cast<float>(p.background_intensity);

    // Margin: 5-px erosion on the 2x-downscaled grid removes ~10 original
    // pixels of rim, plus slack so box centers stay inside the final mask.
    const double placement_margin = 24.0;
    struct Placed {
        double row, col, semi_r, semi_c;
        int slice, semi_s;
    };
    std::vector<Placed> placed;
    for (int li = 0; li < p.lesion_count; ++li) {
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
            const double w = rng.uniform(p.lesion_min_size, p.lesion_max_size);
            const double h = rng.uniform(p.lesion_min_size, p.lesion_max_size);
            const double semi_c = w / 2.0, semi_r = h / 2.0;
            const double max_semi = std::max(semi_c, semi_r);
            const double row = rng.uniform(geo.center_row - geo.radius + max_semi,
                                           geo.center_row + geo.radius - max_semi);
            const double col = rng.uniform(max_semi + 2.0, geo.radius);
            if (!geo.contains(row - semi_r, col, placement_margin) ||
                !geo.contains(row + semi_r, col, placement_margin) ||
                !geo.contains(row, col + semi_c, placement_margin) ||
                !geo.contains(row, col - semi_c > 0.0 ? col - semi_c : 0.0, placement_margin))
                continue;
            const int slice = static_cast<int>(rng.uniform_int(0, p.slices - 1));
            const int semi_s = std::max(
                1, static_cast<int>(std::nearbyint(std::sqrt((w + h) / 2.0) / 2.0)));
            bool overlaps = false;
            for (const auto& q : placed) {
                if (std::abs(row - q.row) < semi_r + q.semi_r + 4.0 &&
                    std::abs(col - q.col) < semi_c + q.semi_c + 4.0) {
                    overlaps = true;
                    break;
                }
            }
            if (overlaps) continue;

            placed.push_back(Placed{row, col, semi_r, semi_c, slice, semi_s});
            ok = true;
        }
        if (!ok)
            throw std::runtime_error("could not place lesion " + std::to_string(li) +
                                     " without overlap");
    }

    const float lesion_value = static_cast<float>(p.background_intensity + p.lesion_contrast);
    for (const auto& q : placed) {
        const int s_lo = std::max(0, q.slice - q.semi_s);
        const int s_hi = std::min(p.slices - 1, q.slice + q.semi_s);
        const int r_lo = static_cast<int>(std::floor(q.row - q.semi_r));
        const int r_hi = static_cast<int>(std::ceil(q.row + q.semi_r));
        const int c_lo = static_cast<int>(std::floor(q.col - q.semi_c));
        const int c_hi = static_cast<int>(std::ceil(q.col + q.semi_c));
        for (int s = s_lo; s <= s_hi; ++s) {
            const double zs = (s - q.slice) / static_cast<double>(q.semi_s + 1);
            for (int r = r_lo; r <= r_hi; ++r)
                for (int c = c_lo; c <= c_hi; ++c) {
                    const double zr = (r - q.row) / q.semi_r;
                    const double zc = (c - q.col) / q.semi_c;
                    if (zr * zr + zc * zc + zs * zs <= 1.0)
                        out.volume.at(s, r, c) = lesion_value;
                }
        }

        GroundTruthLesion gt;
        gt.volume_key = meta.key();
        gt.box = Box2D{q.col - q.semi_c, q.row - q.semi_r, 2.0 * q.semi_c, 2.0 * q.semi_r};
        gt.center_slice = q.slice;
        gt.lesion_class = rng.bernoulli(0.5) ? LesionClass::cancer : LesionClass::benign;
        gt.kind = rng.bernoulli(0.8) ? LesionKind::mass : LesionKind::architectural_distortion;
        out.lesions.push_back(gt);
    }
    return out;
}

/// Score/behavior model for a simulated detector.
struct DetectorProfile {
    double tp_rate = 1.0;         // per-lesion detection probability
    double fp_per_volume = 0.0;   // Poisson mean
    double center_jitter_px = 10.0;
    double tp_score_min = 0.55;   // TP scores stochastically higher than FP
    double tp_score_max = 1.0;
    double fp_score_min = 0.05;
    double fp_score_max = 0.5;

    void validate() const {
        if (!(tp_rate >= 0.0 && tp_rate <= 1.0))
            throw std::invalid_argument("tp_rate must be in [0,1]");
        if (fp_per_volume < 0.0) throw std::invalid_argument("fp_per_volume must be >= 0");
        if (center_jitter_px < 0.0) throw std::invalid_argument("jitter must be >= 0");
        if (!(tp_score_min > 0.0 && tp_score_min <= tp_score_max && tp_score_max <= 1.0) ||
            !(fp_score_min > 0.0 && fp_score_min <= fp_score_max && fp_score_max <= 1.0))
            throw std::invalid_argument("score ranges must lie in (0,1]");
    }
};

/// Predictions with configured TP/FP behavior: detected lesions get a center
/// jittered inside the match tolerance; false boxes are placed so they can
/// never match any ground truth. One derived stream per volume.
inline std::vector<Prediction> simulate_detector(const std::vector<GroundTruthLesion>& gts,
                                                 const std::vector<VolumeMeta>& volumes,
                                                 const DetectorProfile& d, std::uint64_t seed,
                                                 const MatchCriteria& c = {}) {
    d.validate();
    c.validate();
    std::vector<Prediction> preds;
    for (std::size_t vi = 0; vi < volumes.size(); ++vi) {
        const VolumeMeta& m = volumes[vi];
        Rng rng = Rng::derive(seed, vi);
        std::vector<const GroundTruthLesion*> vol_gts;
        for (const auto& g : gts)
            if (g.volume_key == m.key()) vol_gts.push_back(&g);

        for (const auto* g : vol_gts) {
            if (!rng.bernoulli(d.tp_rate)) continue;
            const double tol = std::max(g->box.diagonal() / 2.0, c.min_distance_px);
            const double radius = rng.uniform() * std::min(d.center_jitter_px, 0.9 * tol);
            const double angle = rng.uniform() * 2.0 * 3.14159265358979323846;
            Prediction p;
            p.volume_key = m.key();
            p.box = g->box;
            p.box.x += radius * std::cos(angle);
            p.box.y += radius * std::sin(angle);
            const int z_tol = static_cast<int>(c.z_fraction * m.slices);
            const int dz = z_tol > 0 ? static_cast<int>(rng.uniform_int(-std::min(z_tol, 2),
                                                                        std::min(z_tol, 2)))
                                     : 0;
            p.center_slice = std::clamp(g->center_slice + dz, 0, m.slices - 1);
            p.score = rng.uniform(d.tp_score_min, d.tp_score_max);
            preds.push_back(p);
        }

        const int n_fp = rng.poisson(d.fp_per_volume);
        for (int f = 0; f < n_fp; ++f) {
            bool ok = false;
            for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
                const double w = rng.uniform(40.0, 120.0);
                const double h = rng.uniform(40.0, 120.0);
                const double cx = rng.uniform(w / 2.0, m.cols - w / 2.0);
                const double cy = rng.uniform(h / 2.0, m.rows - h / 2.0);
                bool clear = true;
                for (const auto* g : vol_gts) {
                    const double tol = std::max(g->box.diagonal() / 2.0, c.min_distance_px);
                    const double dx = cx - g->box.center_x();
                    const double dy = cy - g->box.center_y();
                    if (std::sqrt(dx * dx + dy * dy) < tol + 1.0) {
                        clear = false;
                        break;
                    }
                }
                if (!clear) continue;
                Prediction p;
                p.volume_key = m.key();
                p.box = Box2D{cx - w / 2.0, cy - h / 2.0, w, h};
                p.center_slice = static_cast<int>(rng.uniform_int(0, m.slices - 1));
                p.score = rng.uniform(d.fp_score_min, d.fp_score_max);
                preds.push_back(p);
                ok = true;
            }
            // Tiny volumes may not fit another clear false box; skip quietly.
        }
    }
    return preds;
}

}  // namespace dbtkit

#endif  // DBTKIT_PHANTOM_HPP
