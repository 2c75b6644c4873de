// Independent brute-force oracles used by the unit and acceptance suites.
// These deliberately re-derive results from first principles and share no
// code path with the library implementations they check.
#ifndef DBTKIT_TESTS_ORACLES_HPP
#define DBTKIT_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include "dbtkit/froceval.hpp"
#include "dbtkit/preprocess.hpp"
#include "dbtkit/rng.hpp"
#include "dbtkit/types.hpp"

namespace oracles {

// Erosion: keep a pixel iff every offset with dr^2+dc^2 <= r^2 lands on a
// set in-bounds pixel.
inline dbtkit::Mask2D erode_brute(const dbtkit::Mask2D& m, int radius) {
    dbtkit::Mask2D out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c)) continue;
            bool keep = true;
            for (int dr = -radius; dr <= radius && keep; ++dr)
                for (int dc = -radius; dc <= radius && keep; ++dc) {
                    if (dr * dr + dc * dc > radius * radius) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= m.rows || cc < 0 || cc >= m.cols || !m.at(rr, cc))
                        keep = false;
                }
            if (keep) out.at(r, c) = 1;
        }
    }
    return out;
}

// Largest 8-connected component via BFS flood fill.
inline dbtkit::Mask2D lcc_flood(const dbtkit::Mask2D& m) {
    dbtkit::Mask2D visited(m.rows, m.cols);
    std::vector<std::vector<std::pair<int, int>>> components;
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c) || visited.at(r, c)) continue;
            std::vector<std::pair<int, int>> comp;
            std::deque<std::pair<int, int>> queue{{r, c}};
            visited.at(r, c) = 1;
            while (!queue.empty()) {
                auto [cr, cc] = queue.front();
                queue.pop_front();
                comp.emplace_back(cr, cc);
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= m.rows || nc < 0 || nc >= m.cols) continue;
                        if (m.at(nr, nc) && !visited.at(nr, nc)) {
                            visited.at(nr, nc) = 1;
                            queue.emplace_back(nr, nc);
                        }
                    }
            }
            components.push_back(std::move(comp));
        }
    }
    dbtkit::Mask2D out(m.rows, m.cols);
    if (components.empty()) return out;
    std::size_t best = 0;
    for (std::size_t i = 1; i < components.size(); ++i)
        if (components[i].size() > components[best].size()) best = i;
    for (auto [r, c] : components[best]) out.at(r, c) = 1;
    return out;
}

// Count of connected components, for single-component checks.
inline int component_count(const dbtkit::Mask2D& m) {
    dbtkit::Mask2D visited(m.rows, m.cols);
    int count = 0;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c) || visited.at(r, c)) continue;
            ++count;
            std::deque<std::pair<int, int>> queue{{r, c}};
            visited.at(r, c) = 1;
            while (!queue.empty()) {
                auto [cr, cc] = queue.front();
                queue.pop_front();
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= m.rows || nc < 0 || nc >= m.cols) continue;
                        if (m.at(nr, nc) && !visited.at(nr, nc)) {
                            visited.at(nr, nc) = 1;
                            queue.emplace_back(nr, nc);
                        }
                    }
            }
        }
    return count;
}

// IoU by counting unit pixels for integer-aligned boxes.
inline double iou_pixel_enum(const dbtkit::Box2D& a, const dbtkit::Box2D& b) {
    auto inside = [](const dbtkit::Box2D& box, int px, int py) {
        return px >= box.x && px < box.x + box.width && py >= box.y && py < box.y + box.height;
    };
    const int lo_x = static_cast<int>(std::min(a.x, b.x));
    const int hi_x = static_cast<int>(std::max(a.x + a.width, b.x + b.width));
    const int lo_y = static_cast<int>(std::min(a.y, b.y));
    const int hi_y = static_cast<int>(std::max(a.y + a.height, b.y + b.height));
    long inter = 0, uni = 0;
    for (int px = lo_x; px < hi_x; ++px)
        for (int py = lo_y; py < hi_y; ++py) {
            const bool ia = inside(a, px, py), ib = inside(b, px, py);
            if (ia && ib) ++inter;
            if (ia || ib) ++uni;
        }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// FROC re-derived from scratch: enumerate every distinct score as a
// threshold and redo the greedy one-to-one matching each time.
inline dbtkit::FrocCurve froc_brute(const std::vector<dbtkit::Prediction>& preds,
                                    const std::vector<dbtkit::GroundTruthLesion>& gts,
                                    const std::vector<dbtkit::VolumeMeta>& volumes,
                                    const dbtkit::MatchCriteria& c,
                                    dbtkit::FrocUnit unit = dbtkit::FrocUnit::per_volume) {
    std::map<dbtkit::VolumeKey, int> slices_of;
    std::set<dbtkit::BreastKey> breasts;
    long total_slices = 0;
    for (const auto& m : volumes) {
        slices_of[m.key()] = m.slices;
        breasts.insert(dbtkit::BreastKey{m.patient_id, m.study_id, m.laterality});
        total_slices += m.slices;
    }
    double denom = 0.0;
    switch (unit) {
        case dbtkit::FrocUnit::per_volume: denom = double(volumes.size()); break;
        case dbtkit::FrocUnit::per_breast: denom = double(breasts.size()); break;
        case dbtkit::FrocUnit::per_slice: denom = double(total_slices); break;
    }

    dbtkit::FrocCurve curve;
    curve.unit = unit;
    if (preds.empty()) {
        curve.points.push_back({1.0, 0.0, 0.0});
        return curve;
    }

    std::set<double, std::greater<>> thresholds;
    for (const auto& p : preds) thresholds.insert(p.score);

    std::set<dbtkit::BreastKey> gt_breasts;
    for (const auto& g : gts) gt_breasts.insert(dbtkit::breast_of(g.volume_key));

    for (double t : thresholds) {
        std::vector<const dbtkit::Prediction*> active;
        for (const auto& p : preds)
            if (p.score >= t) active.push_back(&p);
        std::stable_sort(active.begin(), active.end(),
                         [](auto* a, auto* b) { return a->score > b->score; });
        std::vector<bool> taken(gts.size(), false);
        long fp = 0;
        for (const auto* p : active) {
            bool assigned = false;
            for (std::size_t g = 0; g < gts.size() && !assigned; ++g) {
                if (taken[g] || !(gts[g].volume_key == p->volume_key)) continue;
                if (dbtkit::is_match(*p, gts[g], slices_of.at(p->volume_key), c)) {
                    taken[g] = true;
                    assigned = true;
                }
            }
            if (!assigned) ++fp;
        }
        double detected;
        if (unit == dbtkit::FrocUnit::per_breast) {
            std::set<dbtkit::BreastKey> hit;
            for (std::size_t g = 0; g < gts.size(); ++g)
                if (taken[g]) hit.insert(dbtkit::breast_of(gts[g].volume_key));
            detected = double(hit.size());
        } else {
            detected = double(std::count(taken.begin(), taken.end(), true));
        }
        const double sens_denom = unit == dbtkit::FrocUnit::per_breast ? double(gt_breasts.size())
                                                                       : double(gts.size());
        curve.points.push_back(
            {t, double(fp) / denom, sens_denom > 0.0 ? detected / sens_denom : 0.0});
    }
    return curve;
}

// Random evaluation instance for the FROC equivalence sweep.
struct RandomInstance {
    std::vector<dbtkit::VolumeMeta> volumes;
    std::vector<dbtkit::GroundTruthLesion> gts;
    std::vector<dbtkit::Prediction> preds;
};

inline RandomInstance random_instance(dbtkit::Rng& rng) {
    RandomInstance inst;
    const int n_vol = static_cast<int>(rng.uniform_int(1, 5));
    for (int v = 0; v < n_vol; ++v) {
        dbtkit::VolumeMeta m;
        m.patient_id = "P" + std::to_string(v / 2);  // some patients share volumes
        m.study_id = "S" + std::to_string(v / 2);
        m.laterality = v % 2 == 0 ? dbtkit::Laterality::L : dbtkit::Laterality::R;
        m.view = rng.bernoulli(0.5) ? dbtkit::View::CC : dbtkit::View::MLO;
        m.slices = static_cast<int>(rng.uniform_int(8, 64));
        m.rows = 2000;
        m.cols = 1500;
        m.window_center = 2048;
        m.window_width = 4096;
        inst.volumes.push_back(m);
    }
    const int n_gt = static_cast<int>(rng.uniform_int(0, 4));
    for (int g = 0; g < n_gt; ++g) {
        const auto& m = inst.volumes[rng.uniform_index(inst.volumes.size())];
        dbtkit::GroundTruthLesion gt;
        gt.volume_key = m.key();
        gt.box = dbtkit::Box2D{rng.uniform(0, 1200), rng.uniform(0, 1600), rng.uniform(30, 300),
                               rng.uniform(30, 300)};
        gt.center_slice = static_cast<int>(rng.uniform_int(0, m.slices - 1));
        gt.lesion_class = rng.bernoulli(0.5) ? dbtkit::LesionClass::cancer
                                             : dbtkit::LesionClass::benign;
        inst.gts.push_back(gt);
    }
    const int n_pred = static_cast<int>(rng.uniform_int(0, 10));
    for (int p = 0; p < n_pred; ++p) {
        const auto& m = inst.volumes[rng.uniform_index(inst.volumes.size())];
        dbtkit::Prediction pr;
        pr.volume_key = m.key();
        pr.box = dbtkit::Box2D{rng.uniform(0, 1200), rng.uniform(0, 1600), rng.uniform(30, 300),
                               rng.uniform(30, 300)};
        pr.center_slice = static_cast<int>(rng.uniform_int(0, m.slices - 1));
        // Occasionally duplicate a score to exercise threshold grouping.
        pr.score = rng.bernoulli(0.2) && !inst.preds.empty() ? inst.preds.back().score
                                                             : rng.uniform(0.01, 1.0);
        inst.preds.push_back(pr);
    }
    return inst;
}

inline bool curves_equal(const dbtkit::FrocCurve& a, const dbtkit::FrocCurve& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (a.points[i].threshold != b.points[i].threshold ||
            a.points[i].avg_fp != b.points[i].avg_fp ||
            a.points[i].sensitivity != b.points[i].sensitivity)
            return false;
    return true;
}

inline dbtkit::Mask2D random_mask(dbtkit::Rng& rng, int rows, int cols, double density) {
    dbtkit::Mask2D m(rows, cols);
    for (auto& px : m.data) px = rng.bernoulli(density) ? 1 : 0;
    return m;
}

// Blobby random mask: union of random discs, more like a real segmentation.
inline dbtkit::Mask2D random_blob_mask(dbtkit::Rng& rng, int rows, int cols, int n_blobs) {
    dbtkit::Mask2D m(rows, cols);
    for (int b = 0; b < n_blobs; ++b) {
        const double cr = rng.uniform(0, rows), cc = rng.uniform(0, cols);
        const double rad = rng.uniform(3, rows / 3.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) m.at(r, c) = 1;
    }
    return m;
}

}  // namespace oracles

#endif  // DBTKIT_TESTS_ORACLES_HPP
