#ifndef DBTKIT_FROCEVAL_HPP
#define DBTKIT_FROCEVAL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "dbtkit/types.hpp"

namespace dbtkit {

struct MatchCriteria {
    double min_distance_px = 100.0;  // original pixels
    double z_fraction = 0.25;        // slice tolerance as a fraction of Z
    // The in-plane tolerance is half the ground-truth diagonal; flip this to
    // measure against the predicted box's diagonal instead.
    bool use_prediction_diagonal = false;

    void validate() const {
        if (min_distance_px <= 0.0) throw std::invalid_argument("min_distance_px must be > 0");
        if (!(z_fraction > 0.0 && z_fraction <= 0.5))
            throw std::invalid_argument("z_fraction must be in (0, 0.5]");
    }
};

enum class FrocUnit { per_volume, per_breast, per_slice };

inline std::string to_string(FrocUnit u) {
    switch (u) {
        case FrocUnit::per_volume: return "volume";
        case FrocUnit::per_breast: return "breast";
        case FrocUnit::per_slice: return "slice";
    }
    return "?";
}

struct FrocPoint {
    double threshold = 0.0;
    double avg_fp = 0.0;
    double sensitivity = 0.0;
};

struct FrocCurve {
    FrocUnit unit = FrocUnit::per_volume;
    std::vector<FrocPoint> points;  // thresholds strictly decreasing
};

struct EpochRecord {
    int epoch = 0;
    double sens_at_2fp = 0.0;
    double sens_at_1fp = 0.0;
};

/// True-positive criterion: center distance below max(diag/2, 100 px) and the
/// predicted center slice within 25% of the volume's slices of the annotated
/// one (inclusive bounds). Both boxes must be in original pixel units.
inline bool is_match(const Prediction& pred, const GroundTruthLesion& gt, int total_slices,
                     const MatchCriteria& c) {
    c.validate();
    if (total_slices < 1) throw std::invalid_argument("total_slices must be >= 1");
    const double diag = c.use_prediction_diagonal ? pred.box.diagonal() : gt.box.diagonal();
    const double tol = std::max(diag / 2.0, c.min_distance_px);
    const double dx = pred.box.center_x() - gt.box.center_x();
    const double dy = pred.box.center_y() - gt.box.center_y();
    const bool xy_ok = std::sqrt(dx * dx + dy * dy) < tol;
    const bool z_ok =
        std::abs(pred.center_slice - gt.center_slice) <= c.z_fraction * total_slices;
    return xy_ok && z_ok;
}

/// Scale a prediction decoded on a downscaled grid back to original pixels.
inline Prediction rescale_to_original(Prediction p, int scale_factor) {
    if (scale_factor < 1) throw std::invalid_argument("scale_factor must be >= 1");
    p.box.x *= scale_factor;
    p.box.y *= scale_factor;
    p.box.width *= scale_factor;
    p.box.height *= scale_factor;
    return p;
}

namespace detail {

struct MatchedSet {
    std::vector<bool> gt_detected;  // parallel to gts
    long unmatched_preds = 0;
};

// Greedy one-to-one assignment at one threshold: highest-score predictions
// first, each claims the first still-undetected matching GT of its volume.
inline MatchedSet match_at_threshold(const std::vector<const Prediction*>& preds_by_score,
                                     const std::vector<GroundTruthLesion>& gts,
                                     const std::map<VolumeKey, int>& slices_of, double threshold,
                                     const MatchCriteria& c) {
    MatchedSet m;
    m.gt_detected.assign(gts.size(), false);
    for (const Prediction* p : preds_by_score) {
        if (p->score < threshold) break;
        bool matched = false;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (m.gt_detected[g] || !(gts[g].volume_key == p->volume_key)) continue;
            if (is_match(*p, gts[g], slices_of.at(p->volume_key), c)) {
                m.gt_detected[g] = true;
                matched = true;
                break;
            }
        }
        if (!matched) ++m.unmatched_preds;
    }
    return m;
}

}  // namespace detail

/// FROC sweep over the distinct prediction scores, highest first.
/// `unit` picks the false-positive denominator (volumes, breasts, or total
/// slices) and, for breasts, the grouped sensitivity rule.
inline FrocCurve froc_curve(const std::vector<Prediction>& preds,
                            const std::vector<GroundTruthLesion>& gts,
                            const std::vector<VolumeMeta>& volumes, const MatchCriteria& c,
                            FrocUnit unit = FrocUnit::per_volume) {
    c.validate();
    if (volumes.empty()) throw std::invalid_argument("need at least one volume");

    std::map<VolumeKey, int> slices_of;
    long total_slices = 0;
    std::set<BreastKey> breasts;
    for (const auto& m : volumes) {
        if (m.scale_factor != 1)
            throw std::invalid_argument("volume metadata must be in original units "
                                        "(scale_factor 1); rescale predictions first");
        slices_of[m.key()] = m.slices;
        total_slices += m.slices;
        breasts.insert(BreastKey{m.patient_id, m.study_id, m.laterality});
    }
    for (const auto& p : preds)
        if (!slices_of.count(p.volume_key))
            throw std::invalid_argument("prediction references unlisted volume");
    for (const auto& g : gts)
        if (!slices_of.count(g.volume_key))
            throw std::invalid_argument("ground truth references unlisted volume");

    double unit_count = 0.0;
    switch (unit) {
        case FrocUnit::per_volume: unit_count = static_cast<double>(volumes.size()); break;
        case FrocUnit::per_breast: unit_count = static_cast<double>(breasts.size()); break;
        case FrocUnit::per_slice: unit_count = static_cast<double>(total_slices); break;
    }

    std::set<BreastKey> gt_breasts;
    for (const auto& g : gts) gt_breasts.insert(breast_of(g.volume_key));
    const double sens_denom = unit == FrocUnit::per_breast
                                  ? static_cast<double>(gt_breasts.size())
                                  : static_cast<double>(gts.size());

    std::vector<const Prediction*> by_score;
    by_score.reserve(preds.size());
    for (const auto& p : preds) {
        if (!(p.score > 0.0 && p.score <= 1.0))
            throw std::invalid_argument("prediction scores must be in (0,1]");
        by_score.push_back(&p);
    }
    std::stable_sort(by_score.begin(), by_score.end(),
                     [](const Prediction* a, const Prediction* b) { return a->score > b->score; });

    FrocCurve curve;
    curve.unit = unit;
    if (by_score.empty()) {
        curve.points.push_back(FrocPoint{1.0, 0.0, 0.0});
        return curve;
    }

    std::vector<double> thresholds;
    for (const Prediction* p : by_score)
        if (thresholds.empty() || p->score < thresholds.back()) thresholds.push_back(p->score);

    for (double t : thresholds) {
        const auto m = detail::match_at_threshold(by_score, gts, slices_of, t, c);
        double detected;
        if (unit == FrocUnit::per_breast) {
            std::set<BreastKey> hit;
            for (std::size_t g = 0; g < gts.size(); ++g)
                if (m.gt_detected[g]) hit.insert(breast_of(gts[g].volume_key));
            detected = static_cast<double>(hit.size());
        } else {
            detected = static_cast<double>(
                std::count(m.gt_detected.begin(), m.gt_detected.end(), true));
        }
        FrocPoint pt;
        pt.threshold = t;
        pt.avg_fp = static_cast<double>(m.unmatched_preds) / unit_count;
        pt.sensitivity = sens_denom > 0.0 ? detected / sens_denom : 0.0;
        curve.points.push_back(pt);
    }
    return curve;
}

inline FrocCurve breast_froc(const std::vector<Prediction>& preds,
                             const std::vector<GroundTruthLesion>& gts,
                             const std::vector<VolumeMeta>& volumes, const MatchCriteria& c) {
    return froc_curve(preds, gts, volumes, c, FrocUnit::per_breast);
}

/// Step-function reading of the curve: sensitivity of the last point whose
/// average FP count fits the budget; 0 when none does.
inline double sensitivity_at(const FrocCurve& curve, double fp_budget) {
    if (fp_budget < 0.0) throw std::invalid_argument("fp_budget must be >= 0");
    double sens = 0.0;
    for (const auto& pt : curve.points)
        if (pt.avg_fp <= fp_budget) sens = pt.sensitivity;
    return sens;
}

/// Highest sensitivity at 2 FP, ties broken by sensitivity at 1 FP, then by
/// the earliest epoch.
inline EpochRecord select_model(const std::vector<EpochRecord>& records) {
    if (records.empty()) throw std::invalid_argument("no epoch records");
    const EpochRecord* best = &records.front();
    for (const auto& r : records) {
        if (r.sens_at_2fp > best->sens_at_2fp ||
            (r.sens_at_2fp == best->sens_at_2fp && r.sens_at_1fp > best->sens_at_1fp))
            best = &r;
    }
    return *best;
}

/// True once the best value is more than `patience` epochs in the past.
/// A re-achieved best resets the clock.
inline bool early_stop(const std::vector<double>& history, int patience = 25) {
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (history.empty()) return false;
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i] >= history[best]) best = i;
    return static_cast<int>(history.size() - 1 - best) > patience;
}

}  // namespace dbtkit

#endif  // DBTKIT_FROCEVAL_HPP
