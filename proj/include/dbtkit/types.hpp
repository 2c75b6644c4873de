#ifndef DBTKIT_TYPES_HPP
#define DBTKIT_TYPES_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace dbtkit {

enum class Laterality { L, R };
enum class View { CC, MLO };
enum class LesionClass { benign, cancer };
enum class LesionKind { mass, architectural_distortion };
enum class CohortGroup { normal, actionable, benign, cancer };

inline std::string to_string(Laterality l) { return l == Laterality::L ? "L" : "R"; }
inline std::string to_string(View v) { return v == View::CC ? "CC" : "MLO"; }
inline std::string to_string(LesionClass c) { return c == LesionClass::benign ? "benign" : "cancer"; }
inline std::string to_string(LesionKind k) {
    return k == LesionKind::mass ? "mass" : "architectural_distortion";
}
inline std::string to_string(CohortGroup g) {
    switch (g) {
        case CohortGroup::normal: return "normal";
        case CohortGroup::actionable: return "actionable";
        case CohortGroup::benign: return "benign";
        case CohortGroup::cancer: return "cancer";
    }
    return "?";
}

inline Laterality laterality_from_string(const std::string& s) {
    if (s == "L") return Laterality::L;
    if (s == "R") return Laterality::R;
    throw std::invalid_argument("unknown laterality: " + s);
}
inline View view_from_string(const std::string& s) {
    if (s == "CC") return View::CC;
    if (s == "MLO") return View::MLO;
    throw std::invalid_argument("unknown view: " + s);
}
inline LesionClass lesion_class_from_string(const std::string& s) {
    if (s == "benign") return LesionClass::benign;
    if (s == "cancer") return LesionClass::cancer;
    throw std::invalid_argument("unknown class: " + s);
}
inline LesionKind lesion_kind_from_string(const std::string& s) {
    if (s == "mass") return LesionKind::mass;
    if (s == "architectural_distortion" || s == "AD") return LesionKind::architectural_distortion;
    throw std::invalid_argument("unknown kind: " + s);
}
inline CohortGroup cohort_group_from_string(const std::string& s) {
    if (s == "normal") return CohortGroup::normal;
    if (s == "actionable") return CohortGroup::actionable;
    if (s == "benign") return CohortGroup::benign;
    if (s == "cancer") return CohortGroup::cancer;
    throw std::invalid_argument("unknown group: " + s);
}

/// Axis-aligned rectangle, top-left origin, continuous pixel coordinates.
struct Box2D {
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
    double height = 0.0;

    double center_x() const { return x + width / 2.0; }
    double center_y() const { return y + height / 2.0; }
    double area() const { return width * height; }
    double diagonal() const { return std::sqrt(width * width + height * height); }
};

/// Identifies one reconstruction view of one study.
struct VolumeKey {
    std::string patient_id;
    std::string study_id;
    Laterality laterality = Laterality::L;
    View view = View::CC;

    auto tie() const { return std::tie(patient_id, study_id, laterality, view); }
    bool operator==(const VolumeKey& o) const { return tie() == o.tie(); }
    bool operator<(const VolumeKey& o) const { return tie() < o.tie(); }
};

/// (patient, study, laterality) — the unit of breast-based evaluation.
struct BreastKey {
    std::string patient_id;
    std::string study_id;
    Laterality laterality = Laterality::L;

    auto tie() const { return std::tie(patient_id, study_id, laterality); }
    bool operator==(const BreastKey& o) const { return tie() == o.tie(); }
    bool operator<(const BreastKey& o) const { return tie() < o.tie(); }
};

inline BreastKey breast_of(const VolumeKey& k) {
    return BreastKey{k.patient_id, k.study_id, k.laterality};
}

enum class VoxelType : std::uint8_t { uint16 = 0, float32 = 1 };

struct VolumeMeta {
    std::string patient_id;
    std::string study_id;
    Laterality laterality = Laterality::L;
    View view = View::CC;
    double window_center = 0.0;
    double window_width = 1.0;
    int slices = 1;
    int rows = 1;
    int cols = 1;
    int scale_factor = 1;  // 1 = original pixel grid, 2 = after downscale

    VolumeKey key() const { return VolumeKey{patient_id, study_id, laterality, view}; }

    void validate() const {
        if (window_width <= 0.0) throw std::invalid_argument("window_width must be > 0");
        if (slices < 1 || rows < 1 || cols < 1)
            throw std::invalid_argument("volume dims must be >= 1");
        if (scale_factor < 1) throw std::invalid_argument("scale_factor must be >= 1");
    }
};

/// Slice-major, then row-major voxel stack. Values are raw intensities or
/// normalized floats depending on provenance; `dtype` records the on-disk form.
struct Volume {
    VolumeMeta meta;
    VoxelType dtype = VoxelType::uint16;
    std::vector<float> voxels;  // size = slices * rows * cols

    std::size_t index(int s, int r, int c) const {
        return (static_cast<std::size_t>(s) * meta.rows + r) * meta.cols + c;
    }
    float at(int s, int r, int c) const { return voxels[index(s, r, c)]; }
    float& at(int s, int r, int c) { return voxels[index(s, r, c)]; }

    void validate() const {
        meta.validate();
        const auto expected = static_cast<std::size_t>(meta.slices) * meta.rows * meta.cols;
        if (voxels.size() != expected)
            throw std::invalid_argument("voxel count does not match meta dims");
    }
};

struct GroundTruthLesion {
    VolumeKey volume_key;
    Box2D box;  // ORIGINAL pixel units
    int center_slice = 0;
    LesionClass lesion_class = LesionClass::benign;
    LesionKind kind = LesionKind::mass;
};

struct Prediction {
    VolumeKey volume_key;
    Box2D box;  // ORIGINAL pixel units once finalized
    int center_slice = 0;
    double score = 1.0;  // in (0, 1]
};

struct CohortEntry {
    std::string patient_id;
    CohortGroup group = CohortGroup::normal;
    std::vector<std::string> study_ids;
    std::vector<LesionKind> lesion_kinds;  // empty for normal/actionable

    void validate() const {
        if (study_ids.empty()) throw std::invalid_argument("study_ids must be non-empty");
        const bool biopsied = group == CohortGroup::benign || group == CohortGroup::cancer;
        if (!biopsied && !lesion_kinds.empty())
            throw std::invalid_argument("lesion_kinds must be empty for " + to_string(group));
        if (biopsied && lesion_kinds.empty())
            throw std::invalid_argument("lesion_kinds required for " + to_string(group));
    }
};

}  // namespace dbtkit

#endif  // DBTKIT_TYPES_HPP
