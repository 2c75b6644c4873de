#ifndef DBTKIT_IO_HPP
#define DBTKIT_IO_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbtkit/types.hpp"

namespace dbtkit {

// A volume on disk is a sidecar JSON (the VolumeMeta fields) next to a raw
// little-endian voxel file, slice-major then row-major. `path` is the stem:
// <path>.json + <path>.raw. The voxel type is inferred from the raw byte
// count (2 bytes -> uint16, 4 bytes -> float32).

inline nlohmann::json meta_to_json(const VolumeMeta& m) {
    return nlohmann::json{
        {"patient_id", m.patient_id}, {"study_id", m.study_id},
        {"laterality", to_string(m.laterality)}, {"view", to_string(m.view)},
        {"window_center", m.window_center}, {"window_width", m.window_width},
        {"slices", m.slices}, {"rows", m.rows}, {"cols", m.cols},
        {"scale_factor", m.scale_factor}};
}

inline VolumeMeta meta_from_json(const nlohmann::json& j) {
    VolumeMeta m;
    m.patient_id = j.at("patient_id").get<std::string>();
    m.study_id = j.at("study_id").get<std::string>();
    m.laterality = laterality_from_string(j.at("laterality").get<std::string>());
    m.view = view_from_string(j.at("view").get<std::string>());
    m.window_center = j.at("window_center").get<double>();
    m.window_width = j.at("window_width").get<double>();
    m.slices = j.at("slices").get<int>();
    m.rows = j.at("rows").get<int>();
    m.cols = j.at("cols").get<int>();
    m.scale_factor = j.value("scale_factor", 1);
    m.validate();
    return m;
}

namespace detail {

inline void put_u16_le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint16_t get_u16_le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void save_volume(const std::filesystem::path& stem, const Volume& v) {
    v.validate();
    {
        std::ofstream js(stem.string() + ".json");
        if (!js) throw std::runtime_error("cannot write " + stem.string() + ".json");
        js << meta_to_json(v.meta).dump(2) << "\n";
    }
    std::string buf;
    if (v.dtype == VoxelType::uint16) {
        buf.reserve(v.voxels.size() * 2);
        for (float f : v.voxels) {
            if (f < 0.0f || f > 65535.0f || f != static_cast<float>(static_cast<std::uint16_t>(f)))
                throw std::runtime_error("voxel value not representable as uint16");
            detail::put_u16_le(buf, static_cast<std::uint16_t>(f));
        }
    } else {
        buf.reserve(v.voxels.size() * 4);
        for (float f : v.voxels) detail::put_u32_le(buf, std::bit_cast<std::uint32_t>(f));
    }
    std::ofstream raw(stem.string() + ".raw", std::ios::binary);
    if (!raw) throw std::runtime_error("cannot write " + stem.string() + ".raw");
    raw.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Volume load_volume(const std::filesystem::path& stem) {
    std::ifstream js(stem.string() + ".json");
    if (!js) throw std::runtime_error("missing meta file: " + stem.string() + ".json");
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("bad meta file " + stem.string() + ".json: " + e.what());
    }
    Volume v;
    v.meta = meta_from_json(j);

    std::ifstream raw(stem.string() + ".raw", std::ios::binary);
    if (!raw) throw std::runtime_error("missing voxel file: " + stem.string() + ".raw");
    std::string bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());

    const std::size_t n =
        static_cast<std::size_t>(v.meta.slices) * v.meta.rows * v.meta.cols;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() == n * 2) {
        v.dtype = VoxelType::uint16;
        v.voxels.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            v.voxels[i] = static_cast<float>(detail::get_u16_le(p + 2 * i));
    } else if (bytes.size() == n * 4) {
        v.dtype = VoxelType::float32;
        v.voxels.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            v.voxels[i] = std::bit_cast<float>(detail::get_u32_le(p + 4 * i));
    } else {
        throw std::runtime_error("size mismatch: " + stem.string() + ".raw holds " +
                                 std::to_string(bytes.size()) + " bytes, meta implies " +
                                 std::to_string(n * 2) + " or " + std::to_string(n * 4));
    }
    return v;
}

// Annotation / prediction CSV. Shared header:
//   patient_id,study_id,laterality,view,slice,x,y,width,height,class,kind[,score]
// Predictions leave class/kind empty. Lines starting with '#' are provenance
// comments and are skipped on read.

inline const char* annotation_csv_header() {
    return "patient_id,study_id,laterality,view,slice,x,y,width,height,class,kind";
}
inline const char* prediction_csv_header() {
    return "patient_id,study_id,laterality,view,slice,x,y,width,height,class,kind,score";
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("row " + std::to_string(line_no) + ": bad " + what + " '" + s +
                                 "'");
    }
}

inline int parse_int(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("row " + std::to_string(line_no) + ": bad " + what + " '" + s +
                                 "'");
    }
}

template <typename RowFn>
void read_csv(std::istream& in, std::size_t min_fields, RowFn&& fn) {
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // header row, schema checked by position below
            continue;
        }
        auto fields = split_csv_row(line);
        if (fields.size() < min_fields)
            throw std::runtime_error("row " + std::to_string(line_no) + ": expected at least " +
                                     std::to_string(min_fields) + " fields, got " +
                                     std::to_string(fields.size()));
        fn(fields, line_no);
    }
}

inline VolumeKey parse_key(const std::vector<std::string>& f, int line_no) {
    try {
        return VolumeKey{f[0], f[1], laterality_from_string(f[2]), view_from_string(f[3])};
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("row " + std::to_string(line_no) + ": " + e.what());
    }
}

}  // namespace detail

inline std::vector<GroundTruthLesion> load_annotations(std::istream& in) {
    std::vector<GroundTruthLesion> out;
    detail::read_csv(in, 11, [&](const std::vector<std::string>& f, int line_no) {
        GroundTruthLesion g;
        g.volume_key = detail::parse_key(f, line_no);
        g.center_slice = detail::parse_int(f[4], line_no, "slice");
        g.box = Box2D{detail::parse_double(f[5], line_no, "x"),
                      detail::parse_double(f[6], line_no, "y"),
                      detail::parse_double(f[7], line_no, "width"),
                      detail::parse_double(f[8], line_no, "height")};
        if (g.box.width <= 0.0 || g.box.height <= 0.0)
            throw std::runtime_error("row " + std::to_string(line_no) +
                                     ": box dims must be positive");
        try {
            g.lesion_class = lesion_class_from_string(f[9]);
            g.kind = lesion_kind_from_string(f[10]);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("row " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(g);
    });
    return out;
}

inline std::vector<Prediction> load_predictions(std::istream& in) {
    std::vector<Prediction> out;
    detail::read_csv(in, 12, [&](const std::vector<std::string>& f, int line_no) {
        Prediction p;
        p.volume_key = detail::parse_key(f, line_no);
        p.center_slice = detail::parse_int(f[4], line_no, "slice");
        p.box = Box2D{detail::parse_double(f[5], line_no, "x"),
                      detail::parse_double(f[6], line_no, "y"),
                      detail::parse_double(f[7], line_no, "width"),
                      detail::parse_double(f[8], line_no, "height")};
        if (p.box.width <= 0.0 || p.box.height <= 0.0)
            throw std::runtime_error("row " + std::to_string(line_no) +
                                     ": box dims must be positive");
        p.score = detail::parse_double(f[11], line_no, "score");
        if (!(p.score > 0.0 && p.score <= 1.0))
            throw std::runtime_error("row " + std::to_string(line_no) +
                                     ": score must be in (0,1]");
        out.push_back(p);
    });
    return out;
}

inline std::vector<GroundTruthLesion> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return load_annotations(in);
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return load_predictions(in);
}

namespace detail {

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline void save_annotations(std::ostream& out, const std::vector<GroundTruthLesion>& gts,
                             const std::string& provenance = {}) {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << annotation_csv_header() << "\n";
    for (const auto& g : gts) {
        out << g.volume_key.patient_id << ',' << g.volume_key.study_id << ','
            << to_string(g.volume_key.laterality) << ',' << to_string(g.volume_key.view) << ','
            << g.center_slice << ',' << detail::format_double(g.box.x) << ','
            << detail::format_double(g.box.y) << ',' << detail::format_double(g.box.width) << ','
            << detail::format_double(g.box.height) << ',' << to_string(g.lesion_class) << ','
            << to_string(g.kind) << "\n";
    }
}

inline void save_predictions(std::ostream& out, const std::vector<Prediction>& preds,
                             const std::string& provenance = {}) {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << prediction_csv_header() << "\n";
    for (const auto& p : preds) {
        out << p.volume_key.patient_id << ',' << p.volume_key.study_id << ','
            << to_string(p.volume_key.laterality) << ',' << to_string(p.volume_key.view) << ','
            << p.center_slice << ',' << detail::format_double(p.box.x) << ','
            << detail::format_double(p.box.y) << ',' << detail::format_double(p.box.width) << ','
            << detail::format_double(p.box.height) << ",,," << detail::format_double(p.score)
            << "\n";
    }
}

inline void save_annotations(const std::filesystem::path& path,
                             const std::vector<GroundTruthLesion>& gts,
                             const std::string& provenance = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    save_annotations(out, gts, provenance);
}

inline void save_predictions(const std::filesystem::path& path,
                             const std::vector<Prediction>& preds,
                             const std::string& provenance = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    save_predictions(out, preds, provenance);
}

/// Volume metadata collection file (one JSON array) for the evaluation CLI.
inline void save_volume_metas(const std::filesystem::path& path,
                              const std::vector<VolumeMeta>& metas) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : metas) arr.push_back(meta_to_json(m));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << arr.dump(2) << "\n";
}

inline std::vector<VolumeMeta> load_volume_metas(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json arr;
    in >> arr;
    std::vector<VolumeMeta> metas;
    for (const auto& j : arr) metas.push_back(meta_from_json(j));
    return metas;
}

}  // namespace dbtkit

#endif  // DBTKIT_IO_HPP
