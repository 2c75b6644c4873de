#ifndef DBTKIT_CONFIG_HPP
#define DBTKIT_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dbtkit {

/// Every pipeline constant in one place; defaults are the reference values
/// the rest of the library assumes.
struct Config {
    int cell_size = 96;
    int anchor_size = 256;
    int crop_rows = 1056;
    int crop_cols = 672;
    int erosion_radius = 5;
    double max_score_ratio = 10.0;
    double min_iou = 0.5;
    double min_distance_px = 100.0;
    double z_fraction = 0.25;
    int patience = 25;
    // Relative weight of the localization term against objectness; not
    // calibrated against any reference, exposed for experimentation.
    double loc_loss_weight = 1.0;

    std::string serialize() const {
        std::ostringstream os;
        os << "cell_size=" << cell_size << "\n"
           << "anchor_size=" << anchor_size << "\n"
           << "crop_rows=" << crop_rows << "\n"
           << "crop_cols=" << crop_cols << "\n"
           << "erosion_radius=" << erosion_radius << "\n"
           << "max_score_ratio=" << max_score_ratio << "\n"
           << "min_iou=" << min_iou << "\n"
           << "min_distance_px=" << min_distance_px << "\n"
           << "z_fraction=" << z_fraction << "\n"
           << "patience=" << patience << "\n"
           << "loc_loss_weight=" << loc_loss_weight << "\n";
        return os.str();
    }

    /// FNV-1a over the serialized form; goes into output provenance lines.
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : serialize()) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

/// key=value per line; '#' starts a comment; unknown keys are rejected.
inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "cell_size") cfg.cell_size = std::stoi(value);
            else if (key == "anchor_size") cfg.anchor_size = std::stoi(value);
            else if (key == "crop_rows") cfg.crop_rows = std::stoi(value);
            else if (key == "crop_cols") cfg.crop_cols = std::stoi(value);
            else if (key == "erosion_radius") cfg.erosion_radius = std::stoi(value);
            else if (key == "max_score_ratio") cfg.max_score_ratio = std::stod(value);
            else if (key == "min_iou") cfg.min_iou = std::stod(value);
            else if (key == "min_distance_px") cfg.min_distance_px = std::stod(value);
            else if (key == "z_fraction") cfg.z_fraction = std::stod(value);
            else if (key == "patience") cfg.patience = std::stoi(value);
            else if (key == "loc_loss_weight") cfg.loc_loss_weight = std::stod(value);
            else
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": bad value for '" + key + "'");
        }
    }
    return cfg;
}

}  // namespace dbtkit

#endif  // DBTKIT_CONFIG_HPP
