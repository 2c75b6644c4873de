// dbtkit command line: synthetic volumes in, FROC numbers out.
//
// Subcommands: phantom, preprocess, postprocess, eval, loss-table, split,
// run-all. Every output is deterministic for a fixed seed and carries a
// provenance comment (version, config hash, seed).

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbtkit/dbtkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string provenance(const dbtkit::Config& cfg, std::uint64_t seed) {
    std::ostringstream os;
    os << "dbtkit v" << kVersion << " config=" << std::hex << cfg.hash() << std::dec
       << " seed=" << seed;
    return os.str();
}

std::uint64_t seed_or_env(std::int64_t cli_seed) {
    if (cli_seed >= 0) return static_cast<std::uint64_t>(cli_seed);
    if (const char* env = std::getenv("DBTKIT_SEED")) return std::stoull(env);
    return 0;
}

// Parallel-for over [0, n) with stable per-index results.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Grid-output file: one volume's per-slice detector grids as JSON.
json grids_to_json(const dbtkit::VolumeKey& key, const dbtkit::GridSpec& spec, int scale_factor,
                   const std::vector<dbtkit::GridOutput>& slices) {
    json j;
    j["patient_id"] = key.patient_id;
    j["study_id"] = key.study_id;
    j["laterality"] = dbtkit::to_string(key.laterality);
    j["view"] = dbtkit::to_string(key.view);
    j["cell_size"] = spec.cell_size;
    j["anchor_size"] = spec.anchor_size;
    j["grid_rows"] = spec.grid_rows;
    j["grid_cols"] = spec.grid_cols;
    j["scale_factor"] = scale_factor;
    json arr = json::array();
    for (const auto& g : slices) {
        json row = json::array();
        for (const auto& c : g.cells) row.push_back({c.objectness, c.dx, c.dy, c.sw, c.sh});
        arr.push_back(std::move(row));
    }
    j["slices"] = std::move(arr);
    return j;
}

struct GridFile {
    dbtkit::VolumeKey key;
    dbtkit::GridSpec spec;
    int scale_factor = 1;
    std::vector<dbtkit::GridOutput> slices;
};

GridFile load_grid_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    in >> j;
    GridFile g;
    g.key = dbtkit::VolumeKey{
        j.at("patient_id").get<std::string>(), j.at("study_id").get<std::string>(),
        dbtkit::laterality_from_string(j.at("laterality").get<std::string>()),
        dbtkit::view_from_string(j.at("view").get<std::string>())};
    g.spec.cell_size = j.at("cell_size").get<int>();
    g.spec.anchor_size = j.at("anchor_size").get<int>();
    g.spec.grid_rows = j.at("grid_rows").get<int>();
    g.spec.grid_cols = j.at("grid_cols").get<int>();
    g.scale_factor = j.value("scale_factor", 1);
    for (const auto& slice : j.at("slices")) {
        dbtkit::GridOutput out(g.spec.grid_rows, g.spec.grid_cols);
        if (slice.size() != out.cells.size())
            throw std::runtime_error("grid file " + path.string() + ": cell count mismatch");
        for (std::size_t i = 0; i < out.cells.size(); ++i) {
            const auto& c = slice[i];
            out.cells[i] = dbtkit::CellPred{c.at(0).get<double>(), c.at(1).get<double>(),
                                            c.at(2).get<double>(), c.at(3).get<double>(),
                                            c.at(4).get<double>()};
        }
        g.slices.push_back(std::move(out));
    }
    return g;
}

dbtkit::BreastMask mask_from_volume(const dbtkit::Volume& v) {
    dbtkit::BreastMask m;
    m.rows = v.meta.rows;
    m.cols = v.meta.cols;
    m.scale_factor = v.meta.scale_factor;
    for (int s = 0; s < v.meta.slices; ++s) {
        dbtkit::Mask2D slice(v.meta.rows, v.meta.cols);
        for (std::size_t i = 0; i < slice.data.size(); ++i) {
            const std::size_t off = static_cast<std::size_t>(s) * slice.data.size() + i;
            slice.data[i] = v.voxels[off] != 0.0f ? 1 : 0;
        }
        m.slices.push_back(std::move(slice));
    }
    return m;
}

dbtkit::Volume mask_to_volume(const dbtkit::BreastMask& m, const dbtkit::VolumeMeta& base) {
    dbtkit::Volume v;
    v.meta = base;
    v.meta.rows = m.rows;
    v.meta.cols = m.cols;
    v.meta.slices = static_cast<int>(m.slices.size());
    v.meta.scale_factor = m.scale_factor;
    v.dtype = dbtkit::VoxelType::uint16;
    v.voxels.reserve(static_cast<std::size_t>(v.meta.slices) * m.rows * m.cols);
    for (const auto& s : m.slices)
        for (auto b : s.data) v.voxels.push_back(static_cast<float>(b));
    return v;
}

void write_froc_csv(std::ostream& out, const dbtkit::FrocCurve& curve,
                    const std::vector<double>& budgets, const std::string& prov) {
    out << "# " << prov << "\n";
    out << "threshold,avg_fp,sensitivity\n";
    out.precision(10);
    for (const auto& p : curve.points)
        out << p.threshold << ',' << p.avg_fp << ',' << p.sensitivity << "\n";
    for (double b : budgets)
        out << "# sensitivity@" << b << "FP/" << dbtkit::to_string(curve.unit) << " = "
            << dbtkit::sensitivity_at(curve, b) << "\n";
}

// Cohort CSV: patient_id,group,study_ids(;-separated),kinds(;-separated)
std::vector<dbtkit::CohortEntry> load_cohort(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<dbtkit::CohortEntry> entries;
    std::string line;
    int line_no = 0;
    bool header = false;
    auto split_on = [](const std::string& s, char sep) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == sep) {
                out.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        out.push_back(cur);
        return out;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        auto f = split_on(line, ',');
        if (f.size() < 3)
            throw std::runtime_error("cohort row " + std::to_string(line_no) + ": too few fields");
        dbtkit::CohortEntry e;
        e.patient_id = f[0];
        e.group = dbtkit::cohort_group_from_string(f[1]);
        for (const auto& s : split_on(f[2], ';'))
            if (!s.empty()) e.study_ids.push_back(s);
        if (f.size() > 3)
            for (const auto& k : split_on(f[3], ';'))
                if (!k.empty()) e.lesion_kinds.push_back(dbtkit::lesion_kind_from_string(k));
        e.validate();
        entries.push_back(std::move(e));
    }
    return entries;
}

struct PhantomCliOptions {
    int volumes = 4;
    dbtkit::PhantomParams params;
    fs::path out_dir;
};

void run_phantom(const PhantomCliOptions& opt, const dbtkit::Config& cfg, std::uint64_t seed,
                 int jobs) {
    fs::create_directories(opt.out_dir);
    dbtkit::PhantomParams params = opt.params;
    params.seed = seed;

    std::vector<dbtkit::PhantomVolume> generated(static_cast<std::size_t>(opt.volumes));
    parallel_for(static_cast<std::size_t>(opt.volumes), jobs, [&](std::size_t i) {
        generated[i] = dbtkit::generate_phantom(params, static_cast<int>(i));
        dbtkit::save_volume(opt.out_dir / ("vol_" + std::to_string(i)), generated[i].volume);
    });

    std::vector<dbtkit::GroundTruthLesion> gts;
    std::vector<dbtkit::VolumeMeta> metas;
    for (const auto& g : generated) {
        metas.push_back(g.volume.meta);
        gts.insert(gts.end(), g.lesions.begin(), g.lesions.end());
    }
    dbtkit::save_annotations(opt.out_dir / "gt.csv", gts, provenance(cfg, seed));
    dbtkit::save_volume_metas(opt.out_dir / "volumes.json", metas);
    std::cout << "wrote " << opt.volumes << " volumes, " << gts.size() << " lesions to "
              << opt.out_dir.string() << "\n";
}

int dispatch(int argc, char** argv) {
    CLI::App app{"DBT lesion-detection pipeline toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t seed_flag = -1;
    int jobs = 0;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--seed", seed_flag, "random seed (DBTKIT_SEED env as fallback)");
    app.add_option("--jobs", jobs, "worker count, default = logical cores");

    // phantom
    auto* cmd_phantom = app.add_subcommand("phantom", "generate synthetic volumes + GT");
    PhantomCliOptions ph;
    cmd_phantom->add_option("--out-dir", ph.out_dir, "output directory")->required();
    cmd_phantom->add_option("--volumes", ph.volumes, "number of volumes");
    cmd_phantom->add_option("--slices", ph.params.slices);
    cmd_phantom->add_option("--rows", ph.params.rows);
    cmd_phantom->add_option("--cols", ph.params.cols);
    cmd_phantom->add_option("--lesions", ph.params.lesion_count, "lesions per volume");
    cmd_phantom->add_option("--lesion-min", ph.params.lesion_min_size);
    cmd_phantom->add_option("--lesion-max", ph.params.lesion_max_size);
    cmd_phantom->add_option("--contrast", ph.params.lesion_contrast);

    // preprocess
    auto* cmd_pre = app.add_subcommand("preprocess", "window-level, downscale, breast mask");
    std::string pre_in, pre_out, pre_mask;
    int erosion_radius = -1;
    bool no_downscale = false;
    cmd_pre->add_option("--input", pre_in, "input volume stem")->required();
    cmd_pre->add_option("--output", pre_out, "output volume stem")->required();
    cmd_pre->add_option("--mask", pre_mask, "output mask stem")->required();
    cmd_pre->add_option("--erosion-radius", erosion_radius, "disc radius, default from config");
    cmd_pre->add_flag("--no-downscale", no_downscale, "skip the 2x downscale");

    // postprocess
    auto* cmd_post = app.add_subcommand("postprocess", "grid outputs -> prediction CSV");
    std::vector<std::string> grid_files;
    std::string post_mask, post_out;
    double score_threshold = 0.0;
    double max_ratio_flag = -1.0, min_iou_flag = -1.0;
    cmd_post->add_option("--grids", grid_files, "grid-output JSON file(s)")->required();
    cmd_post->add_option("--mask", post_mask, "breast mask volume stem")->required();
    cmd_post->add_option("--out", post_out, "prediction CSV path")->required();
    cmd_post->add_option("--score-threshold", score_threshold);
    cmd_post->add_option("--max-ratio", max_ratio_flag);
    cmd_post->add_option("--min-iou", min_iou_flag);

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "FROC evaluation");
    std::string eval_pred, eval_gt, eval_volumes, eval_unit = "volume";
    std::string fp_list = "1,2,3,4";
    cmd_eval->add_option("--pred", eval_pred, "prediction CSV")->required();
    cmd_eval->add_option("--gt", eval_gt, "ground truth CSV")->required();
    cmd_eval->add_option("--volumes", eval_volumes, "volume metadata JSON")->required();
    cmd_eval->add_option("--unit", eval_unit, "volume|breast|slice")
        ->check(CLI::IsMember({"volume", "breast", "slice"}));
    cmd_eval->add_option("--fp", fp_list, "comma-separated FP budgets");

    // loss-table
    auto* cmd_loss = app.add_subcommand("loss-table", "objectness loss curves as CSV");
    double lt_gamma = 2.0, lt_threshold = 0.5, lt_wpos = 1.0, lt_wneg = 1.0, lt_step = 0.01;
    cmd_loss->add_option("--gamma", lt_gamma);
    cmd_loss->add_option("--knee", lt_threshold, "reduced-focal knee");
    cmd_loss->add_option("--w-pos", lt_wpos);
    cmd_loss->add_option("--w-neg", lt_wneg);
    cmd_loss->add_option("--step", lt_step, "p_t step");

    // split
    auto* cmd_split = app.add_subcommand("split", "patient-level cohort split");
    std::string split_cohort_path;
    double split_val = 0.1, split_test = 0.1;
    std::string split_counts;
    cmd_split->add_option("--cohort", split_cohort_path, "cohort CSV")->required();
    cmd_split->add_option("--val-frac", split_val);
    cmd_split->add_option("--test-frac", split_test);
    cmd_split->add_option("--counts", split_counts,
                          "per-group counts 'group:val:test[,group:val:test...]'");

    // run-all
    auto* cmd_all = app.add_subcommand("run-all", "phantom -> preprocess -> detect -> eval");
    fs::path all_out_dir = "run";
    int all_volumes = 4;
    int all_lesions = 2;
    double all_tp_rate = 0.8, all_fp_per_volume = 1.0;
    cmd_all->add_option("--out-dir", all_out_dir);
    cmd_all->add_option("--volumes", all_volumes);
    cmd_all->add_option("--lesions", all_lesions);
    cmd_all->add_option("--tp-rate", all_tp_rate);
    cmd_all->add_option("--fp-per-volume", all_fp_per_volume);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // uniform usage-error code
    }

    dbtkit::Config cfg;
    if (!config_path.empty()) cfg = dbtkit::load_config(config_path);
    const std::uint64_t seed = seed_or_env(seed_flag);
    const std::string prov = provenance(cfg, seed);

    if (*cmd_phantom) {
        run_phantom(ph, cfg, seed, jobs);
        return 0;
    }

    if (*cmd_pre) {
        dbtkit::Volume v = dbtkit::load_volume(pre_in);
        v = dbtkit::window_level(v);
        if (!no_downscale) v = dbtkit::downscale_volume_2x(v);
        const int radius = erosion_radius >= 0 ? erosion_radius : cfg.erosion_radius;
        dbtkit::BreastMask mask = dbtkit::breast_mask(v, radius);
        dbtkit::save_volume(pre_out, v);
        dbtkit::save_volume(pre_mask, mask_to_volume(mask, v.meta));
        std::cout << "preprocessed " << pre_in << " -> " << pre_out << " (+mask)\n";
        return 0;
    }

    if (*cmd_post) {
        dbtkit::MergeRule rule{cfg.max_score_ratio, cfg.min_iou};
        if (max_ratio_flag >= 0.0) rule.max_score_ratio = max_ratio_flag;
        if (min_iou_flag >= 0.0) rule.min_iou = min_iou_flag;

        dbtkit::Volume mask_vol = dbtkit::load_volume(post_mask);
        dbtkit::BreastMask mask = mask_from_volume(mask_vol);

        std::vector<dbtkit::Prediction> all;
        for (const auto& path : grid_files) {
            GridFile g = load_grid_file(path);
            auto preds = dbtkit::combine_volume_predictions(g.slices, g.spec, score_threshold,
                                                            g.key);
            preds = dbtkit::filter_by_breast_mask(preds, mask);
            preds = dbtkit::ratio_nms(preds, rule);
            for (auto& p : preds)
                all.push_back(dbtkit::rescale_to_original(p, g.scale_factor));
        }
        dbtkit::save_predictions(post_out, all, prov);
        std::cout << "wrote " << all.size() << " predictions to " << post_out << "\n";
        return 0;
    }

    if (*cmd_eval) {
        auto preds = dbtkit::load_predictions(fs::path(eval_pred));
        auto gts = dbtkit::load_annotations(fs::path(eval_gt));
        auto volumes = dbtkit::load_volume_metas(eval_volumes);
        dbtkit::MatchCriteria crit;
        crit.min_distance_px = cfg.min_distance_px;
        crit.z_fraction = cfg.z_fraction;
        dbtkit::FrocUnit unit = eval_unit == "breast"  ? dbtkit::FrocUnit::per_breast
                                : eval_unit == "slice" ? dbtkit::FrocUnit::per_slice
                                                       : dbtkit::FrocUnit::per_volume;
        auto curve = dbtkit::froc_curve(preds, gts, volumes, crit, unit);
        std::vector<double> budgets;
        std::stringstream ss(fp_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) budgets.push_back(std::stod(tok));
        write_froc_csv(std::cout, curve, budgets, prov);
        return 0;
    }

    if (*cmd_loss) {
        std::cout << "# " << prov << "\n";
        std::cout << "p_t,bce,weighted_bce,focal,reduced_focal\n";
        std::cout.precision(10);
        for (double pt = lt_step; pt < 1.0; pt += lt_step) {
            // Evaluated on the positive branch (y = 1), where p == p_t.
            std::cout << pt << ',' << dbtkit::bce(pt, 1) << ','
                      << dbtkit::weighted_bce(pt, 1, lt_wpos, lt_wneg) << ','
                      << dbtkit::focal(pt, 1, lt_gamma) << ','
                      << dbtkit::reduced_focal(pt, 1, lt_gamma, lt_threshold) << "\n";
        }
        return 0;
    }

    if (*cmd_split) {
        auto entries = load_cohort(split_cohort_path);
        dbtkit::SplitPlan plan;
        if (!split_counts.empty()) {
            std::map<dbtkit::CohortGroup, dbtkit::SplitCounts> counts;
            std::stringstream ss(split_counts);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                std::stringstream ts(tok);
                std::string group, val, test;
                if (!std::getline(ts, group, ':') || !std::getline(ts, val, ':') ||
                    !std::getline(ts, test, ':'))
                    throw std::runtime_error("bad --counts entry: " + tok);
                counts[dbtkit::cohort_group_from_string(group)] =
                    dbtkit::SplitCounts{std::stoi(val), std::stoi(test)};
            }
            plan = dbtkit::SplitPlan::per_group(std::move(counts));
        } else {
            plan = dbtkit::SplitPlan::proportions(1.0 - split_val - split_test, split_val,
                                                  split_test);
        }
        auto result = dbtkit::split_cohort(entries, plan, seed);
        std::cout << "# " << prov << "\n";
        std::cout << "patient_id,subset\n";
        for (const auto& p : result.train) std::cout << p << ",train\n";
        for (const auto& p : result.val) std::cout << p << ",val\n";
        for (const auto& p : result.test) std::cout << p << ",test\n";
        return 0;
    }

    if (*cmd_all) {
        fs::create_directories(all_out_dir);
        dbtkit::PhantomParams params;
        params.lesion_count = all_lesions;
        params.seed = seed;

        std::vector<dbtkit::PhantomVolume> generated(static_cast<std::size_t>(all_volumes));
        std::vector<dbtkit::BreastMask> masks(static_cast<std::size_t>(all_volumes));
        parallel_for(static_cast<std::size_t>(all_volumes), jobs, [&](std::size_t i) {
            generated[i] = dbtkit::generate_phantom(params, static_cast<int>(i));
            dbtkit::Volume pre =
                dbtkit::downscale_volume_2x(dbtkit::window_level(generated[i].volume));
            masks[i] = dbtkit::breast_mask(pre, cfg.erosion_radius);
        });

        std::vector<dbtkit::GroundTruthLesion> gts;
        std::vector<dbtkit::VolumeMeta> metas;
        for (const auto& g : generated) {
            metas.push_back(g.volume.meta);
            gts.insert(gts.end(), g.lesions.begin(), g.lesions.end());
        }

        dbtkit::DetectorProfile profile;
        profile.tp_rate = all_tp_rate;
        profile.fp_per_volume = all_fp_per_volume;
        dbtkit::MatchCriteria crit;
        crit.min_distance_px = cfg.min_distance_px;
        crit.z_fraction = cfg.z_fraction;
        auto preds = dbtkit::simulate_detector(gts, metas, profile, seed, crit);

        // Mask filtering happens on the downscaled grid, merging on original.
        std::vector<dbtkit::Prediction> kept;
        for (std::size_t i = 0; i < metas.size(); ++i) {
            std::vector<dbtkit::Prediction> vol_preds;
            for (const auto& p : preds)
                if (p.volume_key == metas[i].key()) {
                    dbtkit::Prediction q = p;
                    q.box.x /= 2.0;
                    q.box.y /= 2.0;
                    q.box.width /= 2.0;
                    q.box.height /= 2.0;
                    vol_preds.push_back(q);
                }
            vol_preds = dbtkit::filter_by_breast_mask(vol_preds, masks[i]);
            for (auto& p : vol_preds) kept.push_back(dbtkit::rescale_to_original(p, 2));
        }
        kept = dbtkit::ratio_nms(kept, dbtkit::MergeRule{cfg.max_score_ratio, cfg.min_iou});

        dbtkit::save_annotations(all_out_dir / "gt.csv", gts, prov);
        dbtkit::save_predictions(all_out_dir / "pred.csv", kept, prov);
        dbtkit::save_volume_metas(all_out_dir / "volumes.json", metas);

        auto curve = dbtkit::froc_curve(kept, gts, metas, crit);
        std::ofstream froc_out(all_out_dir / "froc.csv");
        write_froc_csv(froc_out, curve, {1.0, 2.0}, prov);
        std::cout << "# " << prov << "\n";
        std::cout << "volumes=" << all_volumes << " lesions=" << gts.size()
                  << " predictions=" << kept.size() << "\n";
        std::cout << "sensitivity@2FP/volume = " << dbtkit::sensitivity_at(curve, 2.0) << "\n";
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
