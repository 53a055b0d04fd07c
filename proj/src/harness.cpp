#include "keyhole/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace keyhole {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- json access with field-path error messages ---------------------------

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

const json* find(const json& j, const char* key) {
    if (!j.is_object())
        return nullptr;
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

const json& need(const json& j, const char* key, const std::string& path) {
    if (!j.is_object())
        fail(path, "expected an object");
    const json* v = find(j, key);
    if (!v)
        fail(path + "." + key, "missing required field");
    return *v;
}

double as_num(const json& j, const std::string& path) {
    if (!j.is_number())
        fail(path, "expected a number");
    return j.get<double>();
}

double need_num(const json& j, const char* key, const std::string& path) {
    return as_num(need(j, key, path), path + "." + key);
}

double opt_num(const json& j, const char* key, const std::string& path, double def) {
    const json* v = find(j, key);
    return v ? as_num(*v, path + "." + key) : def;
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer())
        fail(path, "expected an integer");
    return j.get<int>();
}

int need_int(const json& j, const char* key, const std::string& path) {
    return as_int(need(j, key, path), path + "." + key);
}

int opt_int(const json& j, const char* key, const std::string& path, int def) {
    const json* v = find(j, key);
    return v ? as_int(*v, path + "." + key) : def;
}

std::uint64_t opt_u64(const json& j, const char* key, const std::string& path, std::uint64_t def) {
    const json* v = find(j, key);
    if (!v)
        return def;
    if (!v->is_number_integer())
        fail(path + "." + key, "expected an integer");
    return v->get<std::uint64_t>();
}

bool opt_bool(const json& j, const char* key, const std::string& path, bool def) {
    const json* v = find(j, key);
    if (!v)
        return def;
    if (!v->is_boolean())
        fail(path + "." + key, "expected a boolean");
    return v->get<bool>();
}

std::string as_str(const json& j, const std::string& path) {
    if (!j.is_string())
        fail(path, "expected a string");
    return j.get<std::string>();
}

std::string need_str(const json& j, const char* key, const std::string& path) {
    return as_str(need(j, key, path), path + "." + key);
}

std::string opt_str(const json& j, const char* key, const std::string& path,
                    const std::string& def) {
    const json* v = find(j, key);
    return v ? as_str(*v, path + "." + key) : def;
}

Vec3 as_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3)
        fail(path, "expected an array of 3 numbers");
    return {as_num(j[0], path + "[0]"), as_num(j[1], path + "[1]"), as_num(j[2], path + "[2]")};
}

Vec3 opt_vec3(const json& j, const char* key, const std::string& path, Vec3 def) {
    const json* v = find(j, key);
    return v ? as_vec3(*v, path + "." + key) : def;
}

// --- section parsers -------------------------------------------------------

PlaneKind parse_plane(const std::string& s, const std::string& path) {
    if (s == "constant_x")
        return PlaneKind::constant_x;
    if (s == "constant_y")
        return PlaneKind::constant_y;
    if (s == "constant_z")
        return PlaneKind::constant_z;
    fail(path, "expected one of constant_x, constant_y, constant_z");
}

PlaneKind opt_plane(const json& j, const char* key, const std::string& path, PlaneKind def) {
    const json* v = find(j, key);
    return v ? parse_plane(as_str(*v, path + "." + key), path + "." + key) : def;
}

FalloffModel parse_falloff(const json& j, const std::string& path) {
    const Vec3 normal = opt_vec3(j, "wall_normal", path, {0.0, 0.0, 1.0});
    if (const json* p = find(j, "preset")) {
        const std::string name = as_str(*p, path + ".preset");
        if (name == "diffuse")
            return FalloffModel::preset(FalloffKind::diffuse, normal);
        if (name == "retro")
            return FalloffModel::preset(FalloffKind::retro, normal);
        if (name == "experimental")
            return FalloffModel::preset(FalloffKind::experimental, normal);
        if (name == "supplement")
            return FalloffModel::preset(FalloffKind::supplement, normal);
        fail(path + ".preset", "expected diffuse, retro, experimental or supplement");
    }
    return FalloffModel::custom(need_num(j, "radial_exponent", path),
                                need_num(j, "angular_exponent", path), normal);
}

TrajectorySet parse_trajectory(const json& j, const std::string& path) {
    const PlaneKind plane = opt_plane(j, "plane", path, PlaneKind::constant_z);
    if (const json* p = find(j, "preset")) {
        const int length = as_int(*p, path + ".preset");
        const double scale = opt_num(j, "scale", path, 0.5);
        const Vec3 center = opt_vec3(j, "center", path, {0.0, 0.0, 1.25});
        try {
            TrajectorySet t = trajectory_preset(length, plane, scale, center);
            t.label = opt_str(j, "label", path, t.label);
            return t;
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    }
    TrajectorySpec spec;
    spec.plane = plane;
    const json& wps = need(j, "waypoints", path);
    if (!wps.is_array() || wps.size() < 2)
        fail(path + ".waypoints", "expected an array of at least 2 points");
    for (std::size_t i = 0; i < wps.size(); ++i)
        spec.waypoints.push_back(as_vec3(wps[i], path + ".waypoints[" + std::to_string(i) + "]"));
    spec.samples_per_segment = opt_int(j, "samples_per_segment", path, 1);
    spec.rotation = opt_num(j, "rotation", path, 0.0);
    spec.label = opt_str(j, "label", path, "");
    try {
        return make_trajectory(spec);
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
}

NoiseModel parse_noise(const json& j, const std::string& path) {
    const std::string kind = opt_str(j, "kind", path, "none");
    NoiseModel noise;
    noise.seed = opt_u64(j, "seed", path, 0);
    if (kind == "none")
        return noise;
    noise.target_snr = need_num(j, "target_snr", path);
    if (kind == "poisson_snr")
        noise.kind = NoiseKind::poisson_snr;
    else if (kind == "gaussian")
        noise.kind = NoiseKind::gaussian;
    else
        fail(path + ".kind", "expected none, poisson_snr or gaussian");
    try {
        noise.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return noise;
}

EMConfig parse_em(const json& j, const std::string& path) {
    EMConfig em;
    em.iterations = opt_int(j, "iterations", path, em.iterations);
    em.sigma = opt_num(j, "sigma", path, em.sigma);
    em.lambda = opt_num(j, "lambda", path, em.lambda);
    em.learning_rate = opt_num(j, "learning_rate", path, em.learning_rate);
    em.momentum_decay1 = opt_num(j, "momentum_decay1", path, em.momentum_decay1);
    em.momentum_decay2 = opt_num(j, "momentum_decay2", path, em.momentum_decay2);
    em.anneal_factor = opt_num(j, "anneal_factor", path, em.anneal_factor);
    em.seed = opt_u64(j, "seed", path, em.seed);
    em.validate();
    return em;
}

GridGeometry parse_recon_grid(const json& j, const std::string& path) {
    GridGeometry geom;
    geom.rows = need_int(j, "rows", path);
    geom.cols = need_int(j, "cols", path);
    geom.pixel_pitch = need_num(j, "pixel_pitch", path);
    geom.plane_offset = opt_vec3(j, "plane_offset", path, {});
    if (geom.rows <= 0 || geom.cols <= 0 || !(geom.pixel_pitch > 0.0))
        fail(path, "reconstruction grid needs positive shape and pitch");
    return geom;
}

CandidateGrid parse_candidates(const json& j, const std::string& path) {
    return make_candidate_grid(opt_plane(j, "plane", path, PlaneKind::constant_z),
                               need_int(j, "rows", path), need_int(j, "cols", path),
                               need_num(j, "extent_u", path), need_num(j, "extent_v", path),
                               opt_vec3(j, "center", path, {0.0, 0.0, 1.25}));
}

DisambiguationSearch parse_search(const json& j, const std::string& path) {
    DisambiguationSearch s;
    s.rotation_step = opt_num(j, "rotation_step", path, s.rotation_step);
    s.include_rotations = opt_bool(j, "include_rotations", path, s.include_rotations);
    s.translation_step = opt_int(j, "translation_step", path, s.translation_step);
    s.translation_radius = opt_int(j, "translation_radius", path, s.translation_radius);
    s.include_horizontal_flip = opt_bool(j, "include_horizontal_flip", path, true);
    s.include_vertical_flip = opt_bool(j, "include_vertical_flip", path, true);
    return s;
}

SSIMParams parse_ssim(const json& j, const std::string& path) {
    SSIMParams p;
    const std::string window = opt_str(j, "window", path, "uniform8");
    if (window == "uniform8")
        p.window = SSIMWindow::uniform8;
    else if (window == "gaussian11")
        p.window = SSIMWindow::gaussian11;
    else
        fail(path + ".window", "expected uniform8 or gaussian11");
    p.k1 = opt_num(j, "k1", path, p.k1);
    p.k2 = opt_num(j, "k2", path, p.k2);
    p.dynamic_range = opt_num(j, "dynamic_range", path, p.dynamic_range);
    return p;
}

json read_config_file(const std::string& config_path, std::string* raw_text = nullptr) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in)
        throw ConfigError("config: cannot open " + config_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (raw_text)
        *raw_text = buf.str();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + config_path + ": " + e.what());
    }
}

std::string resolve_path(const std::string& config_path, const std::string& rel) {
    const fs::path p(rel);
    if (p.is_absolute())
        return rel;
    return (fs::path(config_path).parent_path() / p).string();
}

SimulateConfig parse_simulate(const json& root, const std::string& config_path) {
    const json& j = need(root, "simulate", "config");
    const std::string path = "simulate";
    SimulateConfig cfg;
    cfg.object_path = resolve_path(config_path, need_str(j, "object", path));
    cfg.physical_size = opt_num(j, "physical_size", path, 0.5);
    cfg.binarize = opt_bool(j, "binarize", path, true);
    cfg.trajectory = parse_trajectory(need(j, "trajectory", path), path + ".trajectory");
    if (const json* f = find(j, "falloff"))
        cfg.falloff = parse_falloff(*f, path + ".falloff");
    cfg.assembly.bins = opt_int(j, "bins", path, 1024);
    if (cfg.assembly.bins < 1)
        fail(path + ".bins", "expected a positive bin count");
    cfg.assembly.bin_width = opt_num(j, "bin_width", path, 16e-12);
    if (!(cfg.assembly.bin_width > 0.0))
        fail(path + ".bin_width", "expected a positive bin width");
    cfg.assembly.t0 = opt_num(j, "t0", path, 0.0);
    cfg.assembly.scan_origin = opt_vec3(j, "scan_origin", path, {});
    if (const json* n = find(j, "noise"))
        cfg.noise = parse_noise(*n, path + ".noise");
    return cfg;
}

ReconstructConfig parse_reconstruct(const json& root, const SimulateConfig* sim_fallback) {
    const json& j = need(root, "reconstruct", "config");
    const std::string path = "reconstruct";
    ReconstructConfig cfg;
    if (const json* e = find(j, "em"))
        cfg.em = parse_em(*e, path + ".em");
    cfg.gd_iterations = opt_int(j, "gd_iterations", path, 200);
    const std::string norm = opt_str(j, "normalize", path, "peak");
    if (norm == "peak")
        cfg.normalize_peak = true;
    else if (norm == "none")
        cfg.normalize_peak = false;
    else
        fail(path + ".normalize", "expected peak or none");
    cfg.recon_geom = parse_recon_grid(need(j, "recon_grid", path), path + ".recon_grid");
    cfg.em.recon_rows = cfg.recon_geom.rows;
    cfg.em.recon_cols = cfg.recon_geom.cols;
    if (const json* c = find(j, "candidates"))
        cfg.candidates = parse_candidates(*c, path + ".candidates");
    if (const json* p = find(j, "prior")) {
        cfg.prior.smoothness_weight = opt_num(*p, "smoothness_weight", path + ".prior", 1.0);
        cfg.prior.sparsity_weight = opt_num(*p, "sparsity_weight", path + ".prior", 1.0);
    }
    if (const json* f = find(j, "falloff"))
        cfg.falloff = parse_falloff(*f, path + ".falloff");
    else if (sim_fallback)
        cfg.falloff = sim_fallback->falloff;
    return cfg;
}

EvaluateConfig parse_evaluate(const json& root) {
    EvaluateConfig cfg;
    const json* j = find(root, "evaluate");
    if (!j)
        return cfg;
    const std::string path = "evaluate";
    if (const json* s = find(*j, "search"))
        cfg.search = parse_search(*s, path + ".search");
    if (const json* s = find(*j, "ssim"))
        cfg.ssim_params = parse_ssim(*s, path + ".ssim");
    cfg.trajectory_label = opt_str(*j, "trajectory_label", path, "");
    cfg.snr = opt_num(*j, "snr", path, 0.0);
    return cfg;
}

// --- formatting ------------------------------------------------------------

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fmt_f(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string fmt_full(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    return s;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

const char* plane_name(PlaneKind plane) {
    switch (plane) {
    case PlaneKind::constant_x: return "constant_x";
    case PlaneKind::constant_y: return "constant_y";
    case PlaneKind::constant_z: return "constant_z";
    }
    return "constant_z";
}

constexpr const char* kRecordHeader =
    "object,trajectory,snr,method,seed,ssim,best_rtf,trajectory_rmse,wall_time_s,iterations,status";

std::string format_record(const ResultRecord& r) {
    std::string line = sanitize(r.object) + "," + sanitize(r.trajectory) + "," + fmt_g(r.snr) +
                       "," + sanitize(r.method) + "," + std::to_string(r.seed) + ",";
    if (r.status == "ok") {
        line += fmt_f(r.ssim, 6);
        line += ",";
        line += sanitize(r.best_rtf);
        line += ",";
        line += r.trajectory_rmse >= 0.0 ? fmt_f(r.trajectory_rmse, 6) : std::string();
    } else {
        line += ",,";
    }
    line += "," + fmt_f(r.wall_time_s, 3) + "," + std::to_string(r.iterations) + "," +
            sanitize(r.status);
    return line;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

json trajectory_to_json(const TrajectorySet& t) {
    json poses = json::array();
    for (const auto& p : t.poses)
        poses.push_back({p.translation.x, p.translation.y, p.translation.z, p.rotation});
    return {{"plane", plane_name(t.plane)}, {"label", t.label}, {"poses", std::move(poses)}};
}

TrajectorySet trajectory_from_json(const json& j, const std::string& path) {
    TrajectorySet t;
    t.plane = parse_plane(need_str(j, "plane", path), path + ".plane");
    t.label = opt_str(j, "label", path, "");
    const json& poses = need(j, "poses", path);
    if (!poses.is_array() || poses.empty())
        fail(path + ".poses", "expected a nonempty array");
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const json& p = poses[i];
        const std::string ppath = path + ".poses[" + std::to_string(i) + "]";
        if (!p.is_array() || p.size() != 4)
            fail(ppath, "expected [x, y, z, rotation]");
        t.poses.push_back(RigidTransform{{as_num(p[0], ppath), as_num(p[1], ppath),
                                          as_num(p[2], ppath)},
                                         as_num(p[3], ppath)});
    }
    t.validate();
    return t;
}

} // namespace

void ExperimentSpec::validate() const {
    if (objects.empty())
        throw ConfigError("config: sweep.objects: must be nonempty");
    if (trajectories.empty())
        throw ConfigError("config: sweep.trajectories: must be nonempty");
    if (snrs.empty())
        throw ConfigError("config: sweep.snrs: must be nonempty");
    if (methods.empty())
        throw ConfigError("config: sweep.methods: must be nonempty");
    for (const auto& m : methods)
        if (m != "gd" && m != "em")
            throw ConfigError("config: sweep.methods: expected gd or em, got " + m);
    for (double s : snrs)
        if (s < 0.0 || !std::isfinite(s))
            throw ConfigError("config: sweep.snrs: must be nonnegative (0 disables noise)");
    std::map<std::string, int> seen;
    for (const auto& t : trajectories)
        if (++seen[t.label] > 1)
            throw ConfigError("config: sweep.trajectories: duplicate label " + t.label);
    if (output_dir.empty())
        throw ConfigError("config: sweep.output_dir: missing (or pass --out)");
    if (std::find(methods.begin(), methods.end(), "em") != methods.end() &&
        recon.candidates.size() == 0)
        throw ConfigError("config: reconstruct.candidates: required for the em method");
}

SimulateConfig load_simulate_config(const std::string& config_path) {
    return parse_simulate(read_config_file(config_path), config_path);
}

ReconstructConfig load_reconstruct_config(const std::string& config_path) {
    const json root = read_config_file(config_path);
    return parse_reconstruct(root, nullptr);
}

EvaluateConfig load_evaluate_config(const std::string& config_path) {
    return parse_evaluate(read_config_file(config_path));
}

ExperimentSpec load_sweep_spec(const std::string& config_path) {
    std::string raw;
    const json root = read_config_file(config_path, &raw);
    const json& j = need(root, "sweep", "config");
    const std::string path = "sweep";

    ExperimentSpec spec;
    const json& objects = need(j, "objects", path);
    if (!objects.is_array() || objects.empty())
        fail(path + ".objects", "expected a nonempty array of image paths");
    for (std::size_t i = 0; i < objects.size(); ++i)
        spec.objects.push_back(resolve_path(
            config_path, as_str(objects[i], path + ".objects[" + std::to_string(i) + "]")));

    const json& trajs = need(j, "trajectories", path);
    if (!trajs.is_array() || trajs.empty())
        fail(path + ".trajectories", "expected a nonempty array");
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        TrajectorySet t =
            parse_trajectory(trajs[i], path + ".trajectories[" + std::to_string(i) + "]");
        if (t.label.empty())
            t.label = "trajectory" + std::to_string(i);
        spec.trajectories.push_back(std::move(t));
    }

    const json& snrs = need(j, "snrs", path);
    if (!snrs.is_array() || snrs.empty())
        fail(path + ".snrs", "expected a nonempty array");
    for (std::size_t i = 0; i < snrs.size(); ++i)
        spec.snrs.push_back(as_num(snrs[i], path + ".snrs[" + std::to_string(i) + "]"));

    const json& methods = need(j, "methods", path);
    if (!methods.is_array() || methods.empty())
        fail(path + ".methods", "expected a nonempty array");
    for (std::size_t i = 0; i < methods.size(); ++i) {
        const std::string m = as_str(methods[i], path + ".methods[" + std::to_string(i) + "]");
        if (std::find(spec.methods.begin(), spec.methods.end(), m) == spec.methods.end())
            spec.methods.push_back(m);
    }

    spec.seed = opt_u64(j, "seed", path, 0);
    spec.output_dir = opt_str(j, "output_dir", path, "");
    if (!spec.output_dir.empty())
        spec.output_dir = resolve_path(config_path, spec.output_dir);

    // Shared sections: simulate supplies physics defaults (its object,
    // trajectory and noise fields are replaced per cell); reconstruct and
    // evaluate apply to every cell.
    if (find(root, "simulate")) {
        const json& s = *find(root, "simulate");
        spec.sim.physical_size = opt_num(s, "physical_size", "simulate", 0.5);
        spec.sim.binarize = opt_bool(s, "binarize", "simulate", true);
        if (const json* f = find(s, "falloff"))
            spec.sim.falloff = parse_falloff(*f, "simulate.falloff");
        spec.sim.assembly.bins = opt_int(s, "bins", "simulate", 1024);
        spec.sim.assembly.bin_width = opt_num(s, "bin_width", "simulate", 16e-12);
        spec.sim.assembly.t0 = opt_num(s, "t0", "simulate", 0.0);
        spec.sim.assembly.scan_origin = opt_vec3(s, "scan_origin", "simulate", {});
    }
    spec.recon = parse_reconstruct(root, &spec.sim);
    spec.eval = parse_evaluate(root);
    return spec;
}

void save_sequence(const std::string& dir, const SimulatedSequence& seq,
                   const TrajectorySet& trajectory, const SimulateConfig& config) {
    fs::create_directories(dir);
    const std::int64_t L = static_cast<std::int64_t>(seq.measured.size());
    if (L == 0)
        throw std::invalid_argument("sequence is empty");
    const std::int64_t T = seq.measured[0].bins();

    const auto pack = [&](const std::vector<TransientHistogram>& hs) {
        Tensor t;
        t.dims = {static_cast<std::uint32_t>(L), static_cast<std::uint32_t>(T)};
        t.values.reserve(L * T);
        for (const auto& h : hs)
            for (double v : h.counts)
                t.values.push_back(static_cast<float>(v));
        return t;
    };
    write_kht1(fs::path(dir) / "measured.kht1", pack(seq.measured));
    write_kht1(fs::path(dir) / "clean.kht1", pack(seq.clean));

    const auto preview = [&](const std::vector<TransientHistogram>& hs, const char* name) {
        Image img(static_cast<int>(L), static_cast<int>(T));
        for (std::int64_t i = 0; i < L; ++i)
            for (std::int64_t t = 0; t < T; ++t)
                img.at(static_cast<int>(i), static_cast<int>(t)) =
                    std::max(0.0, hs[i].counts[t]);
        write_pgm(fs::path(dir) / name, img);
    };
    preview(seq.measured, "measured.pgm");
    preview(seq.clean, "clean.pgm");

    json noise;
    switch (config.noise.kind) {
    case NoiseKind::none: noise["kind"] = "none"; break;
    case NoiseKind::poisson_snr: noise["kind"] = "poisson_snr"; break;
    case NoiseKind::gaussian: noise["kind"] = "gaussian"; break;
    }
    noise["target_snr"] = config.noise.target_snr;
    noise["seed"] = config.noise.seed;
    noise["sampler"] = kPoissonSamplerId;

    json sidecar{
        {"format_version", 1},
        {"object", config.object_path},
        {"physical_size", config.physical_size},
        {"binarize", config.binarize},
        {"bins", seq.measured[0].bins()},
        {"bin_width", seq.bin_width},
        {"t0", seq.t0},
        {"scan_origin",
         {config.assembly.scan_origin.x, config.assembly.scan_origin.y,
          config.assembly.scan_origin.z}},
        {"falloff",
         {{"radial_exponent", config.falloff.radial_exponent},
          {"angular_exponent", config.falloff.angular_exponent},
          {"wall_normal",
           {config.falloff.wall_normal.x, config.falloff.wall_normal.y,
            config.falloff.wall_normal.z}}}},
        {"noise", std::move(noise)},
        {"trajectory", trajectory_to_json(trajectory)},
        {"count_scales", seq.count_scales},
    };
    write_text_file(fs::path(dir) / "sidecar.json", sidecar.dump(2) + "\n");
}

LoadedSequence load_sequence(const std::string& dir) {
    const fs::path sidecar_path = fs::path(dir) / "sidecar.json";
    std::ifstream in(sidecar_path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + sidecar_path.string());
    json sidecar;
    try {
        in >> sidecar;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(sidecar_path.string() + ": " + e.what());
    }

    LoadedSequence seq;
    seq.trajectory = trajectory_from_json(need(sidecar, "trajectory", "sidecar"),
                                          "sidecar.trajectory");
    const double bin_width = need_num(sidecar, "bin_width", "sidecar");
    const double t0 = opt_num(sidecar, "t0", "sidecar", 0.0);

    const Tensor tensor = read_kht1(fs::path(dir) / "measured.kht1");
    if (tensor.dims.size() != 2)
        throw std::runtime_error("measured.kht1: expected a rank-2 tensor");
    const std::int64_t L = tensor.dims[0], T = tensor.dims[1];
    if (L != seq.trajectory.length())
        throw std::runtime_error("measured.kht1: row count does not match the sidecar poses");
    seq.measured.resize(L);
    for (std::int64_t i = 0; i < L; ++i) {
        seq.measured[i].counts.assign(tensor.values.begin() + i * T,
                                      tensor.values.begin() + (i + 1) * T);
        seq.measured[i].bin_width = bin_width;
        seq.measured[i].t0 = t0;
    }

    if (const json* scales = find(sidecar, "count_scales")) {
        if (!scales->is_array() || static_cast<std::int64_t>(scales->size()) != L)
            throw std::runtime_error("sidecar.count_scales: wrong length");
        for (const auto& s : *scales)
            seq.count_scales.push_back(as_num(s, "sidecar.count_scales[]"));
    } else {
        seq.count_scales.assign(L, 1.0);
    }
    seq.scan_origin = opt_vec3(sidecar, "scan_origin", "sidecar", {});
    return seq;
}

PreparedSystems prepare_systems(const std::vector<TransientHistogram>& measured,
                                const std::vector<RigidTransform>& poses,
                                const GridGeometry& geom, const FalloffModel& falloff,
                                const Vec3& scan_origin, bool normalize_peak) {
    if (measured.empty())
        throw std::invalid_argument("no measurements");
    PreparedSystems prep;
    prep.measured = measured;

    AssemblyParams params;
    params.bins = static_cast<int>(measured[0].bins());
    params.bin_width = measured[0].bin_width;
    params.t0 = measured[0].t0;
    params.scan_origin = scan_origin;
    prep.systems.reserve(poses.size());
    for (const auto& pose : poses)
        prep.systems.push_back(assemble_system(geom, pose, falloff, params));

    if (normalize_peak) {
        double peak = 0.0;
        for (const auto& h : prep.measured)
            for (double v : h.counts)
                peak = std::max(peak, v);
        if (peak > 0.0) {
            prep.scale = peak;
            const double inv = 1.0 / peak;
            for (auto& h : prep.measured)
                for (double& v : h.counts)
                    v *= inv;
            for (auto& s : prep.systems) {
                for (double& v : s.value_lo)
                    v *= inv;
                for (double& v : s.value_hi)
                    v *= inv;
            }
        }
    }
    return prep;
}

Image load_image_any(const std::string& path) {
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".pgm")
        return read_pgm(path);
    return image_from_tensor(read_kht1(path));
}

void save_trajectory_json(const std::string& path, const TrajectorySet& t) {
    write_text_file(path, trajectory_to_json(t).dump(2) + "\n");
}

TrajectorySet load_trajectory_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return trajectory_from_json(j, "trajectory");
}

void append_record(const std::string& csv_path, const ResultRecord& record) {
    const bool fresh = !fs::exists(csv_path);
    std::ofstream out(csv_path, std::ios::binary | std::ios::app);
    if (!out)
        throw std::runtime_error("cannot write " + csv_path);
    if (fresh)
        out << kRecordHeader << "\n";
    out << format_record(record) << "\n";
    out.flush();
    if (!out)
        throw std::runtime_error("failed writing " + csv_path);
}

namespace {

struct CellOutcome {
    std::string line; // verbatim journal row
    double ssim = 0.0;
    bool ok = false;
};

std::string cell_key(const std::string& object, const std::string& trajectory, double snr,
                     const std::string& method, std::uint64_t seed) {
    return sanitize(object) + "|" + sanitize(trajectory) + "|" + fmt_g(snr) + "|" + method + "|" +
           std::to_string(seed);
}

// Journal rows keyed for resume; the first row for a key wins.
std::map<std::string, CellOutcome> read_journal(const fs::path& path) {
    std::map<std::string, CellOutcome> done;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return done;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (first) {
            first = false;
            continue;
        }
        if (line.empty())
            continue;
        const auto fields = split_csv(line);
        if (fields.size() != 11)
            continue; // torn write from an interrupted run
        const std::string key =
            fields[0] + "|" + fields[1] + "|" + fields[2] + "|" + fields[3] + "|" + fields[4];
        if (done.count(key))
            continue;
        CellOutcome outcome;
        outcome.line = line;
        outcome.ok = fields[10] == "ok";
        outcome.ssim = outcome.ok ? std::strtod(fields[5].c_str(), nullptr) : 0.0;
        done.emplace(key, std::move(outcome));
    }
    return done;
}

} // namespace

void run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const fs::path out_dir(spec.output_dir);
    fs::create_directories(out_dir / "cells");

    json run_info{{"format_version", 1},
                  {"seed", spec.seed},
                  {"sampler", kPoissonSamplerId},
                  {"normalize", spec.recon.normalize_peak ? "peak" : "none"}};
    write_text_file(out_dir / "run.json", run_info.dump(2) + "\n");

    const fs::path journal_path = out_dir / "journal.csv";
    auto done = read_journal(journal_path);

    for (std::size_t ti = 0; ti < spec.trajectories.size(); ++ti) {
        const TrajectorySet& trajectory = spec.trajectories[ti];
        for (double snr : spec.snrs) {
            for (const std::string& object : spec.objects) {
                std::vector<std::string> pending;
                for (const auto& method : spec.methods)
                    if (!done.count(cell_key(object, trajectory.label, snr, method, spec.seed)))
                        pending.push_back(method);
                if (pending.empty())
                    continue;

                const std::string sim_tag =
                    sanitize(object) + "|" + sanitize(trajectory.label) + "|" + fmt_g(snr) + "|" +
                    std::to_string(spec.seed);
                const fs::path cell_dir = out_dir / "cells" / hex16(fnv1a(sim_tag));

                SimulateConfig sim = spec.sim;
                sim.object_path = object;
                sim.trajectory = trajectory;
                sim.noise = snr > 0.0 ? NoiseModel::poisson(snr, mix_seed(spec.seed, fnv1a(sim_tag)))
                                      : NoiseModel::off();

                AlbedoGrid truth_albedo;
                SimulatedSequence seq;
                std::string sim_error;
                try {
                    const Image object_img = load_image_any(object);
                    truth_albedo = rasterize_object(object_img, sim.physical_size, sim.binarize);
                    seq = simulate_sequence(truth_albedo, trajectory, sim.falloff, sim.assembly,
                                            sim.noise);
                    save_sequence(cell_dir.string(), seq, trajectory, sim);
                } catch (const std::exception& e) {
                    sim_error = e.what();
                }

                for (const auto& method : pending) {
                    ResultRecord rec;
                    rec.object = object;
                    rec.trajectory = trajectory.label;
                    rec.snr = snr;
                    rec.method = method;
                    rec.seed = spec.seed;
                    rec.trajectory_rmse = -1.0;
                    rec.iterations = method == "em" ? spec.recon.em.iterations
                                                    : spec.recon.gd_iterations;

                    const auto start = std::chrono::steady_clock::now();
                    try {
                        if (!sim_error.empty())
                            throw std::runtime_error(sim_error);
                        Image recon_img;
                        if (method == "gd") {
                            const PreparedSystems prep = prepare_systems(
                                seq.measured, trajectory.poses, spec.recon.recon_geom,
                                spec.recon.falloff, sim.assembly.scan_origin,
                                spec.recon.normalize_peak);
                            GDResult r = gd_reconstruct_systems(prep.measured, prep.systems,
                                                                spec.recon.recon_geom,
                                                                spec.recon.em,
                                                                spec.recon.gd_iterations,
                                                                spec.recon.prior);
                            recon_img = r.albedo.values;
                            write_kht1(cell_dir / "albedo_gd.kht1", tensor_from_image(recon_img));
                            write_pgm(cell_dir / "albedo_gd.pgm", recon_img);
                            std::string csv = "iteration,objective\n";
                            for (std::size_t it = 0; it < r.objective.size(); ++it)
                                csv += std::to_string(it) + "," + fmt_full(r.objective[it]) + "\n";
                            write_text_file(cell_dir / "diagnostics_gd.csv", csv);
                        } else {
                            const PreparedSystems prep = prepare_systems(
                                seq.measured, spec.recon.candidates.poses, spec.recon.recon_geom,
                                spec.recon.falloff, sim.assembly.scan_origin,
                                spec.recon.normalize_peak);
                            EMResult r = em_reconstruct_systems(prep.measured, prep.systems,
                                                                spec.recon.recon_geom,
                                                                spec.recon.em, spec.recon.prior);
                            recon_img = r.albedo.values;
                            write_kht1(cell_dir / "albedo_em.kht1", tensor_from_image(recon_img));
                            write_pgm(cell_dir / "albedo_em.pgm", recon_img);
                            Tensor w;
                            w.dims = {static_cast<std::uint32_t>(r.weights.measurements),
                                      static_cast<std::uint32_t>(r.weights.candidates)};
                            w.values.assign(r.weights.w.begin(), r.weights.w.end());
                            write_kht1(cell_dir / "weights_em.kht1", w);
                            std::string csv = "iteration,beta,q,data_term,prior_term\n";
                            for (const auto& s : r.trace)
                                csv += std::to_string(s.iteration) + "," + fmt_full(s.beta) + "," +
                                       fmt_full(s.q) + "," + fmt_full(s.data_term) + "," +
                                       fmt_full(s.prior_term) + "\n";
                            write_text_file(cell_dir / "diagnostics_em.csv", csv);
                            const TrajectorySet est =
                                estimate_trajectory(r.weights, spec.recon.candidates);
                            save_trajectory_json((cell_dir / "trajectory_em.json").string(), est);
                            rec.trajectory_rmse = trajectory_rmse(est, trajectory, true);
                        }

                        DisambiguationSearch search = spec.eval.search;
                        if (trajectory.plane != PlaneKind::constant_z)
                            search.include_rotations = false;
                        const DisambiguationResult d = disambiguated_ssim(
                            truth_albedo.values, recon_img, search, spec.eval.ssim_params);
                        rec.ssim = d.score;
                        rec.best_rtf = describe(d.transform);
                        rec.status = "ok";
                    } catch (const std::exception& e) {
                        rec.status = std::string("error: ") + e.what();
                    }
                    rec.wall_time_s =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                            .count();

                    append_record(journal_path.string(), rec);
                    CellOutcome outcome;
                    outcome.line = format_record(rec);
                    outcome.ok = rec.status == "ok";
                    outcome.ssim = rec.ssim;
                    done.emplace(cell_key(object, trajectory.label, snr, method, spec.seed),
                                 std::move(outcome));
                }
            }
        }
    }

    // Canonical records and the trajectory x (method, snr) summary pivot are
    // regenerated from the journal text, not from in-memory results, so
    // resumed and fresh runs end byte-identical.
    done = read_journal(journal_path);
    std::string records = std::string(kRecordHeader) + "\n";
    for (const auto& trajectory : spec.trajectories)
        for (double snr : spec.snrs)
            for (const auto& object : spec.objects)
                for (const auto& method : spec.methods) {
                    const auto it =
                        done.find(cell_key(object, trajectory.label, snr, method, spec.seed));
                    if (it != done.end())
                        records += it->second.line + "\n";
                }
    write_text_file(out_dir / "records.csv", records);

    std::string summary = "trajectory";
    for (double snr : spec.snrs)
        for (const auto& method : spec.methods)
            summary += "," + method + "@snr" + fmt_g(snr);
    summary += "\n";
    for (const auto& trajectory : spec.trajectories) {
        summary += sanitize(trajectory.label);
        for (double snr : spec.snrs) {
            for (const auto& method : spec.methods) {
                double sum = 0.0;
                int count = 0;
                for (const auto& object : spec.objects) {
                    const auto it =
                        done.find(cell_key(object, trajectory.label, snr, method, spec.seed));
                    if (it != done.end() && it->second.ok) {
                        sum += it->second.ssim;
                        ++count;
                    }
                }
                summary += ",";
                summary += count > 0 ? fmt_f(sum / count, 6) : "nan";
            }
        }
        summary += "\n";
    }
    write_text_file(out_dir / "summary.csv", summary);
}

} // namespace keyhole
