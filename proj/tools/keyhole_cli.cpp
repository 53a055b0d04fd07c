#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "keyhole/evaluation.hpp"
#include "keyhole/forward_model.hpp"
#include "keyhole/harness.hpp"
#include "keyhole/parallel.hpp"
#include "keyhole/reconstruction.hpp"
#include "keyhole/simulator.hpp"

namespace fs = std::filesystem;
using namespace keyhole;

namespace {

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw ConfigError(std::string(what) + " not found: " + path);
}

std::string full(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, bool seed_set,
                 std::uint64_t seed) {
    SimulateConfig cfg = load_simulate_config(config_path);
    if (seed_set)
        cfg.noise.seed = seed;
    require_file(cfg.object_path, "object image");

    const Image object = load_image_any(cfg.object_path);
    const AlbedoGrid albedo = rasterize_object(object, cfg.physical_size, cfg.binarize);
    const SimulatedSequence seq =
        simulate_sequence(albedo, cfg.trajectory, cfg.falloff, cfg.assembly, cfg.noise);
    save_sequence(out_dir, seq, cfg.trajectory, cfg);
    write_pgm(fs::path(out_dir) / "object.pgm", albedo.values);

    double peak = 0.0;
    for (const auto& h : seq.measured)
        for (double v : h.counts)
            peak = std::max(peak, v);
    std::cout << "simulated " << seq.measured.size() << " poses x " << seq.measured[0].bins()
              << " bins (label " << cfg.trajectory.label << ", peak count " << peak << ") -> "
              << out_dir << "\n";
    return 0;
}

int cmd_reconstruct(const std::string& input_dir, const std::string& config_path,
                    const std::string& method, const std::string& out_dir, bool seed_set,
                    std::uint64_t seed) {
    require_file((fs::path(input_dir) / "sidecar.json").string(), "measurement sidecar");
    require_file((fs::path(input_dir) / "measured.kht1").string(), "measurement tensor");
    ReconstructConfig cfg = load_reconstruct_config(config_path);
    if (seed_set)
        cfg.em.seed = seed;

    LoadedSequence seq = load_sequence(input_dir);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    if (method == "gd") {
        const PreparedSystems prep =
            prepare_systems(seq.measured, seq.trajectory.poses, cfg.recon_geom, cfg.falloff,
                            seq.scan_origin, cfg.normalize_peak);
        const GDResult r = gd_reconstruct_systems(prep.measured, prep.systems, cfg.recon_geom,
                                                  cfg.em, cfg.gd_iterations, cfg.prior);
        write_kht1(out / "albedo_gd.kht1", tensor_from_image(r.albedo.values));
        write_pgm(out / "albedo_gd.pgm", r.albedo.values);
        std::string csv = "iteration,objective\n";
        for (std::size_t i = 0; i < r.objective.size(); ++i)
            csv += std::to_string(i) + "," + full(r.objective[i]) + "\n";
        write_text(out / "diagnostics_gd.csv", csv);
        std::cout << "gd reconstruction: " << cfg.gd_iterations << " iterations, objective "
                  << (r.objective.empty() ? 0.0 : r.objective.back()) << " -> " << out_dir
                  << "\n";
        return 0;
    }

    if (cfg.candidates.size() == 0)
        throw ConfigError("config: reconstruct.candidates: required for the em method");
    const PreparedSystems prep = prepare_systems(seq.measured, cfg.candidates.poses,
                                                 cfg.recon_geom, cfg.falloff, seq.scan_origin,
                                                 cfg.normalize_peak);
    const EMResult r = em_reconstruct_systems(prep.measured, prep.systems, cfg.recon_geom, cfg.em,
                                              cfg.prior);
    write_kht1(out / "albedo_em.kht1", tensor_from_image(r.albedo.values));
    write_pgm(out / "albedo_em.pgm", r.albedo.values);
    Tensor w;
    w.dims = {static_cast<std::uint32_t>(r.weights.measurements),
              static_cast<std::uint32_t>(r.weights.candidates)};
    w.values.assign(r.weights.w.begin(), r.weights.w.end());
    write_kht1(out / "weights_em.kht1", w);
    std::string csv = "iteration,beta,q,data_term,prior_term\n";
    for (const auto& s : r.trace)
        csv += std::to_string(s.iteration) + "," + full(s.beta) + "," + full(s.q) + "," +
               full(s.data_term) + "," + full(s.prior_term) + "\n";
    write_text(out / "diagnostics_em.csv", csv);
    const TrajectorySet est = estimate_trajectory(r.weights, cfg.candidates);
    save_trajectory_json((out / "trajectory_em.json").string(), est);
    std::cout << "em reconstruction: " << cfg.em.iterations << " iterations, final q "
              << (r.trace.empty() ? 0.0 : r.trace.back().q) << " -> " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& truth_path, const std::string& recon_path,
                 const std::string& config_path, const std::string& out_csv,
                 const std::string& method) {
    require_file(truth_path, "truth image");
    require_file(recon_path, "reconstruction image");
    EvaluateConfig cfg;
    if (!config_path.empty())
        cfg = load_evaluate_config(config_path);

    const Image truth = load_image_any(truth_path);
    const Image recon = load_image_any(recon_path);

    const auto start = std::chrono::steady_clock::now();
    const DisambiguationResult d = disambiguated_ssim(truth, recon, cfg.search, cfg.ssim_params);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double plain = ssim(max_normalize(truth), max_normalize(recon), cfg.ssim_params);

    std::printf("ssim %.6f (plain %.6f) best transform: %s\n", d.score, plain,
                describe(d.transform).c_str());
    if (!out_csv.empty()) {
        ResultRecord rec;
        rec.object = truth_path;
        rec.trajectory = cfg.trajectory_label;
        rec.snr = cfg.snr;
        rec.method = method;
        rec.ssim = d.score;
        rec.best_rtf = describe(d.transform);
        rec.trajectory_rmse = -1.0;
        rec.wall_time_s = wall;
        rec.status = "ok";
        append_record(out_csv, rec);
    }
    return 0;
}

int cmd_estimate_trajectory(const std::string& weights_path, const std::string& config_path,
                            const std::string& out_path) {
    require_file(weights_path, "weights tensor");
    const ReconstructConfig cfg = load_reconstruct_config(config_path);
    if (cfg.candidates.size() == 0)
        throw ConfigError("config: reconstruct.candidates: required to decode a trajectory");

    const Tensor t = read_kht1(weights_path);
    if (t.dims.size() != 2)
        throw ConfigError("weights tensor must be rank 2 (measurements x candidates)");
    PosteriorWeights weights;
    weights.measurements = t.dims[0];
    weights.candidates = t.dims[1];
    if (weights.candidates != cfg.candidates.size())
        throw ConfigError("weights tensor has " + std::to_string(weights.candidates) +
                          " candidates but the config grid has " +
                          std::to_string(cfg.candidates.size()));
    weights.w.assign(t.values.begin(), t.values.end());

    const TrajectorySet est = estimate_trajectory(weights, cfg.candidates);
    save_trajectory_json(out_path, est);
    std::cout << "decoded " << est.length() << " poses -> " << out_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override, bool seed_set,
              std::uint64_t seed) {
    ExperimentSpec spec = load_sweep_spec(config_path);
    if (!out_override.empty())
        spec.output_dir = out_override;
    if (seed_set)
        spec.seed = seed;
    spec.validate();

    fs::create_directories(spec.output_dir);
    fs::copy_file(config_path, fs::path(spec.output_dir) / "config_snapshot.json",
                  fs::copy_options::overwrite_existing);
    run_experiment(spec);
    std::cout << "sweep complete -> " << (fs::path(spec.output_dir) / "summary.csv").string()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"keyhole transient imaging toolkit"};
    app.require_subcommand(1);

    std::string config, out, input, truth, recon, weights;
    std::string method = "em";
    std::uint64_t seed = 0;
    int threads = 0;

    CLI::App* sim = app.add_subcommand("simulate", "render a measurement sequence for an object");
    sim->add_option("--config", config, "experiment config (json)")->required();
    sim->add_option("--out", out, "output directory")->required();
    sim->add_option("--seed", seed, "override the noise seed");
    sim->add_option("--threads", threads, "worker thread count");

    CLI::App* rec = app.add_subcommand("reconstruct", "recover an albedo map from measurements");
    rec->add_option("input", input, "measurement directory from simulate")->required();
    rec->add_option("--config", config, "experiment config (json)")->required();
    rec->add_option("--method", method, "em or gd")
        ->check(CLI::IsMember({"em", "gd"}));
    rec->add_option("--out", out, "output directory")->required();
    rec->add_option("--seed", seed, "override the initialization seed");
    rec->add_option("--threads", threads, "worker thread count");

    CLI::App* ev = app.add_subcommand("evaluate", "score a reconstruction against its source");
    ev->add_option("truth", truth, "source object image (pgm or kht1)")->required();
    ev->add_option("recon", recon, "reconstructed image (pgm or kht1)")->required();
    ev->add_option("--config", config, "experiment config (json)");
    ev->add_option("--out", out, "append a row to this csv report");
    ev->add_option("--method", method, "method label for the report row");
    ev->add_option("--threads", threads, "worker thread count");

    CLI::App* et = app.add_subcommand("estimate-trajectory", "decode poses from posterior weights");
    et->add_option("weights", weights, "posterior weights tensor (kht1)")->required();
    et->add_option("--config", config, "experiment config (json)")->required();
    et->add_option("--out", out, "output trajectory json")->required();

    CLI::App* sw = app.add_subcommand("sweep", "run the object x trajectory x noise grid");
    sw->add_option("--config", config, "experiment config (json)")->required();
    sw->add_option("--out", out, "output directory (overrides the config)");
    sw->add_option("--seed", seed, "override the sweep seed");
    sw->add_option("--threads", threads, "worker thread count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (threads > 0)
            set_thread_count(threads);
        if (sim->parsed())
            return cmd_simulate(config, out, sim->count("--seed") > 0, seed);
        if (rec->parsed())
            return cmd_reconstruct(input, config, method, out, rec->count("--seed") > 0, seed);
        if (ev->parsed())
            return cmd_evaluate(truth, recon, config, out, ev->count("--method") ? method : "");
        if (et->parsed())
            return cmd_estimate_trajectory(weights, config, out);
        if (sw->parsed())
            return cmd_sweep(config, out, sw->count("--seed") > 0, seed);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
