#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keyhole/evaluation.hpp"
#include "keyhole/reconstruction.hpp"
#include "keyhole/simulator.hpp"

namespace keyhole {

// Raised for malformed configs; the message names the offending field path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimulateConfig {
    std::string object_path;
    double physical_size = 0.5;
    bool binarize = true;
    TrajectorySet trajectory;
    FalloffModel falloff = FalloffModel::preset(FalloffKind::retro);
    AssemblyParams assembly;
    NoiseModel noise;
};

struct ReconstructConfig {
    EMConfig em;
    int gd_iterations = 200;
    bool normalize_peak = true; // scale measurements by 1/global peak first
    GridGeometry recon_geom;
    CandidateGrid candidates;
    PriorModel prior;
    FalloffModel falloff = FalloffModel::preset(FalloffKind::retro);
};

struct EvaluateConfig {
    DisambiguationSearch search;
    SSIMParams ssim_params;
    std::string trajectory_label; // optional metadata copied into report rows
    double snr = 0.0;
};

struct ExperimentSpec {
    std::vector<std::string> objects; // image paths
    std::vector<TrajectorySet> trajectories;
    std::vector<double> snrs;
    std::vector<std::string> methods; // subset of {"gd", "em"}
    SimulateConfig sim;               // object/trajectory/noise fields overridden per cell
    ReconstructConfig recon;
    EvaluateConfig eval;
    std::string output_dir;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ResultRecord {
    std::string object;
    std::string trajectory;
    double snr = 0.0;
    std::string method;
    std::uint64_t seed = 0;
    double ssim = 0.0;
    std::string best_rtf;
    double trajectory_rmse = 0.0; // < 0 encodes not-applicable
    double wall_time_s = 0.0;
    int iterations = 0;
    std::string status = "ok"; // "ok" or an error marker
};

// --- config loading -------------------------------------------------------
// One JSON file holds optional sections "simulate", "reconstruct",
// "evaluate", "sweep"; each parser pulls its section and reports errors with
// full field paths. Paths inside configs resolve relative to the config
// file's directory.

SimulateConfig load_simulate_config(const std::string& config_path);
ReconstructConfig load_reconstruct_config(const std::string& config_path);
EvaluateConfig load_evaluate_config(const std::string& config_path);
ExperimentSpec load_sweep_spec(const std::string& config_path);

// --- persistence ----------------------------------------------------------

// Writes measured.kht1 (L x T), clean.kht1, sidecar.json (poses, binning,
// noise, per-measurement count scales) and PGM previews into dir.
void save_sequence(const std::string& dir, const SimulatedSequence& seq,
                   const TrajectorySet& trajectory, const SimulateConfig& config);

struct LoadedSequence {
    std::vector<TransientHistogram> measured;
    TrajectorySet trajectory;
    std::vector<double> count_scales;
    Vec3 scan_origin;
};

LoadedSequence load_sequence(const std::string& dir);

// Reconstruction inputs with the measurement peak divided out of both sides
// of the model, so hyperparameters see unit-scale counts and albedo. With
// normalize_peak off this just assembles the per-pose systems.
struct PreparedSystems {
    std::vector<TransientHistogram> measured;
    std::vector<SystemMatrix> systems;
    double scale = 1.0; // divisor applied to counts and system values
};

PreparedSystems prepare_systems(const std::vector<TransientHistogram>& measured,
                                const std::vector<RigidTransform>& poses,
                                const GridGeometry& geom, const FalloffModel& falloff,
                                const Vec3& scan_origin, bool normalize_peak);

// Grayscale loader for PGM or rank-2 KHT1 images.
Image load_image_any(const std::string& path);

void save_trajectory_json(const std::string& path, const TrajectorySet& t);
TrajectorySet load_trajectory_json(const std::string& path);

// Appends one record, writing the header when the file does not yet exist.
void append_record(const std::string& csv_path, const ResultRecord& record);

// --- sweep ----------------------------------------------------------------

// Simulate, reconstruct and evaluate the full objects x trajectories x snrs
// x methods cross product. Per-cell rows land in journal.csv as they finish
// (keys already journaled are skipped, making interrupted runs resumable);
// at the end records.csv (canonically ordered) and summary.csv (rows =
// trajectories, one mean-SSIM column per method and SNR) are regenerated
// from the journal. A failing cell is recorded with an error status and the
// sweep moves on.
void run_experiment(const ExperimentSpec& spec);

} // namespace keyhole
