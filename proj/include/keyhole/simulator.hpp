#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keyhole/forward_model.hpp"
#include "keyhole/geometry.hpp"
#include "keyhole/rng.hpp"

namespace keyhole {

// Ordered object poses, one per measurement, restricted to a plane: the
// plane's fixed coordinate is identical across poses.
struct TrajectorySet {
    std::vector<RigidTransform> poses;
    PlaneKind plane = PlaneKind::constant_z;
    std::string label;

    std::int64_t length() const { return static_cast<std::int64_t>(poses.size()); }
    void validate() const;
};

// Piecewise-linear path through waypoints, all of which must share the
// plane's fixed coordinate. Each segment is sampled at fractions
// j/samples_per_segment for j = 1..samples_per_segment, the first waypoint
// opens the list, and consecutive duplicates collapse (so a closed loop
// keeps its returning endpoint but not repeated joints).
struct TrajectorySpec {
    PlaneKind plane = PlaneKind::constant_z;
    std::vector<Vec3> waypoints;
    int samples_per_segment = 1;
    double rotation = 0.0; // constant in-plane rotation applied to every pose
    std::string label;
};

TrajectorySet make_trajectory(const TrajectorySpec& spec);

// Bundled paths matching the experiment lengths: 103 (a V), 193 (a closed
// square loop) and 360 (a serpentine raster). scale is the path extent in
// meters inside the plane; center fixes the plane coordinate.
TrajectorySet trajectory_preset(int length, PlaneKind plane = PlaneKind::constant_z,
                                double scale = 0.5, Vec3 center = {0.0, 0.0, 1.25});

// Equispaced rows x cols lattice of candidate translations spanning
// extent_u x extent_v meters (corner to corner) around center, inside the
// given plane. K = rows * cols.
struct CandidateGrid {
    std::vector<RigidTransform> poses;
    PlaneKind plane = PlaneKind::constant_z;
    int rows = 0;
    int cols = 0;
    double extent_u = 0.0;
    double extent_v = 0.0;

    std::int64_t size() const { return static_cast<std::int64_t>(poses.size()); }
};

CandidateGrid make_candidate_grid(PlaneKind plane, int rows, int cols, double extent_u,
                                  double extent_v, Vec3 center);

enum class NoiseKind { none, poisson_snr, gaussian };

// poisson_snr scales the clean histogram so its peak bin has mean
// target_snr^2, draws Poisson counts, and rescales back. gaussian adds
// N(0, sigma^2) with sigma = peak / target_snr.
struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double target_snr = 0.0;
    std::uint64_t seed = 0;

    static NoiseModel off() { return {}; }
    static NoiseModel poisson(double target_snr, std::uint64_t seed = 0);
    static NoiseModel gaussian(double target_snr, std::uint64_t seed = 0);
    void validate() const;
};

// Scaled Poisson draw of a clean histogram: counts holds the draw divided by
// scale (comparable to the clean input); counts * scale are the raw
// integers. scale = target_snr^2 / max_bin(clean).
struct PoissonDraw {
    std::vector<double> counts;
    double scale = 1.0;
};

PoissonDraw apply_poisson_snr(const std::vector<double>& clean, double target_snr, Rng& rng);
TransientHistogram apply_poisson_snr(const TransientHistogram& clean, double target_snr, Rng& rng);

// Grayscale in [0,1] to albedo: pixel_pitch = physical_size / max(H, W);
// values binarized at 0.5 unless binarize is false.
AlbedoGrid rasterize_object(const Image& gray, double physical_size, bool binarize = true,
                            Vec3 plane_offset = {});

// One measurement per trajectory pose. clean holds the noiseless renders,
// measured the observations handed to reconstruction. count_scales[i]
// converts measured[i] back to raw Poisson counts (1 when not poisson_snr).
struct SimulatedSequence {
    std::vector<TransientHistogram> clean;
    std::vector<TransientHistogram> measured;
    std::vector<double> count_scales;
    double bin_width = 0.0;
    double t0 = 0.0;
};

// Renders every pose and applies the noise model, with one RNG stream per
// measurement split from noise.seed so any parallel schedule gives the same
// draws.
SimulatedSequence simulate_sequence(const AlbedoGrid& object, const TrajectorySet& trajectory,
                                    const FalloffModel& falloff, const AssemblyParams& params,
                                    const NoiseModel& noise);

} // namespace keyhole
