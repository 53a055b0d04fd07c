#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "keyhole/geometry.hpp"
#include "keyhole/tensor.hpp"

namespace keyhole {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s

// Planar albedo spanning the local x (columns) and y (rows) axes. Row 0 is
// the top of the image, i.e. the largest local y. plane_offset places the
// grid center in the local frame.
struct AlbedoGrid {
    Image values;
    double pixel_pitch = 0.0; // meters per pixel
    Vec3 plane_offset;

    void validate() const;
};

// Shape of an albedo grid without the pixel values; enough to assemble a
// system matrix.
struct GridGeometry {
    int rows = 0;
    int cols = 0;
    double pixel_pitch = 0.0;
    Vec3 plane_offset;
};

inline GridGeometry geometry_of(const AlbedoGrid& grid) {
    return {grid.values.rows, grid.values.cols, grid.pixel_pitch, grid.plane_offset};
}

// Local-frame center of pixel (row, col).
Vec3 pixel_center(const GridGeometry& geom, int row, int col);

struct TransientHistogram {
    std::vector<double> counts;
    double bin_width = 16e-12; // seconds
    double t0 = 0.0;           // time origin of bin 0

    std::int64_t bins() const { return static_cast<std::int64_t>(counts.size()); }
};

// Radiometric falloff g(x). A point's contribution is divided by g, so larger
// g means faster drop-off. g = ||x||^p * cos^q(phi) with phi the angle between
// wall_normal and x. Negative q divides by the cosine power.
enum class FalloffKind { diffuse, retro, experimental, supplement, custom };

struct FalloffModel {
    FalloffKind kind = FalloffKind::retro;
    double radial_exponent = 2.0;
    double angular_exponent = 0.0;
    Vec3 wall_normal{0.0, 0.0, 1.0};

    // diffuse (4,0); retro (2,0); experimental (4,4); supplement (2,-4).
    static FalloffModel preset(FalloffKind kind, Vec3 wall_normal = {0.0, 0.0, 1.0});
    static FalloffModel custom(double radial_exponent, double angular_exponent,
                               Vec3 wall_normal = {0.0, 0.0, 1.0});
    void validate() const;
};

double falloff_eval(const FalloffModel& model, const Vec3& x_global);

// Round-trip time-of-flight split across two adjacent bins. The continuous
// bin coordinate is b = (2r/c - t0)/dt, evaluated as (2r - c*t0)/(c*dt) so
// that r = c*dt/2 with t0 = 0 lands exactly on bin 1. Returns nullopt when
// b < 0; the upper range check needs T and happens at assembly.
struct BinSplit {
    std::int64_t lo = 0;
    double weight_lo = 1.0; // weight of bin lo; bin lo+1 gets 1 - weight_lo
};

std::optional<BinSplit> bin_index(double r, double bin_width, double t0);

struct AssemblyParams {
    std::int64_t bins = 1024;
    double bin_width = 16e-12;
    double t0 = 0.0;
    // Position of the confocal scan point. Moving it by -t is equivalent to
    // translating the object by +t (virtual-sensor equivalence).
    Vec3 scan_origin;
};

// Linear map from pixel values to histogram bins for one pose. Each pixel
// contributes to at most two adjacent bins: value_lo into bin_lo and
// value_hi into bin_lo + 1. bin_lo = -1 marks a pixel whose energy fell
// outside [0, T-1) and was dropped.
struct SystemMatrix {
    std::int64_t bins = 0;
    int rows = 0;
    int cols = 0;
    double bin_width = 0.0;
    double t0 = 0.0;
    RigidTransform pose;
    std::vector<std::int32_t> bin_lo;
    std::vector<double> value_lo;
    std::vector<double> value_hi;
    std::int64_t dropped_pixels = 0;

    std::int64_t pixel_count() const { return static_cast<std::int64_t>(bin_lo.size()); }
    bool all_dropped() const { return dropped_pixels == pixel_count() && pixel_count() > 0; }
};

SystemMatrix assemble_system(const GridGeometry& geom, const RigidTransform& pose,
                             const FalloffModel& falloff, const AssemblyParams& params);

// counts = system * vec(albedo)
TransientHistogram render(const SystemMatrix& system, const AlbedoGrid& albedo);
// Exact transpose of render.
Image adjoint(const SystemMatrix& system, const TransientHistogram& histogram);

// Allocation-free cores used by the reconstruction inner loops. out spans
// must be sized T and rows*cols respectively; render_into zeroes out first.
void render_into(const SystemMatrix& system, std::span<const double> albedo, std::span<double> out);
void adjoint_into(const SystemMatrix& system, std::span<const double> histogram, std::span<double> out);

} // namespace keyhole
