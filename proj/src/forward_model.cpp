#include "keyhole/forward_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace keyhole {

void AlbedoGrid::validate() const {
    if (values.rows <= 0 || values.cols <= 0)
        throw std::invalid_argument("albedo grid has empty shape");
    if (!(pixel_pitch > 0.0) || !std::isfinite(pixel_pitch))
        throw std::invalid_argument("albedo pixel pitch must be positive and finite");
    for (double v : values.data)
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("albedo values must be finite and nonnegative");
    if (!plane_offset.finite())
        throw std::invalid_argument("albedo plane offset must be finite");
}

Vec3 pixel_center(const GridGeometry& geom, int row, int col) {
    const double x = (col - (geom.cols - 1) / 2.0) * geom.pixel_pitch;
    const double y = ((geom.rows - 1) / 2.0 - row) * geom.pixel_pitch;
    return Vec3{x, y, 0.0} + geom.plane_offset;
}

FalloffModel FalloffModel::preset(FalloffKind kind, Vec3 wall_normal) {
    FalloffModel m;
    m.kind = kind;
    m.wall_normal = wall_normal;
    switch (kind) {
    case FalloffKind::diffuse:      m.radial_exponent = 4.0; m.angular_exponent = 0.0;  break;
    case FalloffKind::retro:        m.radial_exponent = 2.0; m.angular_exponent = 0.0;  break;
    case FalloffKind::experimental: m.radial_exponent = 4.0; m.angular_exponent = 4.0;  break;
    case FalloffKind::supplement:   m.radial_exponent = 2.0; m.angular_exponent = -4.0; break;
    case FalloffKind::custom:
        throw std::invalid_argument("custom falloff needs explicit exponents");
    }
    m.validate();
    return m;
}

FalloffModel FalloffModel::custom(double radial_exponent, double angular_exponent, Vec3 wall_normal) {
    FalloffModel m;
    m.kind = FalloffKind::custom;
    m.radial_exponent = radial_exponent;
    m.angular_exponent = angular_exponent;
    m.wall_normal = wall_normal;
    m.validate();
    return m;
}

void FalloffModel::validate() const {
    if (!std::isfinite(radial_exponent) || !std::isfinite(angular_exponent))
        throw std::invalid_argument("falloff exponents must be finite");
    if (!wall_normal.finite() || !(wall_normal.norm() > 0.0))
        throw std::invalid_argument("falloff wall normal must be finite and nonzero");
}

double falloff_eval(const FalloffModel& model, const Vec3& x) {
    const double r = x.norm();
    if (!(r > 0.0))
        throw std::domain_error("falloff undefined at the scan origin");

    double g;
    const double p = model.radial_exponent;
    if (p == 2.0)      g = r * r;
    else if (p == 4.0) g = (r * r) * (r * r);
    else               g = std::pow(r, p);

    const double q = model.angular_exponent;
    if (q != 0.0) {
        const double c = dot(x, model.wall_normal) / (r * model.wall_normal.norm());
        if (q < 0.0 && !(c > 0.0))
            throw std::domain_error("falloff with negative angular exponent needs cos(phi) > 0");
        double cq;
        if (q == 4.0)       cq = (c * c) * (c * c);
        else if (q == -4.0) cq = 1.0 / ((c * c) * (c * c));
        else                cq = std::pow(c, q);
        g *= cq;
    }
    if (!std::isfinite(g) || !(g > 0.0))
        throw std::domain_error("falloff evaluated to a nonpositive or nonfinite value");
    return g;
}

std::optional<BinSplit> bin_index(double r, double bin_width, double t0) {
    if (!(r >= 0.0) || !std::isfinite(r))
        throw std::invalid_argument("range must be nonnegative and finite");
    if (!(bin_width > 0.0) || !std::isfinite(bin_width))
        throw std::invalid_argument("bin width must be positive and finite");

    const double b = (2.0 * r - kSpeedOfLight * t0) / (kSpeedOfLight * bin_width);
    if (b < 0.0)
        return std::nullopt;
    const double lo = std::floor(b);
    BinSplit split;
    split.lo = static_cast<std::int64_t>(lo);
    split.weight_lo = 1.0 - (b - lo);
    return split;
}

SystemMatrix assemble_system(const GridGeometry& geom, const RigidTransform& pose,
                             const FalloffModel& falloff, const AssemblyParams& params) {
    if (geom.rows <= 0 || geom.cols <= 0)
        throw std::invalid_argument("grid geometry has empty shape");
    if (!(geom.pixel_pitch > 0.0) || !std::isfinite(geom.pixel_pitch))
        throw std::invalid_argument("grid pixel pitch must be positive and finite");
    if (params.bins <= 0)
        throw std::invalid_argument("histogram needs at least one bin");
    if (!(params.bin_width > 0.0) || !std::isfinite(params.bin_width))
        throw std::invalid_argument("bin width must be positive and finite");
    if (!pose.translation.finite() || !std::isfinite(pose.rotation))
        throw std::invalid_argument("pose must be finite");
    falloff.validate();

    SystemMatrix system;
    system.bins = params.bins;
    system.rows = geom.rows;
    system.cols = geom.cols;
    system.bin_width = params.bin_width;
    system.t0 = params.t0;
    system.pose = pose;
    const std::int64_t n = static_cast<std::int64_t>(geom.rows) * geom.cols;
    system.bin_lo.assign(n, -1);
    system.value_lo.assign(n, 0.0);
    system.value_hi.assign(n, 0.0);

    const double pixel_area = geom.pixel_pitch * geom.pixel_pitch;
    std::int64_t dropped = 0;
    for (int row = 0; row < geom.rows; ++row) {
        for (int col = 0; col < geom.cols; ++col) {
            const std::int64_t j = static_cast<std::int64_t>(row) * geom.cols + col;
            const Vec3 x = apply(pose, pixel_center(geom, row, col)) - params.scan_origin;
            const auto split = bin_index(x.norm(), params.bin_width, params.t0);
            if (!split || split->lo >= params.bins - 1) {
                ++dropped;
                continue;
            }
            const double g = falloff_eval(falloff, x);
            const double v = pixel_area / g;
            system.bin_lo[j] = static_cast<std::int32_t>(split->lo);
            system.value_lo[j] = v * split->weight_lo;
            system.value_hi[j] = v * (1.0 - split->weight_lo);
        }
    }
    system.dropped_pixels = dropped;
    return system;
}

TransientHistogram render(const SystemMatrix& system, const AlbedoGrid& albedo) {
    albedo.validate();
    if (albedo.values.rows != system.rows || albedo.values.cols != system.cols)
        throw std::invalid_argument("albedo shape does not match the system matrix");
    TransientHistogram h;
    h.counts.assign(system.bins, 0.0);
    h.bin_width = system.bin_width;
    h.t0 = system.t0;
    render_into(system, albedo.values.data, h.counts);
    return h;
}

Image adjoint(const SystemMatrix& system, const TransientHistogram& histogram) {
    if (histogram.bins() != system.bins)
        throw std::invalid_argument("histogram length does not match the system matrix");
    Image img(system.rows, system.cols);
    adjoint_into(system, histogram.counts, img.data);
    return img;
}

void render_into(const SystemMatrix& system, std::span<const double> albedo, std::span<double> out) {
    const std::int64_t n = system.pixel_count();
    for (double& v : out)
        v = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        const std::int32_t lo = system.bin_lo[j];
        if (lo < 0)
            continue;
        const double a = albedo[j];
        out[lo] += system.value_lo[j] * a;
        out[lo + 1] += system.value_hi[j] * a;
    }
}

void adjoint_into(const SystemMatrix& system, std::span<const double> histogram, std::span<double> out) {
    const std::int64_t n = system.pixel_count();
    for (std::int64_t j = 0; j < n; ++j) {
        const std::int32_t lo = system.bin_lo[j];
        if (lo < 0) {
            out[j] = 0.0;
            continue;
        }
        out[j] = system.value_lo[j] * histogram[lo] + system.value_hi[j] * histogram[lo + 1];
    }
}

} // namespace keyhole
