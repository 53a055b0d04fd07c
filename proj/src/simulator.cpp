#include "keyhole/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "keyhole/parallel.hpp"

namespace keyhole {
namespace {

double plane_tolerance(double fixed) { return 1e-12 * std::max(1.0, std::fabs(fixed)); }

} // namespace

std::int64_t Rng::poisson(double mu) {
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("poisson mean must be nonnegative and finite");
    if (mu == 0.0)
        return 0;
    if (mu < 10.0) {
        // Inverse transform by sequential search.
        const double p0 = std::exp(-mu);
        double p = p0, cdf = p0;
        const double u = u01();
        std::int64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= mu / static_cast<double>(k);
            cdf += p;
            if (k > 2000) // cdf stuck below u from rounding; the tail is negligible
                break;
        }
        return k;
    }
    // PTRS transformed rejection (Hormann 1993), exact for mu >= 10.
    const double b = 0.931 + 2.53 * std::sqrt(mu);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
        double u = u01() - 0.5;
        double v = u01();
        const double us = 0.5 - std::fabs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
        if (us >= 0.07 && v <= v_r)
            return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us))
            continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            kf * log_mu - mu - std::lgamma(kf + 1.0))
            return static_cast<std::int64_t>(kf);
    }
}

void TrajectorySet::validate() const {
    if (poses.empty())
        throw std::invalid_argument("trajectory must contain at least one pose");
    for (const auto& p : poses)
        if (!p.translation.finite() || !std::isfinite(p.rotation))
            throw std::invalid_argument("trajectory poses must be finite");
    const double fixed = plane_coordinate(plane, poses.front().translation);
    for (const auto& p : poses)
        if (std::fabs(plane_coordinate(plane, p.translation) - fixed) > plane_tolerance(fixed))
            throw std::invalid_argument("trajectory poses leave the declared plane");
}

TrajectorySet make_trajectory(const TrajectorySpec& spec) {
    if (spec.waypoints.size() < 2)
        throw std::invalid_argument("trajectory needs at least two waypoints");
    if (spec.samples_per_segment < 1)
        throw std::invalid_argument("samples per segment must be at least 1");
    for (const auto& w : spec.waypoints)
        if (!w.finite())
            throw std::invalid_argument("waypoints must be finite");
    const double fixed = plane_coordinate(spec.plane, spec.waypoints.front());
    for (const auto& w : spec.waypoints)
        if (std::fabs(plane_coordinate(spec.plane, w) - fixed) > plane_tolerance(fixed))
            throw std::invalid_argument("waypoints leave the declared plane");

    // Interpolate and re-pin the fixed coordinate so poses stay exactly in
    // the plane regardless of rounding in the lerp.
    std::vector<Vec3> points;
    points.push_back(spec.waypoints.front());
    for (std::size_t s = 0; s + 1 < spec.waypoints.size(); ++s) {
        const Vec3& p0 = spec.waypoints[s];
        const Vec3& p1 = spec.waypoints[s + 1];
        const int n = spec.samples_per_segment;
        for (int j = 1; j <= n; ++j) {
            const double t = static_cast<double>(j) / n;
            Vec3 p = p0 * (1.0 - t) + p1 * t;
            switch (spec.plane) {
            case PlaneKind::constant_x: p.x = fixed; break;
            case PlaneKind::constant_y: p.y = fixed; break;
            case PlaneKind::constant_z: p.z = fixed; break;
            }
            points.push_back(p);
        }
    }

    TrajectorySet out;
    out.plane = spec.plane;
    out.label = spec.label;
    for (const auto& p : points) {
        if (!out.poses.empty() && out.poses.back().translation == p)
            continue;
        out.poses.push_back(RigidTransform{p, spec.rotation});
    }
    if (out.poses.size() == 1)
        std::fprintf(stderr, "warning: trajectory '%s' collapsed to a single pose\n",
                     spec.label.c_str());
    out.validate();
    return out;
}

TrajectorySet trajectory_preset(int length, PlaneKind plane, double scale, Vec3 center) {
    if (!(scale > 0.0) || !std::isfinite(scale) || !center.finite())
        throw std::invalid_argument("trajectory preset needs a positive scale and finite center");
    const double h = scale / 2.0;
    const auto at = [&](double u, double v) { return center + plane_point(plane, u, v, 0.0); };

    TrajectorySpec spec;
    spec.plane = plane;
    switch (length) {
    case 103:
        // A V: upper left, lower middle, upper right. 2 segments x 51 + 1.
        spec.waypoints = {at(-h, h), at(0.0, -h), at(h, h)};
        spec.samples_per_segment = 51;
        spec.label = "v103";
        break;
    case 193:
        // Closed square loop, 4 segments x 48 + 1; the return to the start
        // is not adjacent to it, so nothing collapses.
        spec.waypoints = {at(-h, h), at(h, h), at(h, -h), at(-h, -h), at(-h, h)};
        spec.samples_per_segment = 48;
        spec.label = "square193";
        break;
    case 360: {
        // Serpentine raster: 12 rows x 30 columns of waypoints, one sample
        // per segment, alternating sweep direction.
        const int rows = 12, cols = 30;
        for (int r = 0; r < rows; ++r) {
            const double v = h - scale * r / (rows - 1);
            for (int c = 0; c < cols; ++c) {
                const int cc = (r % 2 == 0) ? c : cols - 1 - c;
                spec.waypoints.push_back(at(-h + scale * cc / (cols - 1), v));
            }
        }
        spec.samples_per_segment = 1;
        spec.label = "serpentine360";
        break;
    }
    default:
        throw std::invalid_argument("unknown trajectory preset length " + std::to_string(length));
    }
    TrajectorySet t = make_trajectory(spec);
    if (t.length() != length)
        throw std::logic_error("trajectory preset produced the wrong length");
    return t;
}

CandidateGrid make_candidate_grid(PlaneKind plane, int rows, int cols, double extent_u,
                                  double extent_v, Vec3 center) {
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument("candidate grid shape must be positive");
    if (extent_u < 0.0 || extent_v < 0.0 || !std::isfinite(extent_u) || !std::isfinite(extent_v))
        throw std::invalid_argument("candidate grid extent must be nonnegative and finite");
    if ((cols > 1 && extent_u <= 0.0) || (rows > 1 && extent_v <= 0.0))
        throw std::invalid_argument("multi-point axes need a positive extent");
    if (!center.finite())
        throw std::invalid_argument("candidate grid center must be finite");

    const double du = cols > 1 ? extent_u / (cols - 1) : 0.0;
    const double dv = rows > 1 ? extent_v / (rows - 1) : 0.0;
    CandidateGrid grid;
    grid.plane = plane;
    grid.rows = rows;
    grid.cols = cols;
    grid.extent_u = extent_u;
    grid.extent_v = extent_v;
    grid.poses.reserve(static_cast<std::size_t>(rows) * cols);
    for (int row = 0; row < rows; ++row) {
        for (int col = 0; col < cols; ++col) {
            const double u = (col - (cols - 1) / 2.0) * du;
            const double v = ((rows - 1) / 2.0 - row) * dv;
            grid.poses.push_back(RigidTransform{center + plane_point(plane, u, v, 0.0), 0.0});
        }
    }
    return grid;
}

void NoiseModel::validate() const {
    if (kind != NoiseKind::none && (!(target_snr > 0.0) || !std::isfinite(target_snr)))
        throw std::invalid_argument("noise model needs a positive, finite target SNR");
}

NoiseModel NoiseModel::poisson(double target_snr, std::uint64_t seed) {
    NoiseModel m;
    m.kind = NoiseKind::poisson_snr;
    m.target_snr = target_snr;
    m.seed = seed;
    m.validate();
    return m;
}

NoiseModel NoiseModel::gaussian(double target_snr, std::uint64_t seed) {
    NoiseModel m;
    m.kind = NoiseKind::gaussian;
    m.target_snr = target_snr;
    m.seed = seed;
    m.validate();
    return m;
}

PoissonDraw apply_poisson_snr(const std::vector<double>& clean, double target_snr, Rng& rng) {
    if (!(target_snr > 0.0) || !std::isfinite(target_snr))
        throw std::invalid_argument("target SNR must be positive and finite");
    double peak = 0.0;
    for (double v : clean) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("clean histogram must be finite and nonnegative");
        peak = std::max(peak, v);
    }
    if (!(peak > 0.0))
        throw std::invalid_argument("clean histogram has no signal to scale");

    PoissonDraw draw;
    draw.scale = target_snr * target_snr / peak;
    draw.counts.resize(clean.size());
    for (std::size_t t = 0; t < clean.size(); ++t)
        draw.counts[t] = static_cast<double>(rng.poisson(draw.scale * clean[t])) / draw.scale;
    return draw;
}

TransientHistogram apply_poisson_snr(const TransientHistogram& clean, double target_snr, Rng& rng) {
    TransientHistogram out;
    out.counts = apply_poisson_snr(clean.counts, target_snr, rng).counts;
    out.bin_width = clean.bin_width;
    out.t0 = clean.t0;
    return out;
}

AlbedoGrid rasterize_object(const Image& gray, double physical_size, bool binarize,
                            Vec3 plane_offset) {
    if (gray.rows <= 0 || gray.cols <= 0)
        throw std::invalid_argument("object image is empty");
    if (!(physical_size > 0.0) || !std::isfinite(physical_size))
        throw std::invalid_argument("physical size must be positive and finite");
    for (double v : gray.data)
        if (!std::isfinite(v))
            throw std::invalid_argument("object pixels must be finite");

    AlbedoGrid grid;
    grid.values = Image(gray.rows, gray.cols);
    grid.pixel_pitch = physical_size / std::max(gray.rows, gray.cols);
    grid.plane_offset = plane_offset;
    for (std::size_t i = 0; i < gray.data.size(); ++i)
        grid.values.data[i] = binarize ? (gray.data[i] >= 0.5 ? 1.0 : 0.0) : gray.data[i];
    grid.validate();
    return grid;
}

SimulatedSequence simulate_sequence(const AlbedoGrid& object, const TrajectorySet& trajectory,
                                    const FalloffModel& falloff, const AssemblyParams& params,
                                    const NoiseModel& noise) {
    object.validate();
    trajectory.validate();
    noise.validate();

    const std::int64_t L = trajectory.length();
    SimulatedSequence seq;
    seq.clean.resize(L);
    seq.measured.resize(L);
    seq.count_scales.assign(L, 1.0);
    seq.bin_width = params.bin_width;
    seq.t0 = params.t0;

    const GridGeometry geom = geometry_of(object);
    parallel_for(L, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const SystemMatrix system = assemble_system(geom, trajectory.poses[i], falloff, params);
            seq.clean[i] = render(system, object);
            if (noise.kind == NoiseKind::poisson_snr) {
                Rng rng(mix_seed(noise.seed, static_cast<std::uint64_t>(i)));
                PoissonDraw draw = apply_poisson_snr(seq.clean[i].counts, noise.target_snr, rng);
                seq.measured[i].counts = std::move(draw.counts);
                seq.measured[i].bin_width = params.bin_width;
                seq.measured[i].t0 = params.t0;
                seq.count_scales[i] = draw.scale;
            } else if (noise.kind == NoiseKind::gaussian) {
                Rng rng(mix_seed(noise.seed, static_cast<std::uint64_t>(i)));
                double peak = 0.0;
                for (double v : seq.clean[i].counts)
                    peak = std::max(peak, v);
                const double sigma = peak > 0.0 ? peak / noise.target_snr : 0.0;
                seq.measured[i] = seq.clean[i];
                for (double& v : seq.measured[i].counts)
                    v += sigma * rng.normal();
            } else {
                seq.measured[i] = seq.clean[i];
            }
        }
    });
    return seq;
}

} // namespace keyhole
