#include "keyhole/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "keyhole/parallel.hpp"
#include "keyhole/rng.hpp"

namespace keyhole {
namespace {

void check_measurements(const std::vector<TransientHistogram>& measurements, std::int64_t bins) {
    if (measurements.empty())
        throw std::invalid_argument("need at least one measurement");
    for (const auto& y : measurements)
        if (y.bins() != bins)
            throw std::invalid_argument("measurement length does not match the system matrices");
}

void check_systems(const std::vector<SystemMatrix>& systems) {
    if (systems.empty())
        throw std::invalid_argument("need at least one candidate system");
    for (const auto& s : systems)
        if (s.bins != systems[0].bins || s.rows != systems[0].rows || s.cols != systems[0].cols)
            throw std::invalid_argument("candidate systems disagree on shape");
}

// Sufficient statistics of (weights, measurements) for the surrogate
// objective: Q_data(rho) = -(yy - 2 sum_k r_k.ybar_k + sum_k wsum_k |r_k|^2)
// with r_k = A_k rho.
struct Aggregates {
    std::int64_t K = 0;
    std::int64_t T = 0;
    std::vector<double> ybar; // K x T, sum_i w_ik y_i
    std::vector<double> wsum; // K, sum_i w_ik
    double sum_w = 0.0;
    double yy = 0.0;
};

Aggregates build_aggregates(const std::vector<TransientHistogram>& measurements,
                            const PosteriorWeights& weights) {
    const std::int64_t L = weights.measurements;
    const std::int64_t K = weights.candidates;
    const std::int64_t T = measurements[0].bins();
    if (static_cast<std::int64_t>(measurements.size()) != L)
        throw std::invalid_argument("weights row count does not match the measurements");

    Aggregates agg;
    agg.K = K;
    agg.T = T;
    agg.ybar.assign(K * T, 0.0);
    agg.wsum.assign(K, 0.0);
    parallel_for(K, [&](std::int64_t klo, std::int64_t khi) {
        for (std::int64_t k = klo; k < khi; ++k) {
            double* out = agg.ybar.data() + k * T;
            double ws = 0.0;
            for (std::int64_t i = 0; i < L; ++i) {
                const double w = weights.at(i, k);
                if (w == 0.0)
                    continue;
                ws += w;
                const double* y = measurements[i].counts.data();
                for (std::int64_t t = 0; t < T; ++t)
                    out[t] += w * y[t];
            }
            agg.wsum[k] = ws;
        }
    });
    for (std::int64_t i = 0; i < L; ++i) {
        double row = 0.0;
        for (std::int64_t k = 0; k < K; ++k)
            row += weights.at(i, k);
        double yn = 0.0;
        for (double v : measurements[i].counts)
            yn += v * v;
        agg.sum_w += row;
        agg.yy += row * yn;
    }
    return agg;
}

// Delta-weight aggregates for the known-trajectory objective: candidate i is
// measurement i's own pose with weight 1.
Aggregates identity_aggregates(const std::vector<TransientHistogram>& measurements) {
    const std::int64_t L = static_cast<std::int64_t>(measurements.size());
    const std::int64_t T = measurements[0].bins();
    Aggregates agg;
    agg.K = L;
    agg.T = T;
    agg.ybar.assign(L * T, 0.0);
    agg.wsum.assign(L, 1.0);
    agg.sum_w = static_cast<double>(L);
    for (std::int64_t i = 0; i < L; ++i) {
        const double* y = measurements[i].counts.data();
        std::copy(y, y + T, agg.ybar.data() + i * T);
        double yn = 0.0;
        for (std::int64_t t = 0; t < T; ++t)
            yn += y[t] * y[t];
        agg.yy += yn;
    }
    return agg;
}

// renders[k*T..] = A_k rho, filled in parallel per candidate.
void render_all(const std::vector<SystemMatrix>& systems, std::span<const double> rho,
                std::vector<double>& renders) {
    const std::int64_t K = static_cast<std::int64_t>(systems.size());
    const std::int64_t T = systems[0].bins;
    renders.resize(K * T);
    parallel_for(K, [&](std::int64_t klo, std::int64_t khi) {
        for (std::int64_t k = klo; k < khi; ++k)
            render_into(systems[k], rho, std::span<double>(renders.data() + k * T, T));
    });
}

double data_q(const Aggregates& agg, const std::vector<double>& renders,
              const std::vector<SystemMatrix>& systems) {
    const std::int64_t K = static_cast<std::int64_t>(systems.size());
    const std::int64_t T = agg.T;
    double cross = 0.0, quad = 0.0;
    for (std::int64_t k = 0; k < K; ++k) {
        const double* r = renders.data() + k * T;
        const double* yb = agg.ybar.data() + k * T;
        double rb = 0.0, rr = 0.0;
        for (std::int64_t t = 0; t < T; ++t) {
            rb += r[t] * yb[t];
            rr += r[t] * r[t];
        }
        cross += rb;
        quad += agg.wsum[k] * rr;
    }
    return -(agg.yy - 2.0 * cross + quad);
}

// grad[j] = sum_k 2 a_jk . (ybar_k - wsum_k r_k), accumulated per pixel so a
// parallel split over pixels is deterministic.
void data_gradient_rho(const Aggregates& agg, const std::vector<double>& renders,
                       const std::vector<SystemMatrix>& systems, std::vector<double>& slack,
                       std::vector<double>& grad) {
    const std::int64_t K = static_cast<std::int64_t>(systems.size());
    const std::int64_t T = agg.T;
    const std::int64_t n = systems[0].pixel_count();
    slack.resize(K * T);
    parallel_for(K, [&](std::int64_t klo, std::int64_t khi) {
        for (std::int64_t k = klo; k < khi; ++k) {
            const double wk = agg.wsum[k];
            const double* r = renders.data() + k * T;
            const double* yb = agg.ybar.data() + k * T;
            double* s = slack.data() + k * T;
            for (std::int64_t t = 0; t < T; ++t)
                s[t] = yb[t] - wk * r[t];
        }
    });
    grad.assign(n, 0.0);
    parallel_for(n, [&](std::int64_t jlo, std::int64_t jhi) {
        for (std::int64_t k = 0; k < K; ++k) {
            const SystemMatrix& sys = systems[k];
            const double* s = slack.data() + k * T;
            for (std::int64_t j = jlo; j < jhi; ++j) {
                const std::int32_t lo = sys.bin_lo[j];
                if (lo < 0)
                    continue;
                grad[j] += 2.0 * (sys.value_lo[j] * s[lo] + sys.value_hi[j] * s[lo + 1]);
            }
        }
    });
}

// Adaptive-moment ascent with bias correction; a zero gradient leaves the
// parameters untouched.
struct MomentOptimizer {
    double lr, b1, b2;
    double eps = 1e-8;
    int t = 0;
    std::vector<double> m, v;

    MomentOptimizer(double lr, double b1, double b2, std::size_t n)
        : lr(lr), b1(b1), b2(b2), m(n, 0.0), v(n, 0.0) {}

    void ascend(std::vector<double>& params, const std::vector<double>& grad) {
        ++t;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t j = 0; j < params.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
            v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
            params[j] += lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
        }
    }
};

void full_gradient_nu(const Aggregates& agg, const std::vector<double>& renders,
                      const std::vector<SystemMatrix>& systems, const Image& nu,
                      double prior_weight, const PriorModel& prior, std::vector<double>& slack,
                      std::vector<double>& grad) {
    data_gradient_rho(agg, renders, systems, slack, grad);
    if (prior_weight != 0.0) {
        Image rho(nu.rows, nu.cols);
        for (std::size_t j = 0; j < rho.data.size(); ++j)
            rho.data[j] = nu.data[j] * nu.data[j];
        const Image pg = prior_gradient(rho, prior);
        for (std::size_t j = 0; j < grad.size(); ++j)
            grad[j] += prior_weight * pg.data[j];
    }
    for (std::size_t j = 0; j < grad.size(); ++j)
        grad[j] *= 2.0 * nu.data[j];
}

// Shared ascent core. prior_weight is lambda * sum_w for the surrogate and
// plain lambda for the known-trajectory objective.
void ascend_nu(Image& nu, const Aggregates& agg, const std::vector<SystemMatrix>& systems,
               const EMConfig& config, double prior_weight, const PriorModel& prior, int steps) {
    MomentOptimizer opt(config.learning_rate, config.momentum_decay1, config.momentum_decay2,
                        nu.data.size());
    std::vector<double> rho(nu.data.size());
    std::vector<double> renders, slack, grad;
    for (int s = 0; s < steps; ++s) {
        for (std::size_t j = 0; j < rho.size(); ++j)
            rho[j] = nu.data[j] * nu.data[j];
        render_all(systems, rho, renders);
        full_gradient_nu(agg, renders, systems, nu, prior_weight, prior, slack, grad);
        opt.ascend(nu.data, grad);
    }
}

GridGeometry geometry_for(const std::vector<SystemMatrix>& systems, const GridGeometry& recon_geom) {
    if (recon_geom.rows != systems[0].rows || recon_geom.cols != systems[0].cols)
        throw std::invalid_argument("reconstruction geometry does not match the systems");
    return recon_geom;
}

AssemblyParams params_from(const std::vector<TransientHistogram>& measurements) {
    if (measurements.empty())
        throw std::invalid_argument("need at least one measurement");
    AssemblyParams params;
    params.bins = measurements[0].bins();
    params.bin_width = measurements[0].bin_width;
    params.t0 = measurements[0].t0;
    for (const auto& y : measurements)
        if (y.bins() != params.bins || y.bin_width != params.bin_width || y.t0 != params.t0)
            throw std::invalid_argument("measurements disagree on binning");
    return params;
}

std::vector<SystemMatrix> assemble_all(const std::vector<RigidTransform>& poses,
                                       const GridGeometry& geom, const FalloffModel& falloff,
                                       const AssemblyParams& params) {
    std::vector<SystemMatrix> systems(poses.size());
    parallel_for(static_cast<std::int64_t>(poses.size()), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t k = lo; k < hi; ++k)
            systems[k] = assemble_system(geom, poses[k], falloff, params);
    });
    return systems;
}

} // namespace

void EMConfig::validate() const {
    if (iterations < 1)
        throw std::invalid_argument("config needs at least one iteration");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("sigma must be positive and finite");
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw std::invalid_argument("lambda must be nonnegative and finite");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning rate must be positive and finite");
    if (momentum_decay1 < 0.0 || momentum_decay1 >= 1.0 || momentum_decay2 < 0.0 ||
        momentum_decay2 >= 1.0)
        throw std::invalid_argument("momentum decays must lie in [0, 1)");
    if (!(anneal_factor > 1.0) || !std::isfinite(anneal_factor))
        throw std::invalid_argument("anneal factor must exceed 1");
    if (recon_rows < 0 || recon_cols < 0)
        throw std::invalid_argument("reconstruction shape must be nonnegative");
}

Image ReconState::albedo() const {
    Image rho(nu.rows, nu.cols);
    for (std::size_t j = 0; j < rho.data.size(); ++j)
        rho.data[j] = nu.data[j] * nu.data[j];
    return rho;
}

Image init_nu(int rows, int cols, std::uint64_t seed, double scale) {
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument("nu shape must be positive");
    Image nu(rows, cols);
    Rng rng(seed);
    for (double& v : nu.data)
        v = scale * rng.normal();
    return nu;
}

AnnealingSchedule annealing_schedule(int iterations, double factor) {
    if (iterations < 1)
        throw std::invalid_argument("schedule needs at least one iteration");
    if (!(factor > 1.0) || !std::isfinite(factor))
        throw std::invalid_argument("anneal factor must exceed 1");
    AnnealingSchedule s;
    s.beta.resize(iterations);
    s.beta[0] = iterations == 1 ? 1.0 : std::pow(factor, -(iterations - 1));
    for (int n = 1; n < iterations; ++n)
        s.beta[n] = std::min(1.0, factor * s.beta[n - 1]);
    s.beta[iterations - 1] = 1.0;
    return s;
}

Image laplacian(const Image& img) {
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const double up = r > 0 ? img.at(r - 1, c) : 0.0;
            const double down = r + 1 < img.rows ? img.at(r + 1, c) : 0.0;
            const double left = c > 0 ? img.at(r, c - 1) : 0.0;
            const double right = c + 1 < img.cols ? img.at(r, c + 1) : 0.0;
            out.at(r, c) = up + down + left + right - 4.0 * img.at(r, c);
        }
    }
    return out;
}

double prior_log_density(const Image& albedo, const PriorModel& prior) {
    const Image lap = laplacian(albedo);
    double smooth = 0.0, sparse = 0.0;
    for (double v : lap.data)
        smooth += std::fabs(v);
    for (double v : albedo.data)
        sparse += std::fabs(v);
    return -prior.smoothness_weight * smooth - prior.sparsity_weight * sparse;
}

Image prior_gradient(const Image& albedo, const PriorModel& prior) {
    Image sign_lap = laplacian(albedo);
    for (double& v : sign_lap.data)
        v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    Image grad = laplacian(sign_lap); // the stencil is self-adjoint under zero padding
    for (double& v : grad.data)
        v = -prior.smoothness_weight * v - prior.sparsity_weight;
    return grad;
}

PosteriorWeights e_step(const std::vector<TransientHistogram>& measurements,
                        const std::vector<SystemMatrix>& systems, const Image& albedo,
                        double sigma, double beta) {
    check_systems(systems);
    check_measurements(measurements, systems[0].bins);
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("sigma must be positive and finite");
    if (!(beta > 0.0) || beta > 1.0)
        throw std::invalid_argument("beta must lie in (0, 1]");
    if (albedo.rows != systems[0].rows || albedo.cols != systems[0].cols)
        throw std::invalid_argument("albedo shape does not match the systems");

    const std::int64_t L = static_cast<std::int64_t>(measurements.size());
    const std::int64_t K = static_cast<std::int64_t>(systems.size());
    const std::int64_t T = systems[0].bins;

    std::vector<double> renders;
    render_all(systems, albedo.data, renders);
    std::vector<double> rnorm(K);
    for (std::int64_t k = 0; k < K; ++k) {
        const double* r = renders.data() + k * T;
        double rr = 0.0;
        for (std::int64_t t = 0; t < T; ++t)
            rr += r[t] * r[t];
        rnorm[k] = rr;
    }

    PosteriorWeights weights;
    weights.measurements = L;
    weights.candidates = K;
    weights.w.assign(L * K, 0.0);
    const double coeff = beta / (2.0 * sigma * sigma);
    parallel_for(L, [&](std::int64_t ilo, std::int64_t ihi) {
        for (std::int64_t i = ilo; i < ihi; ++i) {
            const double* y = measurements[i].counts.data();
            double yn = 0.0;
            for (std::int64_t t = 0; t < T; ++t)
                yn += y[t] * y[t];
            double* row = weights.w.data() + i * K;
            double best = -std::numeric_limits<double>::infinity();
            for (std::int64_t k = 0; k < K; ++k) {
                const double* r = renders.data() + k * T;
                double yr = 0.0;
                for (std::int64_t t = 0; t < T; ++t)
                    yr += y[t] * r[t];
                const double res = std::max(0.0, yn - 2.0 * yr + rnorm[k]);
                row[k] = -coeff * res;
                best = std::max(best, row[k]);
            }
            double sum = 0.0;
            for (std::int64_t k = 0; k < K; ++k) {
                row[k] = std::exp(row[k] - best);
                sum += row[k];
            }
            for (std::int64_t k = 0; k < K; ++k)
                row[k] /= sum;
        }
    });
    return weights;
}

double q_value(const Image& albedo, const PosteriorWeights& weights,
               const std::vector<TransientHistogram>& measurements,
               const std::vector<SystemMatrix>& systems, double lambda, const PriorModel& prior) {
    check_systems(systems);
    check_measurements(measurements, systems[0].bins);
    if (weights.candidates != static_cast<std::int64_t>(systems.size()))
        throw std::invalid_argument("weights column count does not match the systems");
    const Aggregates agg = build_aggregates(measurements, weights);
    std::vector<double> renders;
    render_all(systems, albedo.data, renders);
    return data_q(agg, renders, systems) +
           lambda * agg.sum_w * prior_log_density(albedo, prior);
}

Image q_gradient(const Image& nu, const PosteriorWeights& weights,
                 const std::vector<TransientHistogram>& measurements,
                 const std::vector<SystemMatrix>& systems, double lambda, const PriorModel& prior) {
    check_systems(systems);
    check_measurements(measurements, systems[0].bins);
    if (weights.candidates != static_cast<std::int64_t>(systems.size()))
        throw std::invalid_argument("weights column count does not match the systems");
    const Aggregates agg = build_aggregates(measurements, weights);
    std::vector<double> rho(nu.data.size());
    for (std::size_t j = 0; j < rho.size(); ++j)
        rho[j] = nu.data[j] * nu.data[j];
    std::vector<double> renders, slack, grad;
    render_all(systems, rho, renders);
    full_gradient_nu(agg, renders, systems, nu, lambda * agg.sum_w, prior, slack, grad);
    Image out(nu.rows, nu.cols);
    out.data = std::move(grad);
    return out;
}

ReconState m_step(const ReconState& state, const PosteriorWeights& weights,
                  const std::vector<TransientHistogram>& measurements,
                  const std::vector<SystemMatrix>& systems, const EMConfig& config,
                  int inner_steps, const PriorModel& prior) {
    config.validate();
    check_systems(systems);
    check_measurements(measurements, systems[0].bins);
    if (inner_steps < 1)
        throw std::invalid_argument("m_step needs at least one inner step");
    if (state.nu.rows != systems[0].rows || state.nu.cols != systems[0].cols)
        throw std::invalid_argument("state shape does not match the systems");

    const Aggregates agg = build_aggregates(measurements, weights);
    ReconState next = state;
    ascend_nu(next.nu, agg, systems, config, config.lambda * agg.sum_w, prior, inner_steps);
    next.moment1 = Image(state.nu.rows, state.nu.cols);
    next.moment2 = Image(state.nu.rows, state.nu.cols);
    next.iteration = state.iteration + 1;
    return next;
}

EMResult em_reconstruct_systems(const std::vector<TransientHistogram>& measurements,
                                const std::vector<SystemMatrix>& systems,
                                const GridGeometry& recon_geom, const EMConfig& config,
                                const PriorModel& prior) {
    config.validate();
    check_systems(systems);
    check_measurements(measurements, systems[0].bins);
    const GridGeometry geom = geometry_for(systems, recon_geom);
    if (config.recon_rows > 0 && config.recon_rows != geom.rows)
        throw std::invalid_argument("config recon shape disagrees with the geometry");
    if (config.recon_cols > 0 && config.recon_cols != geom.cols)
        throw std::invalid_argument("config recon shape disagrees with the geometry");

    const AnnealingSchedule schedule = annealing_schedule(config.iterations, config.anneal_factor);
    ReconState state;
    state.nu = init_nu(geom.rows, geom.cols, config.seed);
    state.moment1 = Image(geom.rows, geom.cols);
    state.moment2 = Image(geom.rows, geom.cols);

    EMResult result;
    result.trace.reserve(config.iterations);
    for (int n = 0; n < config.iterations; ++n) {
        const double beta = schedule.beta[n];
        const PosteriorWeights weights =
            e_step(measurements, systems, state.albedo(), config.sigma, beta);
        state = m_step(state, weights, measurements, systems, config, n + 1, prior);

        const Image rho = state.albedo();
        const Aggregates agg = build_aggregates(measurements, weights);
        std::vector<double> renders;
        render_all(systems, rho.data, renders);
        EMIterationStats stats;
        stats.iteration = n;
        stats.beta = beta;
        stats.data_term = data_q(agg, renders, systems);
        stats.prior_term = config.lambda * agg.sum_w * prior_log_density(rho, prior);
        stats.q = stats.data_term + stats.prior_term;
        result.trace.push_back(stats);
    }

    result.weights = e_step(measurements, systems, state.albedo(), config.sigma, 1.0);
    result.nu = state.nu;
    result.albedo.values = state.albedo();
    result.albedo.pixel_pitch = geom.pixel_pitch;
    result.albedo.plane_offset = geom.plane_offset;
    return result;
}

EMResult em_reconstruct(const std::vector<TransientHistogram>& measurements,
                        const CandidateGrid& candidates, const GridGeometry& recon_geom,
                        const FalloffModel& falloff, const EMConfig& config,
                        const PriorModel& prior) {
    if (candidates.size() < 1)
        throw std::invalid_argument("candidate grid is empty");
    const AssemblyParams params = params_from(measurements);
    const std::vector<SystemMatrix> systems =
        assemble_all(candidates.poses, recon_geom, falloff, params);
    return em_reconstruct_systems(measurements, systems, recon_geom, config, prior);
}

GDResult gd_reconstruct_systems(const std::vector<TransientHistogram>& measurements,
                                const std::vector<SystemMatrix>& systems,
                                const GridGeometry& recon_geom, const EMConfig& config,
                                int iterations, const PriorModel& prior) {
    config.validate();
    check_systems(systems);
    check_measurements(measurements, systems[0].bins);
    if (systems.size() != measurements.size())
        throw std::invalid_argument("known poses and measurements disagree on length");
    if (iterations < 1)
        throw std::invalid_argument("need at least one iteration");
    const GridGeometry geom = geometry_for(systems, recon_geom);

    const Aggregates agg = identity_aggregates(measurements);
    Image nu = init_nu(geom.rows, geom.cols, config.seed);

    GDResult result;
    result.objective.reserve(iterations);
    MomentOptimizer opt(config.learning_rate, config.momentum_decay1, config.momentum_decay2,
                        nu.data.size());
    std::vector<double> rho(nu.data.size());
    std::vector<double> renders, slack, grad;
    Image rho_img(geom.rows, geom.cols);
    for (int s = 0; s < iterations; ++s) {
        for (std::size_t j = 0; j < rho.size(); ++j)
            rho[j] = nu.data[j] * nu.data[j];
        render_all(systems, rho, renders);
        full_gradient_nu(agg, renders, systems, nu, config.lambda, prior, slack, grad);
        opt.ascend(nu.data, grad);

        for (std::size_t j = 0; j < rho.size(); ++j)
            rho_img.data[j] = nu.data[j] * nu.data[j];
        render_all(systems, rho_img.data, renders);
        result.objective.push_back(data_q(agg, renders, systems) +
                                   config.lambda * prior_log_density(rho_img, prior));
    }

    result.nu = nu;
    result.albedo.values = rho_img;
    result.albedo.pixel_pitch = geom.pixel_pitch;
    result.albedo.plane_offset = geom.plane_offset;
    return result;
}

GDResult gd_reconstruct(const std::vector<TransientHistogram>& measurements,
                        const TrajectorySet& known_poses, const GridGeometry& recon_geom,
                        const FalloffModel& falloff, const EMConfig& config, int iterations,
                        const PriorModel& prior) {
    known_poses.validate();
    if (known_poses.length() != static_cast<std::int64_t>(measurements.size()))
        throw std::invalid_argument("known poses and measurements disagree on length");
    const AssemblyParams params = params_from(measurements);
    const std::vector<SystemMatrix> systems =
        assemble_all(known_poses.poses, recon_geom, falloff, params);
    return gd_reconstruct_systems(measurements, systems, recon_geom, config, iterations, prior);
}

TrajectorySet estimate_trajectory(const PosteriorWeights& weights, const CandidateGrid& candidates) {
    if (weights.candidates != candidates.size())
        throw std::invalid_argument("weights column count does not match the candidate grid");
    if (weights.measurements < 1)
        throw std::invalid_argument("weights are empty");
    TrajectorySet out;
    out.plane = candidates.plane;
    out.label = "estimated";
    out.poses.reserve(weights.measurements);
    for (std::int64_t i = 0; i < weights.measurements; ++i) {
        std::int64_t best = 0;
        double best_w = weights.at(i, 0);
        for (std::int64_t k = 1; k < weights.candidates; ++k) {
            if (weights.at(i, k) > best_w) {
                best_w = weights.at(i, k);
                best = k;
            }
        }
        out.poses.push_back(candidates.poses[best]);
    }
    return out;
}

} // namespace keyhole
