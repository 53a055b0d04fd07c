// Acceptance gate: ten numbered end-to-end checks, one pass/fail line each.
// Run directly or through ctest; exits with the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "keyhole/evaluation.hpp"
#include "keyhole/glyphs.hpp"
#include "keyhole/harness.hpp"
#include "keyhole/parallel.hpp"
#include "keyhole/reconstruction.hpp"
#include "keyhole/simulator.hpp"

using namespace keyhole;
namespace fs = std::filesystem;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

double dot_all(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

Image squared(const Image& nu) {
    Image rho = nu;
    for (double& v : rho.data)
        v = v * v;
    return rho;
}

// --- 1: adjoint identity ----------------------------------------------------

bool criterion_adjoint() {
    Timer timer;
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = 1 + static_cast<int>(rng.u01() * 16);
        const int cols = 1 + static_cast<int>(rng.u01() * 16);
        const std::int64_t bins = 8 + static_cast<std::int64_t>(rng.u01() * 57);
        const GridGeometry geom{rows, cols, 0.01 + 0.04 * rng.u01(), {}};
        AssemblyParams params;
        params.bins = bins;
        const RigidTransform pose{
            {0.1 * rng.normal(), 0.1 * rng.normal(), 0.01 + 0.05 * rng.u01()},
            rng.u01() * 6.28};
        const auto system =
            assemble_system(geom, pose, FalloffModel::preset(FalloffKind::retro), params);

        AlbedoGrid rho;
        rho.values = Image(rows, cols);
        rho.pixel_pitch = geom.pixel_pitch;
        for (double& v : rho.values.data)
            v = rng.u01();
        TransientHistogram y;
        y.counts.resize(bins);
        for (double& v : y.counts)
            v = rng.normal();

        const double lhs = dot_all(render(system, rho).counts, y.counts);
        const double rhs = dot_all(rho.values.data, adjoint(system, y).data);
        const double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-300});
        worst = std::max(worst, std::fabs(lhs - rhs) / scale);
    }
    const double secs = timer.seconds();
    const bool pass = worst <= 1e-9 && secs < 5.0;
    std::printf("criterion 1 %s: adjoint identity, 100 instances, worst relative gap %.3g "
                "(%.2f s)\n",
                pass ? "PASS" : "FAIL", worst, secs);
    return pass;
}

// --- 2: gradient oracle -----------------------------------------------------

struct GradScene {
    GridGeometry geom{6, 6, 0.02, {}};
    std::vector<SystemMatrix> systems; // unit-peak scaled
    std::vector<TransientHistogram> ys;

    explicit GradScene(std::uint64_t seed) {
        Rng rng(seed);
        const auto grid =
            make_candidate_grid(PlaneKind::constant_z, 1, 3, 0.1, 0.0, {0.0, 0.0, 1.25});
        AssemblyParams params;
        params.bins = 1024;
        std::vector<SystemMatrix> raw;
        for (const auto& pose : grid.poses)
            raw.push_back(assemble_system(geom, pose,
                                          FalloffModel::preset(FalloffKind::retro), params));
        AlbedoGrid truth;
        truth.values = Image(6, 6);
        truth.pixel_pitch = geom.pixel_pitch;
        for (double& v : truth.values.data)
            v = rng.u01();
        std::vector<TransientHistogram> raw_ys;
        for (size_t i = 0; i < raw.size(); ++i)
            raw_ys.push_back(render(raw[i], truth));
        const auto prep = prepare_systems(raw_ys, grid.poses, geom,
                                          FalloffModel::preset(FalloffKind::retro), {}, true);
        systems = prep.systems;
        ys = prep.measured;
    }
};

// Known-trajectory objective composed from public pieces; the analytic
// counterpart is q_gradient under one-hot weights with the prior weight
// divided by L (the surrogate counts the prior once per measurement).
double known_pose_objective(const Image& rho, const GradScene& scene, double lambda,
                            const PriorModel& prior) {
    AlbedoGrid grid;
    grid.values = rho;
    grid.pixel_pitch = scene.geom.pixel_pitch;
    double value = 0.0;
    for (size_t i = 0; i < scene.systems.size(); ++i) {
        const auto r = render(scene.systems[i], grid);
        for (size_t t = 0; t < r.counts.size(); ++t) {
            const double d = scene.ys[i].counts[t] - r.counts[t];
            value -= d * d;
        }
    }
    return value + lambda * prior_log_density(rho, prior);
}

bool criterion_gradients() {
    Timer timer;
    const PriorModel prior{0.5, 0.8};
    const double lambda = 0.02;
    const double h = 1e-4;
    double worst_q = 0.0, worst_known = 0.0;

    int tested = 0;
    for (std::uint64_t seed = 0; tested < 20 && seed < 200; ++seed) {
        GradScene scene(300 + seed);
        const std::int64_t L = static_cast<std::int64_t>(scene.ys.size());
        Rng rng(900 + seed);
        Image nu(6, 6);
        for (double& v : nu.data)
            v = 0.5 + rng.u01();

        // stay away from the L1 kinks of both prior terms
        const Image lap = laplacian(squared(nu));
        if (std::any_of(lap.data.begin(), lap.data.end(),
                        [](double v) { return std::fabs(v) < 5e-3; }))
            continue;
        ++tested;

        PosteriorWeights soft;
        soft.measurements = L;
        soft.candidates = L;
        soft.w.assign(L * L, 0.0);
        for (std::int64_t i = 0; i < L; ++i) {
            double row_sum = 0.0;
            for (std::int64_t k = 0; k < L; ++k) {
                soft.w[i * L + k] = 0.1 + rng.u01();
                row_sum += soft.w[i * L + k];
            }
            for (std::int64_t k = 0; k < L; ++k)
                soft.w[i * L + k] /= row_sum;
        }
        PosteriorWeights one_hot = soft;
        std::fill(one_hot.w.begin(), one_hot.w.end(), 0.0);
        for (std::int64_t i = 0; i < L; ++i)
            one_hot.w[i * L + i] = 1.0;

        const Image q_grad = q_gradient(nu, soft, scene.ys, scene.systems, lambda, prior);
        const Image known_grad =
            q_gradient(nu, one_hot, scene.ys, scene.systems, lambda / L, prior);

        for (size_t j = 0; j < nu.data.size(); ++j) {
            Image hi = nu, lo = nu;
            hi.data[j] += h;
            lo.data[j] -= h;
            const double fd_q = (q_value(squared(hi), soft, scene.ys, scene.systems, lambda,
                                         prior) -
                                 q_value(squared(lo), soft, scene.ys, scene.systems, lambda,
                                         prior)) /
                                (2 * h);
            const double fd_known = (known_pose_objective(squared(hi), scene, lambda, prior) -
                                     known_pose_objective(squared(lo), scene, lambda, prior)) /
                                    (2 * h);
            worst_q = std::max(worst_q, std::fabs(q_grad.data[j] - fd_q) /
                                            std::max(1.0, std::fabs(fd_q)));
            worst_known = std::max(worst_known, std::fabs(known_grad.data[j] - fd_known) /
                                                    std::max(1.0, std::fabs(fd_known)));
        }
    }
    const double secs = timer.seconds();
    const bool pass = tested == 20 && worst_q <= 1e-4 && worst_known <= 1e-4 && secs < 30.0;
    std::printf("criterion 2 %s: gradient oracle on %d instances, max relative error "
                "surrogate %.3g, known-pose %.3g (%.2f s)\n",
                pass ? "PASS" : "FAIL", tested, worst_q, worst_known, secs);
    return pass;
}

// --- 3: shift equivalence ---------------------------------------------------

bool criterion_shift_equivalence() {
    Timer timer;
    const double pitch = 0.0078125; // 2^-7, exactly representable
    AlbedoGrid object;
    object.values = Image(8, 8);
    object.pixel_pitch = pitch;
    Rng rng(404);
    for (double& v : object.values.data)
        v = rng.u01() < 0.4 ? 1.0 : 0.0;
    object.values.data[9] = 1.0;

    TrajectorySpec spec;
    spec.plane = PlaneKind::constant_z;
    spec.waypoints = {{-0.25, -0.25, 1.25}, {0.25, -0.25, 1.25}, {0.25, 0.25, 1.25}};
    spec.samples_per_segment = 16;

    AssemblyParams params;
    params.bins = 1024;
    const auto falloff = FalloffModel::preset(FalloffKind::retro);
    const auto base =
        simulate_sequence(object, make_trajectory(spec), falloff, params, NoiseModel::off());

    bool all_equal = true;
    for (int trial = 0; trial < 10; ++trial) {
        Vec3 d{0.0, 0.0, 0.0};
        while (d.x == 0.0 && d.y == 0.0 && d.z == 0.0)
            d = Vec3{static_cast<double>(static_cast<int>(rng.u01() * 33) - 16) * pitch,
                     static_cast<double>(static_cast<int>(rng.u01() * 33) - 16) * pitch,
                     static_cast<double>(static_cast<int>(rng.u01() * 33) - 16) * pitch};

        AlbedoGrid moved = object;
        moved.plane_offset = object.plane_offset + d;
        TrajectorySpec back = spec;
        for (Vec3& w : back.waypoints)
            w = w - d;
        const auto twin =
            simulate_sequence(moved, make_trajectory(back), falloff, params, NoiseModel::off());

        for (size_t i = 0; i < base.clean.size(); ++i)
            if (twin.clean[i].counts != base.clean[i].counts)
                all_equal = false;
    }
    const double secs = timer.seconds();
    const bool pass = all_equal && secs < 10.0;
    std::printf("criterion 3 %s: object +d / trajectory -d sequences bin-for-bin equal for 10 "
                "lattice shifts (%.2f s)\n",
                pass ? "PASS" : "FAIL", secs);
    return pass;
}

// --- 4: posterior contract --------------------------------------------------

bool criterion_posterior() {
    Timer timer;
    GradScene scene(777);
    Rng rng(778);
    Image rho(6, 6);
    for (double& v : rho.data)
        v = rng.u01();

    const auto w = e_step(scene.ys, scene.systems, rho, 0.05, 1.0);
    double worst_row = 0.0;
    for (std::int64_t i = 0; i < w.measurements; ++i) {
        double row = 0.0;
        for (std::int64_t k = 0; k < w.candidates; ++k)
            row += w.at(i, k);
        worst_row = std::max(worst_row, std::fabs(row - 1.0));
    }

    const auto flat = e_step(scene.ys, scene.systems, rho, 0.05, 1e-8);
    double worst_uniform = 0.0;
    const double uniform = 1.0 / static_cast<double>(flat.candidates);
    for (double v : flat.w)
        worst_uniform = std::max(worst_uniform, std::fabs(v - uniform));

    const auto schedule = annealing_schedule(30, 1.3);
    bool schedule_ok = schedule.beta.size() == 30 &&
                       schedule.beta[0] == 0.0004961840311264619 && // 1.3^-29
                       schedule.beta[29] == 1.0;
    for (int n = 1; n < 30 && schedule_ok; ++n)
        schedule_ok = schedule.beta[n] == std::min(1.0, 1.3 * schedule.beta[n - 1]);

    const double secs = timer.seconds();
    const bool pass = worst_row <= 1e-9 && worst_uniform <= 1e-6 && schedule_ok;
    std::printf("criterion 4 %s: posterior rows sum to 1 (worst %.2g), beta->0 uniform "
                "(worst %.2g), schedule geometric at 1.3 ending at 1 (%.2f s)\n",
                pass ? "PASS" : "FAIL", worst_row, worst_uniform, secs);
    return pass;
}

// --- 5: surrogate ascent ----------------------------------------------------

bool criterion_ascent() {
    Timer timer;
    bool all_ok = true;
    double worst_drop = 0.0;
    for (std::uint64_t instance = 0; instance < 5; ++instance) {
        const GridGeometry geom{6, 6, 0.02, {}};
        const auto falloff = FalloffModel::preset(FalloffKind::retro);
        const auto grid =
            make_candidate_grid(PlaneKind::constant_z, 2, 2, 0.08, 0.08, {0.0, 0.0, 1.25});
        AssemblyParams params;
        params.bins = 1024;

        AlbedoGrid truth;
        truth.values = Image(6, 6);
        truth.pixel_pitch = geom.pixel_pitch;
        Rng rng(500 + instance);
        for (double& v : truth.values.data)
            v = rng.u01() < 0.5 ? 1.0 : 0.0;
        truth.values.data[7 + instance] = 1.0;

        std::vector<TransientHistogram> raw;
        for (int i = 0; i < 3; ++i) {
            const auto system = assemble_system(geom, grid.poses[i % grid.size()], falloff,
                                                params);
            raw.push_back(apply_poisson_snr(render(system, truth), 15.0, rng));
        }
        const auto prep = prepare_systems(raw, grid.poses, geom, falloff, {}, true);

        EMConfig config;
        config.sigma = 0.05;
        config.lambda = 3e-4;
        config.learning_rate = 0.02;
        config.seed = instance;

        ReconState state;
        state.nu = init_nu(6, 6, config.seed);
        state.moment1 = Image(6, 6);
        state.moment2 = Image(6, 6);
        const PriorModel prior;
        for (int round = 0; round < 6; ++round) {
            const auto w =
                e_step(prep.measured, prep.systems, state.albedo(), config.sigma, 1.0);
            const double before =
                q_value(state.albedo(), w, prep.measured, prep.systems, config.lambda, prior);
            state = m_step(state, w, prep.measured, prep.systems, config, 200, prior);
            const double after =
                q_value(state.albedo(), w, prep.measured, prep.systems, config.lambda, prior);
            const double slack = 1e-6 * std::fabs(before);
            worst_drop = std::max(worst_drop, before - after);
            if (after < before - slack)
                all_ok = false;
        }
    }
    const double secs = timer.seconds();
    std::printf("criterion 5 %s: 200-step maximization never lowers the surrogate at beta=1 "
                "on 5 instances (worst drop %.3g) (%.2f s)\n",
                all_ok ? "PASS" : "FAIL", worst_drop, secs);
    return all_ok;
}

// --- 6: small-instance pose recovery ----------------------------------------

bool criterion_small_recovery() {
    Timer timer;
    // asymmetric 8x8 object: an L with a dot, nothing maps onto itself under
    // flips, quarter turns, or the candidate translations
    Image gray(8, 8);
    for (int r = 1; r < 7; ++r)
        gray.at(r, 2) = 1.0;
    for (int c = 2; c < 6; ++c)
        gray.at(6, c) = 1.0;
    gray.at(2, 4) = 1.0;
    const AlbedoGrid truth = rasterize_object(gray, 0.25);

    const auto falloff = FalloffModel::preset(FalloffKind::retro);
    const auto candidates =
        make_candidate_grid(PlaneKind::constant_z, 3, 3, 0.25, 0.25, {0.0, 0.0, 1.25});
    AssemblyParams params;
    params.bins = 1024;

    const std::vector<int> true_assignment = {0, 4, 8, 2, 6};
    TrajectorySet trajectory;
    trajectory.plane = PlaneKind::constant_z;
    trajectory.label = "lattice";
    for (int k : true_assignment)
        trajectory.poses.push_back(candidates.poses[k]);

    const auto seq =
        simulate_sequence(truth, trajectory, falloff, params, NoiseModel::off());

    // instance oracle: with the true albedo fixed, the joint residual over
    // assignments factorizes per measurement, so exhaustive search reduces to
    // per-row argmin; require a strict unique winner everywhere
    std::vector<SystemMatrix> cand_systems;
    for (const auto& pose : candidates.poses)
        cand_systems.push_back(assemble_system(geometry_of(truth), pose, falloff, params));
    bool unambiguous = true;
    double worst_margin = 1e300;
    for (size_t i = 0; i < seq.clean.size(); ++i) {
        double best = 1e300, second = 1e300;
        int best_k = -1;
        for (int k = 0; k < candidates.size(); ++k) {
            const auto r = render(cand_systems[k], truth);
            double res = 0.0;
            for (size_t t = 0; t < r.counts.size(); ++t) {
                const double d = seq.clean[i].counts[t] - r.counts[t];
                res += d * d;
            }
            if (res < best) {
                second = best;
                best = res;
                best_k = k;
            } else {
                second = std::min(second, res);
            }
        }
        if (best_k != true_assignment[i])
            unambiguous = false;
        worst_margin = std::min(worst_margin, second - best);
    }
    if (worst_margin <= 0.0)
        unambiguous = false;

    // EM against the full candidate set
    const auto prep = prepare_systems(seq.measured, candidates.poses, geometry_of(truth),
                                      falloff, {}, true);
    EMConfig config;
    config.iterations = 30;
    config.sigma = 0.05;
    config.lambda = 3e-4;
    config.recon_rows = 8;
    config.recon_cols = 8;
    const auto result =
        em_reconstruct_systems(prep.measured, prep.systems, geometry_of(truth), config);

    bool poses_recovered = true;
    for (std::int64_t i = 0; i < result.weights.measurements; ++i) {
        std::int64_t argmax = 0;
        for (std::int64_t k = 1; k < result.weights.candidates; ++k)
            if (result.weights.at(i, k) > result.weights.at(i, argmax))
                argmax = k;
        if (argmax != true_assignment[i])
            poses_recovered = false;
    }

    const auto d = disambiguated_ssim(truth.values, result.albedo.values);
    const double secs = timer.seconds();
    const bool pass = unambiguous && poses_recovered && d.score >= 0.9 && secs < 120.0;
    std::printf("criterion 6 %s: unique-instance oracle %s, EM recovered all 5 poses %s, "
                "disambiguated ssim %.3f (%.2f s)\n",
                pass ? "PASS" : "FAIL", unambiguous ? "ok" : "AMBIGUOUS",
                poses_recovered ? "yes" : "no", d.score, secs);
    return pass;
}

// --- 7: desk-scale trend ----------------------------------------------------

bool criterion_desk_trend() {
    Timer timer;
    const auto falloff = FalloffModel::preset(FalloffKind::retro);
    const auto trajectory = trajectory_preset(193);
    const auto candidates =
        make_candidate_grid(PlaneKind::constant_z, 17, 17, 1.0, 1.0, {0.0, 0.0, 1.25});
    const GridGeometry recon_geom{64, 64, 0.0078125, {}};
    AssemblyParams params;
    params.bins = 1024;

    double gd_sum = 0.0, em_sum = 0.0;
    for (int g = 0; g < kGlyphCount; ++g) {
        const AlbedoGrid truth = rasterize_object(test_glyph(g), 0.5);
        const auto noise = NoiseModel::poisson(15.0, mix_seed(777, g));
        const auto seq = simulate_sequence(truth, trajectory, falloff, params, noise);

        EMConfig config;
        config.iterations = 30;
        config.sigma = 0.05;
        config.lambda = 3e-4;
        config.seed = 0;

        const auto gd_prep =
            prepare_systems(seq.measured, trajectory.poses, recon_geom, falloff, {}, true);
        const auto gd = gd_reconstruct_systems(gd_prep.measured, gd_prep.systems, recon_geom,
                                               config, 200);
        const double gd_score = disambiguated_ssim(truth.values, gd.albedo.values).score;
        gd_sum += gd_score;

        const auto em_prep =
            prepare_systems(seq.measured, candidates.poses, recon_geom, falloff, {}, true);
        const auto em =
            em_reconstruct_systems(em_prep.measured, em_prep.systems, recon_geom, config);
        const double em_score = disambiguated_ssim(truth.values, em.albedo.values).score;
        em_sum += em_score;
        std::printf("  glyph %d: gd %.3f, em %.3f\n", g, gd_score, em_score);
    }
    const double gd_mean = gd_sum / kGlyphCount;
    const double em_mean = em_sum / kGlyphCount;
    const double secs = timer.seconds();
    const bool pass =
        gd_mean >= 0.55 && em_mean >= 0.45 && gd_mean >= em_mean - 0.05 && secs < 1800.0;
    std::printf("criterion 7 %s: 193-pose glyph study at SNR 15, mean disambiguated ssim "
                "gd %.3f (>= 0.55), em %.3f (>= 0.45), gd >= em - 0.05 (%.0f s)\n",
                pass ? "PASS" : "FAIL", gd_mean, em_mean, secs);
    return pass;
}

// --- 8: similarity metric properties ----------------------------------------

bool criterion_metric() {
    Timer timer;
    Rng rng(808);

    bool self_one = true;
    for (int t = 0; t < 20; ++t) {
        Image x(8, 8);
        for (double& v : x.data)
            v = rng.u01();
        if (ssim(x, x) != 1.0)
            self_one = false;
    }
    for (int g = 0; g < kGlyphCount; ++g)
        if (ssim(test_glyph(g), test_glyph(g)) != 1.0)
            self_one = false;

    bool never_below_plain = true;
    for (int t = 0; t < 50; ++t) {
        Image a(8, 8), b(8, 8);
        for (double& v : a.data)
            v = rng.u01();
        for (double& v : b.data)
            v = rng.u01();
        const double plain = ssim(max_normalize(a), max_normalize(b));
        if (disambiguated_ssim(a, b).score < plain - 1e-12)
            never_below_plain = false;
    }

    // self-consistency under the group, checked on content every group
    // element preserves: a compact blob away from the border; clipping
    // translations delete signal and are not equivalences of any image
    Image blob(8, 8);
    for (int r = 1; r <= 6; ++r)
        for (int c = 1; c <= 6; ++c)
            blob.at(r, c) =
                std::exp(-((r - 3.5) * (r - 3.5) + (c - 3.5) * (c - 3.5)) / (2.0 * 1.3 * 1.3));

    std::vector<RTFTransform> planted;
    for (int rot = 0; rot < 360; rot += 5)
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int flip = 0; flip < 4; ++flip) {
                    RTFTransform t;
                    t.rotation = rot;
                    t.dx = dx;
                    t.dy = dy;
                    t.flip_horizontal = flip & 1;
                    t.flip_vertical = flip & 2;
                    planted.push_back(t);
                }

    std::mutex merge;
    double group_worst = 1.0;
    parallel_for(static_cast<std::int64_t>(planted.size()),
                 [&](std::int64_t lo, std::int64_t hi) {
                     double local = 1.0;
                     for (std::int64_t j = lo; j < hi; ++j) {
                         const Image warped = transform_image(blob, planted[j]);
                         local = std::min(local, disambiguated_ssim(blob, warped).score);
                     }
                     std::lock_guard<std::mutex> guard(merge);
                     group_worst = std::min(group_worst, local);
                 });

    const double secs = timer.seconds();
    const bool pass = self_one && never_below_plain && group_worst >= 0.99;
    std::printf("criterion 8 %s: ssim(x,x)=1 exactly, search >= plain on 50 pairs, group "
                "self-consistency over %zu planted transforms (worst %.4f) (%.1f s)\n",
                pass ? "PASS" : "FAIL", planted.size(), group_worst, secs);
    return pass;
}

// --- 9: noise calibration ---------------------------------------------------

bool criterion_noise() {
    Timer timer;
    const AlbedoGrid object = rasterize_object(test_glyph(0), 0.5);
    AssemblyParams params;
    params.bins = 1024;
    const auto system = assemble_system(geometry_of(object), {{0.0, 0.0, 1.25}, 0.0},
                                        FalloffModel::preset(FalloffKind::retro), params);
    const auto clean = render(system, object);
    std::int64_t peak_bin = 0;
    for (std::int64_t t = 1; t < clean.bins(); ++t)
        if (clean.counts[t] > clean.counts[peak_bin])
            peak_bin = t;

    bool pass = true;
    std::string detail;
    for (double target : {5.0, 15.0, 50.0}) {
        const int draws = 10000;
        double sum = 0.0, sum2 = 0.0;
        for (int t = 0; t < draws; ++t) {
            Rng rng(mix_seed(909, static_cast<std::uint64_t>(target * 1000) + t));
            const auto draw = apply_poisson_snr(clean.counts, target, rng);
            const double raw = draw.counts[peak_bin] * draw.scale;
            sum += raw;
            sum2 += raw * raw;
        }
        const double mean = sum / draws;
        const double var = sum2 / draws - mean * mean;
        const double snr = mean / std::sqrt(var);
        if (std::fabs(snr - target) > 0.1 * target)
            pass = false;
        char buf[48];
        std::snprintf(buf, sizeof(buf), " %.0f->%.2f", target, snr);
        detail += buf;
    }
    const double secs = timer.seconds();
    std::printf("criterion 9 %s: empirical peak-bin snr within 10%% of targets%s (%.1f s)\n",
                pass ? "PASS" : "FAIL", detail.c_str(), secs);
    return pass;
}

// --- 10: deterministic sweeps -----------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

bool criterion_determinism() {
    Timer timer;
    const fs::path root =
        fs::temp_directory_path() / ("keyhole_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);

    Image obj_a(8, 8), obj_b(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            obj_a.at(r, c) = (r + c) % 3 == 0 && c < 6 ? 1.0 : 0.0;
            obj_b.at(r, c) = (r * c) % 5 < 2 && r > 1 ? 1.0 : 0.0;
        }
    write_pgm(root / "obj_a.pgm", obj_a);
    write_pgm(root / "obj_b.pgm", obj_b);

    ExperimentSpec spec;
    spec.objects = {(root / "obj_a.pgm").string(), (root / "obj_b.pgm").string()};
    TrajectorySpec path;
    path.waypoints = {{-0.05, 0.0, 1.25}, {0.05, 0.0, 1.25}};
    path.samples_per_segment = 4;
    path.label = "line";
    spec.trajectories = {make_trajectory(path)};
    spec.snrs = {15.0};
    spec.methods = {"gd", "em"};
    spec.seed = 17;
    spec.sim.physical_size = 0.25;
    spec.sim.assembly.bins = 1024;
    spec.recon.em.iterations = 4;
    spec.recon.em.sigma = 0.05;
    spec.recon.em.lambda = 3e-4;
    spec.recon.gd_iterations = 40;
    spec.recon.recon_geom = GridGeometry{8, 8, 0.03125, {}};
    spec.recon.candidates =
        make_candidate_grid(PlaneKind::constant_z, 3, 3, 0.08, 0.08, {0.0, 0.0, 1.25});
    spec.eval.search.include_rotations = false;
    spec.eval.search.translation_radius = 2;

    spec.output_dir = (root / "run1").string();
    set_thread_count(1);
    run_experiment(spec);
    spec.output_dir = (root / "run2").string();
    set_thread_count(8);
    run_experiment(spec);
    set_thread_count(0);

    const std::string s1 = slurp(root / "run1" / "summary.csv");
    const std::string s2 = slurp(root / "run2" / "summary.csv");
    const double secs = timer.seconds();
    const bool pass = !s1.empty() && s1 == s2;
    std::printf("criterion 10 %s: sweep summaries byte-identical across thread counts "
                "(%zu bytes) (%.1f s)\n",
                pass ? "PASS" : "FAIL", s1.size(), secs);
    fs::remove_all(root);
    return pass;
}

} // namespace

int main() {
    int failed = 0;
    failed += !criterion_adjoint();
    failed += !criterion_gradients();
    failed += !criterion_shift_equivalence();
    failed += !criterion_posterior();
    failed += !criterion_ascent();
    failed += !criterion_small_recovery();
    failed += !criterion_desk_trend();
    failed += !criterion_metric();
    failed += !criterion_noise();
    failed += !criterion_determinism();
    std::printf("%d of 10 criteria passed\n", 10 - failed);
    return failed;
}
