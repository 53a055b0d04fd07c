#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "keyhole/forward_model.hpp"
#include "keyhole/simulator.hpp"
#include "keyhole/tensor.hpp"

namespace keyhole {

struct EMConfig {
    int iterations = 30;
    double sigma = 200.0;          // E-step noise scale; not part of the surrogate objective
    double lambda = 2000.0;        // prior weight
    double learning_rate = 0.1;
    double momentum_decay1 = 0.5;  // first-moment decay
    double momentum_decay2 = 0.999;
    double anneal_factor = 1.3;
    std::uint64_t seed = 0;        // nu initialization
    int recon_rows = 0;            // 0 means take the shape from the grid geometry
    int recon_cols = 0;

    void validate() const;
};

// Albedo is parameterized as rho = nu^2 elementwise, so it stays nonnegative
// without constraints. Optimizer moments live here so a caller can inspect
// them, but each m_step starts from fresh zeros.
struct ReconState {
    Image nu;
    Image moment1;
    Image moment2;
    int iteration = 0;

    Image albedo() const;
};

// nu drawn i.i.d. N(0, 1) * scale from the seed, row-major order.
Image init_nu(int rows, int cols, std::uint64_t seed, double scale = 0.1);

// Row-stochastic posterior over candidate poses: w[i*K + k] is the weight of
// candidate k for measurement i.
struct PosteriorWeights {
    std::int64_t measurements = 0; // L
    std::int64_t candidates = 0;   // K
    std::vector<double> w;

    double at(std::int64_t i, std::int64_t k) const { return w[i * candidates + k]; }
};

struct AnnealingSchedule {
    std::vector<double> beta;
};

// beta[0] = factor^-(n-1), each next multiplied by factor and capped at 1;
// the final entry is exactly 1.
AnnealingSchedule annealing_schedule(int iterations, double factor);

// log p(rho) = -smoothness * |L rho|_1 - sparsity * |rho|_1 with L the
// 5-point Laplacian stencil under zero padding.
struct PriorModel {
    double smoothness_weight = 1.0;
    double sparsity_weight = 1.0;
};

Image laplacian(const Image& img);
double prior_log_density(const Image& albedo, const PriorModel& prior = {});
// d log p / d rho = -smoothness * L sign(L rho) - sparsity, with sign(0) = 0.
// The sparsity term uses d|rho|/drho = 1, valid since rho >= 0.
Image prior_gradient(const Image& albedo, const PriorModel& prior = {});

// Posterior over candidates: row i gets softmax_k of -beta |y_i - A_k rho|^2
// / (2 sigma^2), normalized per row with max subtraction.
PosteriorWeights e_step(const std::vector<TransientHistogram>& measurements,
                        const std::vector<SystemMatrix>& systems, const Image& albedo,
                        double sigma, double beta);

// Surrogate objective: sum_ik w_ik (-|y_i - A_k rho|^2 + lambda log p(rho)).
// The prior enters once per (i, k) term, so its effective weight is
// lambda * sum_ik w_ik.
double q_value(const Image& albedo, const PosteriorWeights& weights,
               const std::vector<TransientHistogram>& measurements,
               const std::vector<SystemMatrix>& systems, double lambda,
               const PriorModel& prior = {});

// dQ/dnu = (sum_ik w_ik 2 A_k^T (y_i - A_k rho) + lambda sum_ik w_ik
// dlogp/drho) * 2 nu, matching central finite differences of q_value.
Image q_gradient(const Image& nu, const PosteriorWeights& weights,
                 const std::vector<TransientHistogram>& measurements,
                 const std::vector<SystemMatrix>& systems, double lambda,
                 const PriorModel& prior = {});

// inner_steps adaptive-moment ascent updates on nu, moments reset at entry.
ReconState m_step(const ReconState& state, const PosteriorWeights& weights,
                  const std::vector<TransientHistogram>& measurements,
                  const std::vector<SystemMatrix>& systems, const EMConfig& config,
                  int inner_steps, const PriorModel& prior = {});

struct EMIterationStats {
    int iteration = 0;
    double beta = 0.0;
    double q = 0.0;
    double data_term = 0.0;  // -sum_ik w_ik |y_i - A_k rho|^2
    double prior_term = 0.0; // lambda sum_ik w_ik log p(rho)
};

struct EMResult {
    AlbedoGrid albedo;
    Image nu;
    PosteriorWeights weights; // recomputed at beta = 1 with the final albedo
    std::vector<EMIterationStats> trace;
};

// Alternates e_step (annealed beta) and m_step (n+1 inner steps at EM
// iteration n) for config.iterations rounds.
EMResult em_reconstruct(const std::vector<TransientHistogram>& measurements,
                        const CandidateGrid& candidates, const GridGeometry& recon_geom,
                        const FalloffModel& falloff, const EMConfig& config,
                        const PriorModel& prior = {});

// Same loop against caller-assembled per-candidate systems.
EMResult em_reconstruct_systems(const std::vector<TransientHistogram>& measurements,
                                const std::vector<SystemMatrix>& systems,
                                const GridGeometry& recon_geom, const EMConfig& config,
                                const PriorModel& prior = {});

struct GDResult {
    AlbedoGrid albedo;
    Image nu;
    std::vector<double> objective; // after each iteration
};

// Known-trajectory baseline: ascend sum_i -|y_i - A_i rho|^2 + lambda
// log p(rho) over nu. The prior enters once here, not once per measurement.
GDResult gd_reconstruct(const std::vector<TransientHistogram>& measurements,
                        const TrajectorySet& known_poses, const GridGeometry& recon_geom,
                        const FalloffModel& falloff, const EMConfig& config,
                        int iterations = 200, const PriorModel& prior = {});

GDResult gd_reconstruct_systems(const std::vector<TransientHistogram>& measurements,
                                const std::vector<SystemMatrix>& systems,
                                const GridGeometry& recon_geom, const EMConfig& config,
                                int iterations = 200, const PriorModel& prior = {});

// Per-measurement argmax over candidates; ties go to the lowest index.
TrajectorySet estimate_trajectory(const PosteriorWeights& weights, const CandidateGrid& candidates);

} // namespace keyhole
