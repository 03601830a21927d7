#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polyct/constraints.hpp"
#include "polyct/forward.hpp"
#include "polyct/model.hpp"
#include "polyct/system_matrix.hpp"

namespace polyct {

enum class StepRule { fixed, general, positive_meas, gaussian };

StepRule parse_step_rule(const std::string& name);
std::string to_string(StepRule rule);

struct SolverConfig {
    StepRule rule = StepRule::fixed;
    double step_size = 0.0;       // used when rule == fixed
    int max_iters = 10000;
    double convergence_tol = 1e-5;
    bool averaging = true;
    std::uint64_t seed = 0;
    // Stop once ||x_t - x*|| <= truth_tol (when truth is given and truth_tol > 0).
    double truth_tol = 0.0;
    // Wall-clock column; off keeps traces byte-identical across reruns.
    bool record_timing = false;
    // ADMM only.
    double admm_rho = 1.0;
    int admm_cg_iters = 10;
    double dykstra_tol = 1e-4;

    void validate() const;
};

struct TraceRecord {
    int iter = 0;
    double dist_to_truth = 0.0;  // NaN without truth
    double avg_movement = 0.0;
    double loss = 0.0;
    double wall_ms = 0.0;
};

struct SolverTrace {
    std::vector<TraceRecord> records;
    int iterations = 0;
    bool converged = false;
    double final_rmse = 0.0;     // NaN without truth
    std::vector<double> primal_residuals;  // ADMM only
};

struct SolveResult {
    Vec x;
    SolverTrace trace;
};

// Arithmetic mean of history[ceil(t/2) - 1 .. t - 1] where t = history.size().
Vec averaged_iterate(std::span<const Vec> history);

Vec operator_F(const SystemMatrix& A, const WindowedSpectra& spectra, const MeasurementSet& y,
               std::span<const double> x);

double step_size_rule(StepRule rule, const ForwardModel& model);
double resolve_step(const SolverConfig& cfg, const ForwardModel& model);

// (1/n) sum_m (I_m h_m - y_m)^2 and its gradient.
double l2_loss(const ForwardModel& model, std::span<const double> y, std::span<const double> x);
Vec l2_gradient(const ForwardModel& model, std::span<const double> y, std::span<const double> x);
// (1/n) sum_m |I_m h_m - y_m| and an a.e. subgradient (sign(0) = 0).
double l1_loss(const ForwardModel& model, std::span<const double> y, std::span<const double> x);
Vec l1_subgradient(const ForwardModel& model, std::span<const double> y, std::span<const double> x);
// (1/n) sum_m [lambda_m - y_m log lambda_m] with raw (no ReLU) exponentials.
double poisson_nll(const ForwardModel& model, std::span<const double> y, std::span<const double> x);

double rmse(std::span<const double> x, std::span<const double> truth);

SolveResult exact_solve(const ForwardModel& model, std::span<const double> y, const ConstraintSet& X,
                        const SolverConfig& cfg, std::span<const double> x1,
                        const Vec* truth = nullptr);

SolveResult mse_gd_solve(const ForwardModel& model, std::span<const double> y, const ConstraintSet& X,
                         const SolverConfig& cfg, std::span<const double> x1,
                         const Vec* truth = nullptr);

// (loss - oracle) / ||g||^2 when positive, 0 when equal, fallback c / t below.
double polyak_step(double loss, double oracle_loss, double grad_norm_sq, double fallback_c, int t);

SolveResult polyak_sgm_solve(const ForwardModel& model, std::span<const double> y,
                             const ConstraintSet& X, const SolverConfig& cfg,
                             std::span<const double> x1, double oracle_loss,
                             const Vec* truth = nullptr);

// One ray of the ADMM z-update: argmin_z sum_w [lambda_w(z) - y_w log lambda_w(z)]
// + (rho/2)(z - v)^2 with lambda_w(z) = I_w sum_j s_j exp(-mu_j z).
double admm_z_update(std::span<const Spectrum* const> spectra, std::span<const double> y, double v,
                     double rho);
// Objective value of the same 1D problem.
double admm_z_objective(std::span<const Spectrum* const> spectra, std::span<const double> y,
                        double v, double rho, double z);

SolveResult admm_poisson_solve(const ForwardModel& model, std::span<const double> y,
                               const ConstraintSet& X, const SolverConfig& cfg,
                               std::span<const double> x1, const Vec* truth = nullptr);

} // namespace polyct
