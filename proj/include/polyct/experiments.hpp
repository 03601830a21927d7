#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polyct/constraints.hpp"
#include "polyct/forward.hpp"
#include "polyct/geometry.hpp"
#include "polyct/io.hpp"
#include "polyct/model.hpp"
#include "polyct/solvers.hpp"

namespace polyct {

// One solver entry of an experiment. A nonempty step_grid (or rho_grid for
// ADMM) is tuned on the tuning setting; otherwise step_size / rho is used.
struct SolverSpec {
    std::string name;  // exact | mse_gd | polyak_sgm | admm
    StepRule rule = StepRule::fixed;
    double step_size = 0.0;
    std::vector<double> step_grid;
    double rho = 1.0;
    std::vector<double> rho_grid;
    int cg_iters = 10;
    int max_iters = 0;  // 0: use the experiment default

    std::string label() const { return name; }
};

// Shared description of a simulated CT problem.
struct ProblemSpec {
    std::string phantom = "pmma";  // pmma | contrast
    std::size_t grid_side = 25;
    std::size_t n_views = 50;
    std::size_t n_cells = 50;
    double intensity = 1e6;
    std::size_t bins = 50;
    std::size_t n_windows = 3;
    std::optional<WindowedSpectra> spectra;  // overrides the default windows
    double background_scale = 1.0;            // contrast phantom only
    double electronic_sigma = 0.0;
    bool poisson = true;
    // Constant start image. Zero would stall the gradient baselines, whose
    // h' is taken as 0 at a zero line integral.
    double init_value = 0.1;
    Json constraint;  // null: TV ball at the truth's TV intersected with nonneg
};

struct CtProblem {
    std::shared_ptr<const SystemMatrix> A;
    std::shared_ptr<const ForwardModel> model;
    Image truth;
    ConstraintSet X;
    MeasurementSet expected;
    MeasurementSet y;
    std::vector<Disc> rois;
    double init_value = 0.1;
};

// Builds A, the phantom and a noisy measurement set; noise uses seed.
CtProblem make_ct_problem(const ProblemSpec& spec, std::uint64_t seed,
                          std::shared_ptr<const SystemMatrix> A = nullptr);

// Resolves {"tau":"truth"} and a missing grid_side against the truth image.
ConstraintSet resolve_constraint(const Json& doc, const Image& truth);

struct GaussianProblem {
    std::shared_ptr<const SystemMatrix> A;
    std::shared_ptr<const ForwardModel> model;
    Vec x_star;
    MeasurementSet y;
    ConstraintSet X;
};

// d-dimensional x* of the given norm, n Gaussian rays, noiseless
// monochromatic data (W = 1, I = 1, mu = 1), X = ball(4 ||x*||; x*).
GaussianProblem make_gaussian_problem(std::size_t n, std::size_t d, double x_star_norm, std::uint64_t seed);

struct RunOutcome {
    SolveResult result;
    std::string status = "ok";  // ok | diverged | failed
    std::string message;
};

// Runs the named solver, converting divergence and stalls into a status.
RunOutcome run_solver(const SolverSpec& spec, const SolverConfig& base, const ForwardModel& model,
                      std::span<const double> y, const ConstraintSet& X, std::span<const double> x1,
                      const Vec* truth);

// EXACT step for the intensity sweep: the step tuned at 1e6 photons scaled
// by 1e6 / intensity.
double intensity_scaled_step(double reference_step, double intensity);

SolverConfig solver_config(const SolverSpec& spec, const SolverConfig& base);

struct ExperimentConfig {
    std::string scenario;
    std::vector<std::uint64_t> seeds;
    ProblemSpec problem;
    std::vector<SolverSpec> solvers;
    std::vector<std::size_t> views{5, 10, 25, 50};
    std::vector<double> intensities{1e3, 1e4, 1e5, 1e6};
    std::size_t tuning_views = 10;
    std::uint64_t tuning_seed = 0;
    int max_iters = 10000;
    double convergence_tol = 1e-5;
    int workers = 1;
    bool record_timing = false;
    bool write_images = true;
    // Gaussian sweep.
    std::size_t dim = 100;
    double x_star_norm = 3.0;
    std::vector<std::size_t> sample_multipliers{5, 10, 20, 40, 80};
    double gaussian_step = 0.25;
    double truth_tol = 1e-6;
    int gaussian_max_iters = 100000;
    // Theory report.
    std::size_t n_mc = 2000;
};

// Throws ConfigError naming the offending field.
ExperimentConfig experiment_config_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
ProblemSpec problem_spec_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
SolverSpec solver_spec_from_json(const Json& doc, const std::string& where);

struct CellResult {
    std::string key;
    std::string setting;  // views | intensity | n | roi
    double value = 0.0;
    std::string solver;
    std::uint64_t seed = 0;
    double rmse = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status = "ok";
    double wall_ms = 0.0;
    double step = 0.0;
    std::vector<double> roi_means;  // contrast recovery only
};

struct SweepReport {
    std::vector<CellResult> cells;
    // Scenario-level checks (e.g. monotone iteration counts), name -> passed.
    std::vector<std::pair<std::string, bool>> checks;
    Json extra;
};

// Runs the scenario and writes all report files under out_dir.
SweepReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Canonical runs.csv / summary.csv text (exposed for recomputation checks).
std::string runs_csv(const std::vector<CellResult>& cells);
std::string summary_csv(const std::vector<CellResult>& cells);
std::vector<CellResult> parse_runs_csv(const std::string& text);

// Theoretical quantities for a Gaussian problem and a CT problem.
struct TheoryReport {
    std::optional<double> gamma_star;
    std::string gamma_star_note;
    double omega_bar = 0.0;
    std::string omega_bar_note;
    double rho = 0.0;
    std::optional<double> kappa;
    std::string kappa_note;
    double nu_hat = 0.0;
    double L_hat = 0.0;
    double err_value = 0.0;
    double err_poisson_bound = 0.0;
    double x1_dist = 0.0;
    std::vector<std::pair<double, double>> envelope;  // samples (t, bound)
};

Json theory_report_to_json(const TheoryReport& r);
Json run_theory_report(const ExperimentConfig& cfg);

} // namespace polyct
