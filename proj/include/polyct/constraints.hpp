#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polyct/system_matrix.hpp"

namespace polyct {

// Feasible set X. Intersections hold two non-intersection members, plus an
// optional l2 ball applied through a second Dykstra pass.
struct ConstraintSet {
    enum class Kind { nonneg, box, tv_ball, l2_ball, intersection };

    Kind kind = Kind::nonneg;
    double tau = 0.0;            // tv_ball
    std::size_t grid_side = 0;   // tv_ball
    double radius = 0.0;         // l2_ball
    Vec center;                  // l2_ball
    double lower = 0.0;          // box
    double upper = 1.0;          // box
    std::vector<ConstraintSet> members;  // intersection

    static ConstraintSet nonneg();
    static ConstraintSet box(double lower, double upper);
    static ConstraintSet tv_ball(double tau, std::size_t grid_side);
    static ConstraintSet l2_ball(double radius, Vec center);
    static ConstraintSet intersection(ConstraintSet first, ConstraintSet second);
    // Adds the optional ball member to an intersection.
    ConstraintSet with_ball(double radius, Vec center) const;

    // Throws std::invalid_argument when parameters are inconsistent with dimension d.
    void validate(std::size_t d) const;
    std::string type_name() const;
    bool contains(std::span<const double> x, double tol) const;
};

// Anisotropic TV of a square image: sum of absolute forward differences.
double tv_norm(std::span<const double> x);

struct ProxOptions {
    double tol = 1e-6;
    int max_iters = 5000;
    // Also constrain x >= 0; the dual step then uses the clipped primal.
    bool nonneg = false;
};

// argmin_x ||x - z||^2 + lambda TV(x) via accelerated projected gradient on
// the dual box problem. dual, when given, warm-starts and receives the final
// dual variable (two entries per pixel: horizontal then vertical edge).
Vec prox_tv(std::span<const double> z, double lambda, const ProxOptions& opt = {},
            Vec* dual = nullptr);

// Warm-start state carried between TV-ball projections of similar inputs.
struct TvBallCache {
    double lambda = 0.0;
    Vec dual;
};

Vec project_tv_ball(std::span<const double> z, double tau, TvBallCache* cache = nullptr);
// Projection onto {TV(x) <= tau, x >= 0} by the same multiplier search on the
// nonnegative prox. Agrees with Dykstra on the pair without the inner loop.
Vec project_tv_ball_nonneg(std::span<const double> z, double tau, TvBallCache* cache = nullptr);
Vec project_nonneg(std::span<const double> z);
Vec project_l2_ball(std::span<const double> z, double radius, std::span<const double> center);
Vec project_box(std::span<const double> z, double lower, double upper);

struct DykstraResult {
    Vec z;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

using ProjectionFn = std::function<Vec(std::span<const double>)>;

DykstraResult dykstra_project(std::span<const double> z, const ProjectionFn& p1,
                              const ProjectionFn& p2, double tol = 1e-4, int max_iters = 100000);
DykstraResult dykstra_project(std::span<const double> z, const ConstraintSet& set1,
                              const ConstraintSet& set2, double tol = 1e-4, int max_iters = 100000);

// Stateful projector onto a ConstraintSet. Carries TV warm starts, so one
// instance must not be shared between concurrent solver runs.
class Projector {
public:
    explicit Projector(ConstraintSet set, double dykstra_tol = 1e-4, int dykstra_max_iters = 100000);

    Vec operator()(std::span<const double> z);
    const ConstraintSet& set() const noexcept { return set_; }
    // Result of the most recent Dykstra call (intersections only).
    const DykstraResult& last_dykstra() const noexcept { return last_; }

private:
    Vec project_member(std::size_t k, const ConstraintSet& s, std::span<const double> z);

    ConstraintSet set_;
    double tol_;
    int max_iters_;
    std::vector<TvBallCache> caches_;
    DykstraResult last_;
};

// One-shot projection (fresh warm-start state).
Vec project(const ConstraintSet& set, std::span<const double> z);

} // namespace polyct
