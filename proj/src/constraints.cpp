#include "polyct/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "polyct/errors.hpp"

namespace polyct {

namespace {

std::size_t square_side(std::size_t d, const char* who) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    if (side * side != d || d == 0) {
        throw DimensionError(std::string(who) + ": image length " + std::to_string(d) +
                             " is not a perfect square");
    }
    return side;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

// out = z - D^T q, with q laid out as [horizontal (d) | vertical (d)].
void primal_from_dual(std::span<const double> z, const Vec& q, std::size_t n, Vec& out) {
    const std::size_t d = n * n;
    std::copy(z.begin(), z.end(), out.begin());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c + 1 < n; ++c) {
            const std::size_t k = r * n + c;
            out[k] += q[k];
            out[k + 1] -= q[k];
        }
    }
    for (std::size_t r = 0; r + 1 < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t k = r * n + c;
            out[k] += q[d + k];
            out[k + n] -= q[d + k];
        }
    }
}

Vec constant_mean(std::span<const double> z) {
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
    return Vec(z.size(), mean);
}

} // namespace

// --------------------------------------------------------------- ConstraintSet

ConstraintSet ConstraintSet::nonneg() { return ConstraintSet{}; }

ConstraintSet ConstraintSet::box(double lower, double upper) {
    ConstraintSet s;
    s.kind = Kind::box;
    s.lower = lower;
    s.upper = upper;
    return s;
}

ConstraintSet ConstraintSet::tv_ball(double tau, std::size_t grid_side) {
    ConstraintSet s;
    s.kind = Kind::tv_ball;
    s.tau = tau;
    s.grid_side = grid_side;
    return s;
}

ConstraintSet ConstraintSet::l2_ball(double radius, Vec center) {
    ConstraintSet s;
    s.kind = Kind::l2_ball;
    s.radius = radius;
    s.center = std::move(center);
    return s;
}

ConstraintSet ConstraintSet::intersection(ConstraintSet first, ConstraintSet second) {
    ConstraintSet s;
    s.kind = Kind::intersection;
    s.members.push_back(std::move(first));
    s.members.push_back(std::move(second));
    return s;
}

ConstraintSet ConstraintSet::with_ball(double r, Vec c) const {
    if (kind != Kind::intersection || members.size() != 2) {
        throw std::invalid_argument("with_ball: only a two-member intersection accepts a ball member");
    }
    ConstraintSet s = *this;
    s.members.push_back(l2_ball(r, std::move(c)));
    return s;
}

void ConstraintSet::validate(std::size_t d) const {
    switch (kind) {
    case Kind::nonneg:
        return;
    case Kind::box:
        if (!(lower <= upper)) {
            throw std::invalid_argument("box: lower must not exceed upper");
        }
        return;
    case Kind::tv_ball:
        if (!(tau >= 0.0)) {
            throw std::invalid_argument("tv_ball: tau must be >= 0");
        }
        if (grid_side * grid_side != d) {
            throw DimensionError("tv_ball: grid_side^2 = " + std::to_string(grid_side * grid_side) +
                                 " does not match image length " + std::to_string(d));
        }
        return;
    case Kind::l2_ball:
        if (!(radius > 0.0)) {
            throw std::invalid_argument("l2_ball: radius must be > 0");
        }
        if (center.size() != d) {
            throw DimensionError("l2_ball: center has " + std::to_string(center.size()) +
                                 " entries, expected " + std::to_string(d));
        }
        return;
    case Kind::intersection:
        if (members.size() < 2 || members.size() > 3) {
            throw std::invalid_argument("intersection: expected two members (plus optional ball)");
        }
        if (members.size() == 3 && members[2].kind != Kind::l2_ball) {
            throw std::invalid_argument("intersection: third member must be an l2_ball");
        }
        for (const auto& m : members) {
            if (m.kind == Kind::intersection) {
                throw std::invalid_argument("intersection: members may not be intersections");
            }
            m.validate(d);
        }
        return;
    }
}

std::string ConstraintSet::type_name() const {
    switch (kind) {
    case Kind::nonneg: return "nonneg";
    case Kind::box: return "box";
    case Kind::tv_ball: return "tv_ball";
    case Kind::l2_ball: return "l2_ball";
    case Kind::intersection: return "intersection";
    }
    return "unknown";
}

bool ConstraintSet::contains(std::span<const double> x, double tol) const {
    switch (kind) {
    case Kind::nonneg:
        return std::all_of(x.begin(), x.end(), [&](double v) { return v >= -tol; });
    case Kind::box:
        return std::all_of(x.begin(), x.end(),
                           [&](double v) { return v >= lower - tol && v <= upper + tol; });
    case Kind::tv_ball:
        return tv_norm(x) <= tau + tol;
    case Kind::l2_ball:
        return dist2(x, center) <= radius + tol;
    case Kind::intersection:
        return std::all_of(members.begin(), members.end(),
                           [&](const ConstraintSet& m) { return m.contains(x, tol); });
    }
    return false;
}

// -------------------------------------------------------------------------- TV

double tv_norm(std::span<const double> x) {
    const std::size_t n = square_side(x.size(), "tv_norm");
    double tv = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t k = r * n + c;
            if (c + 1 < n) {
                tv += std::fabs(x[k + 1] - x[k]);
            }
            if (r + 1 < n) {
                tv += std::fabs(x[k + n] - x[k]);
            }
        }
    }
    return tv;
}

Vec prox_tv(std::span<const double> z, double lambda, const ProxOptions& opt, Vec* dual) {
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("prox_tv: lambda must be >= 0");
    }
    const std::size_t n = square_side(z.size(), "prox_tv");
    const std::size_t d = z.size();
    if (lambda == 0.0 || n == 1) {
        if (dual) {
            dual->assign(2 * d, 0.0);
        }
        return opt.nonneg ? project_nonneg(z) : Vec(z.begin(), z.end());
    }
    const double bound = 0.5 * lambda;
    Vec q(2 * d, 0.0);
    if (dual && dual->size() == 2 * d) {
        for (std::size_t e = 0; e < 2 * d; ++e) {
            q[e] = std::clamp((*dual)[e], -bound, bound);
        }
    }
    Vec w = q;
    Vec q_new(2 * d);
    Vec x(d);
    Vec x_prev(d);
    auto primal = [&](const Vec& dual_q, Vec& out) {
        primal_from_dual(z, dual_q, n, out);
        if (opt.nonneg) {
            for (double& v : out) {
                v = v > 0.0 ? v : 0.0;
            }
        }
    };
    primal(q, x_prev);
    double t = 1.0;
    constexpr double step = 1.0 / 8.0;
    for (int it = 0; it < opt.max_iters; ++it) {
        primal(w, x);
        // Gradient of 0.5 ||z - D^T q||^2 is -D x.
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t k = r * n + c;
                const double gh = c + 1 < n ? x[k + 1] - x[k] : 0.0;
                const double gv = r + 1 < n ? x[k + n] - x[k] : 0.0;
                q_new[k] = c + 1 < n ? std::clamp(w[k] + step * gh, -bound, bound) : 0.0;
                q_new[d + k] = r + 1 < n ? std::clamp(w[d + k] + step * gv, -bound, bound) : 0.0;
            }
        }
        // Adaptive restart when the momentum points uphill.
        double uphill = 0.0;
        for (std::size_t e = 0; e < 2 * d; ++e) {
            uphill += (w[e] - q_new[e]) * (q_new[e] - q[e]);
        }
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (uphill > 0.0) {
            t = 1.0;
            t_next = 1.0;
        }
        const double beta = (t - 1.0) / t_next;
        for (std::size_t e = 0; e < 2 * d; ++e) {
            w[e] = q_new[e] + beta * (q_new[e] - q[e]);
        }
        q.swap(q_new);
        t = t_next;

        primal(q, x);
        const double change = dist2(x, x_prev);
        const double scale = norm2(x);
        x_prev.swap(x);
        if (change <= opt.tol * scale) {
            break;
        }
    }
    if (dual) {
        *dual = std::move(q);
    }
    return x_prev;
}

namespace {

Vec tv_ball_search(std::span<const double> z, double tau, TvBallCache* cache, bool nonneg) {
    if (!(tau >= 0.0)) {
        throw std::invalid_argument("project_tv_ball: tau must be >= 0");
    }
    const Vec start = nonneg ? project_nonneg(z) : Vec(z.begin(), z.end());
    if (tv_norm(start) <= tau) {
        return start;
    }
    if (tau == 0.0) {
        Vec c = constant_mean(z);
        return nonneg ? project_nonneg(c) : c;
    }
    constexpr double kTvTol = 0.01;
    TvBallCache local;
    TvBallCache& state = cache ? *cache : local;
    ProxOptions opt;
    opt.nonneg = nonneg;

    auto eval = [&](double lambda, double& tv) {
        Vec x = prox_tv(z, lambda, opt, &state.dual);
        tv = tv_norm(x);
        return x;
    };
    auto accept = [&](Vec x, double lambda) {
        state.lambda = lambda;
        return x;
    };

    // Bracket [lo, hi] with TV(prox(lo)) > tau >= TV(prox(hi)). x_hi is kept
    // as the feasible fallback.
    double lo = 0.0;
    double hi = state.lambda > 0.0 ? state.lambda : 1.0;
    double tv = 0.0;
    Vec x_hi = eval(hi, tv);
    if (std::fabs(tv - tau) <= kTvTol) {
        return accept(std::move(x_hi), hi);
    }
    if (tv > tau) {
        for (int k = 0; k < 200; ++k) {
            lo = hi;
            hi *= 2.0;
            x_hi = eval(hi, tv);
            if (std::fabs(tv - tau) <= kTvTol) {
                return accept(std::move(x_hi), hi);
            }
            if (tv <= tau) {
                break;
            }
        }
    } else if (cache && state.lambda > 0.0) {
        // Warm bracket: halve from the cached multiplier.
        for (int k = 0; k < 60; ++k) {
            const double cand = 0.5 * hi;
            Vec x = eval(cand, tv);
            if (std::fabs(tv - tau) <= kTvTol) {
                return accept(std::move(x), cand);
            }
            if (tv > tau) {
                lo = cand;
                break;
            }
            hi = cand;
            x_hi = std::move(x);
        }
    }
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        Vec x = eval(mid, tv);
        if (std::fabs(tv - tau) <= kTvTol) {
            return accept(std::move(x), mid);
        }
        if (tv > tau) {
            lo = mid;
        } else {
            hi = mid;
            x_hi = std::move(x);
        }
    }
    return accept(std::move(x_hi), hi);
}

} // namespace

Vec project_tv_ball(std::span<const double> z, double tau, TvBallCache* cache) {
    return tv_ball_search(z, tau, cache, false);
}

Vec project_tv_ball_nonneg(std::span<const double> z, double tau, TvBallCache* cache) {
    return tv_ball_search(z, tau, cache, true);
}

// ------------------------------------------------------------ simple projections

Vec project_nonneg(std::span<const double> z) {
    Vec out(z.begin(), z.end());
    for (double& v : out) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Vec project_l2_ball(std::span<const double> z, double radius, std::span<const double> center) {
    if (!(radius > 0.0)) {
        throw std::invalid_argument("project_l2_ball: radius must be > 0");
    }
    if (center.size() != z.size()) {
        throw DimensionError("project_l2_ball: center and point differ in length");
    }
    const double dist = dist2(z, center);
    Vec out(z.begin(), z.end());
    if (dist <= radius) {
        return out;
    }
    const double scale = radius / dist;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = center[k] + (z[k] - center[k]) * scale;
    }
    return out;
}

Vec project_box(std::span<const double> z, double lower, double upper) {
    Vec out(z.begin(), z.end());
    for (double& v : out) {
        v = std::clamp(v, lower, upper);
    }
    return out;
}

// --------------------------------------------------------------------- Dykstra

DykstraResult dykstra_project(std::span<const double> z, const ProjectionFn& p1,
                              const ProjectionFn& p2, double tol, int max_iters) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("dykstra_project: tol must be > 0");
    }
    const std::size_t d = z.size();
    DykstraResult res;
    res.z.assign(z.begin(), z.end());
    Vec p(d, 0.0);
    Vec q(d, 0.0);
    Vec buf(d);
    Vec y_prev(z.begin(), z.end());
    // Far from the origin an absolute tolerance is below double resolution.
    double zn = 0.0;
    for (double v : z) {
        zn += v * v;
    }
    tol = std::max(tol, 1e-12 * std::sqrt(zn));
    for (int k = 1; k <= max_iters; ++k) {
        for (std::size_t i = 0; i < d; ++i) {
            buf[i] = res.z[i] + p[i];
        }
        Vec y = p1(buf);
        for (std::size_t i = 0; i < d; ++i) {
            p[i] = buf[i] - y[i];
            buf[i] = y[i] + q[i];
        }
        Vec z_next = p2(buf);
        for (std::size_t i = 0; i < d; ++i) {
            q[i] = buf[i] - z_next[i];
        }
        // z alone can stall while the corrections still move, so the two
        // member outputs must also agree and the first one must have settled.
        res.residual = std::max({dist2(z_next, res.z), dist2(y, z_next), dist2(y, y_prev)});
        y_prev = std::move(y);
        res.z = std::move(z_next);
        res.iterations = k;
        if (res.residual <= tol) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

DykstraResult dykstra_project(std::span<const double> z, const ConstraintSet& set1,
                              const ConstraintSet& set2, double tol, int max_iters) {
    Projector a(set1, tol, max_iters);
    Projector b(set2, tol, max_iters);
    return dykstra_project(
        z, [&](std::span<const double> v) { return a(v); },
        [&](std::span<const double> v) { return b(v); }, tol, max_iters);
}

// ------------------------------------------------------------------- Projector

Projector::Projector(ConstraintSet set, double dykstra_tol, int dykstra_max_iters)
    : set_(std::move(set)), tol_(dykstra_tol), max_iters_(dykstra_max_iters), caches_(3) {}

Vec Projector::project_member(std::size_t k, const ConstraintSet& s, std::span<const double> z) {
    switch (s.kind) {
    case ConstraintSet::Kind::nonneg:
        return project_nonneg(z);
    case ConstraintSet::Kind::box:
        return project_box(z, s.lower, s.upper);
    case ConstraintSet::Kind::tv_ball:
        if (s.grid_side * s.grid_side != z.size()) {
            throw DimensionError("tv_ball: grid_side does not match image length");
        }
        return project_tv_ball(z, s.tau, &caches_[k]);
    case ConstraintSet::Kind::l2_ball:
        return project_l2_ball(z, s.radius, s.center);
    case ConstraintSet::Kind::intersection:
        break;
    }
    throw std::invalid_argument("intersection members may not be intersections");
}

Vec Projector::operator()(std::span<const double> z) {
    if (set_.kind != ConstraintSet::Kind::intersection) {
        return project_member(0, set_, z);
    }
    const auto& m = set_.members;
    // TV ball with nonneg has a direct multiplier search; Dykstra otherwise.
    const ConstraintSet* tv = nullptr;
    if (m[0].kind == ConstraintSet::Kind::tv_ball && m[1].kind == ConstraintSet::Kind::nonneg) {
        tv = &m[0];
    } else if (m[1].kind == ConstraintSet::Kind::tv_ball && m[0].kind == ConstraintSet::Kind::nonneg) {
        tv = &m[1];
    }
    auto inner = [&](std::span<const double> v) {
        if (tv) {
            if (tv->grid_side * tv->grid_side != v.size()) {
                throw DimensionError("tv_ball: grid_side does not match image length");
            }
            last_ = DykstraResult{};
            last_.z = project_tv_ball_nonneg(v, tv->tau, &caches_[0]);
            last_.converged = true;
            return last_.z;
        }
        last_ = dykstra_project(
            v, [&](std::span<const double> u) { return project_member(0, m[0], u); },
            [&](std::span<const double> u) { return project_member(1, m[1], u); }, tol_, max_iters_);
        return last_.z;
    };
    if (m.size() == 2) {
        return inner(z);
    }
    DykstraResult outer = dykstra_project(
        z, inner, [&](std::span<const double> u) { return project_member(2, m[2], u); }, tol_,
        max_iters_);
    last_ = outer;
    return std::move(outer.z);
}

Vec project(const ConstraintSet& set, std::span<const double> z) {
    Projector p(set);
    return p(z);
}

} // namespace polyct
