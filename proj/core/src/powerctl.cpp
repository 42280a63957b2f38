// SPDX-License-Identifier: Apache-2.0
#include "mtcmimo/powerctl.hpp"
#include "mtcmimo/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

namespace mtcmimo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool exact_sc3(const RateModel& model, const FeasibilityOptions& options)
{
    return options.sc3_human_rate.has_value() && model.config().scheme == Scheme::SC3
           && !model.config().sc3_identical_machine_powers;
}

/// Smallest p with a1 log2(1 + p c / i1) + a2 log2(1 + p c / i2) >= r.
double invert_two_phase(double r, double a1, double a2, double c, double i1, double i2)
{
    if (r <= 0.0)
        return 0.0;
    const double t = std::exp2(r / (a1 + a2)) - 1.0;
    // f is concave and increasing, so Newton steps from the left bound stay
    // below the root and increase monotonically.
    double p = t * std::min(i1, i2) / c;
    const double hi = t * std::max(i1, i2) / c;
    const double u1 = c / i1, u2 = c / i2;
    for (int it = 0; it < 100; ++it) {
        const double f = a1 * std::log2(1.0 + p * u1) + a2 * std::log2(1.0 + p * u2) - r;
        const double df = (a1 * u1 / (1.0 + p * u1) + a2 * u2 / (1.0 + p * u2)) / std::numbers::ln2;
        const double next = std::min(hi, p - f / df);
        if (!(next > p * (1.0 + 1e-15)))
            return std::max(p, next);
        p = next;
    }
    return p;
}

std::vector<double> signal_gains(const RateModel& model)
{
    const std::vector<double> ones(static_cast<std::size_t>(model.size()), 1.0);
    const auto t = model.terms(0, ones);
    std::vector<double> c(t.size());
    for (std::size_t k = 0; k < t.size(); ++k)
        c[k] = t[k].signal;
    return c;
}

} // namespace

std::vector<double> sci_pilot_powers(const Scenario& scenario)
{
    const double q_max = scenario.params().max_pilot_power_w;
    std::vector<double> q;
    q.reserve(static_cast<std::size_t>(scenario.size()));
    for (const auto& d : scenario.devices()) {
        if (!(d.beta > 0.0))
            throw ConfigError("betas must be positive");
        q.push_back(d.cls == DeviceClass::Human ? q_max : q_max * scenario.beta_min() / d.beta);
    }
    return q;
}

bool PowerProfile::within_caps(double tol) const
{
    auto ok = [tol](const std::vector<double>& v, double cap) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x >= 0.0 && x <= cap * (1.0 + tol); });
    };
    return ok(q, q_max) && ok(p, p_max);
}

double sinr_for_rate(double rate, std::span<const double> prelogs)
{
    const double a = std::accumulate(prelogs.begin(), prelogs.end(), 0.0);
    if (!(a > 0.0))
        throw ConfigError("pre-log factor must be positive");
    return std::exp2(rate / a) - 1.0;
}

namespace {

using Map = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct NewtonRoot {
    std::vector<double> p;
    Eigen::VectorXd push;  ///< (I - J)^{-1} 1 at the root
};

/// Root of T(p) = p near `start` by Newton's method with a forward-difference
/// Jacobian J; nullopt when it leaves [0, 2 p_max], does not converge or
/// (I - J)^{-1} 1 is not positive there.
std::optional<NewtonRoot> newton_root(const Map& apply, const std::vector<double>& start, double p_max)
{
    const auto n = static_cast<Eigen::Index>(start.size());
    std::vector<double> x = start, tx(start.size()), shifted(start.size()), ts(start.size());
    Eigen::MatrixXd jac(n, n);  // J - I
    Eigen::VectorXd f(n);
    for (int it = 0; it < 20; ++it) {
        apply(x, tx);
        double resid = 0.0, scale = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            f(i) = tx[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)];
            resid = std::max(resid, std::abs(f(i)));
            scale = std::max(scale, std::abs(x[static_cast<std::size_t>(i)]));
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            const double h = 1e-7 * std::max(x[jj], 1e-9 * p_max);
            shifted = x;
            shifted[jj] += h;
            apply(shifted, ts);
            for (Eigen::Index i = 0; i < n; ++i)
                jac(i, j) = (ts[static_cast<std::size_t>(i)] - tx[static_cast<std::size_t>(i)]) / h;
            jac(j, j) -= 1.0;
        }
        const auto lu = jac.partialPivLu();
        if (resid <= 1e-13 * scale) {
            NewtonRoot root{x, lu.solve(-Eigen::VectorXd::Ones(n))};
            if (!(root.push.minCoeff() > 0.0))
                return std::nullopt;
            return root;
        }
        const Eigen::VectorXd dx = lu.solve(-f);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& xi = x[static_cast<std::size_t>(i)];
            xi += dx(i);
            if (!(xi >= 0.0 && xi <= 2.0 * p_max))
                return std::nullopt;
        }
    }
    return std::nullopt;
}

/// Verdict for an affine map T(p) = A p + c with T(p) >= p at the iterate p:
/// 1 feasible (`out` then holds T(x) for a super-solution x <= p_max),
/// -1 infeasible, 0 undecided. Every verdict is checked with exact map
/// evaluations; the matrix algebra only proposes the certificates.
int decide_affine(const Map& apply, const std::vector<double>& p, const std::vector<double>& step, double p_max,
                  std::vector<double>& out)
{
    const std::size_t n = p.size();
    const auto dim = static_cast<Eigen::Index>(n);
    std::vector<double> tp(n), x(n), tx(n);
    apply(p, tp);
    Eigen::MatrixXd a(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        x = p;
        x[static_cast<std::size_t>(j)] += p_max;
        apply(x, tx);
        for (Eigen::Index i = 0; i < dim; ++i)
            a(i, j) = (tx[static_cast<std::size_t>(i)] - tp[static_cast<std::size_t>(i)]) / p_max;
    }
    // A w from two map evaluations.
    auto times_a = [&](const Eigen::VectorXd& w) {
        const double s = p_max / w.cwiseAbs().maxCoeff();
        for (std::size_t i = 0; i < n; ++i)
            x[i] = p[i] + s * w(static_cast<Eigen::Index>(i));
        apply(x, tx);
        Eigen::VectorXd aw(dim);
        for (std::size_t i = 0; i < n; ++i)
            aw(static_cast<Eigen::Index>(i)) = (tx[i] - tp[i]) / s;
        return aw;
    };
    auto is_super = [&](const Eigen::VectorXd& c, int sign) {
        for (std::size_t i = 0; i < n; ++i)
            x[i] = c(static_cast<Eigen::Index>(i));
        apply(x, tx);
        for (std::size_t i = 0; i < n; ++i)
            if (sign * (tx[i] - x[i]) > 0.0)
                return false;
        return true;
    };

    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim) - a;
    const auto lu = m.partialPivLu();
    const Eigen::VectorXd v = lu.solve(Eigen::VectorXd::Ones(dim));
    if (v.allFinite() && v.minCoeff() > 0.0) {
        // A v < v certifies rho(A) < 1: the fixed point is unique, every
        // super-solution lies above it and every sub-solution below it.
        if (!(times_a(v).array() < v.array()).all())
            return 0;
        Eigen::VectorXd f(dim), base(dim);
        for (std::size_t i = 0; i < n; ++i) {
            f(static_cast<Eigen::Index>(i)) = tp[i] - p[i];
            base(static_cast<Eigen::Index>(i)) = p[i];
        }
        const Eigen::VectorXd root = base + lu.solve(f);
        const double size = std::max(root.cwiseAbs().maxCoeff(), 1e-300);
        for (double eps = 1e-12; eps <= 1e-4; eps *= 100.0) {
            const Eigen::VectorXd delta = eps * size / v.maxCoeff() * v;
            const Eigen::VectorXd above = root + delta, below = root - delta;
            if (above.maxCoeff() <= p_max && is_super(above, 1)) {
                out = tx;
                return 1;
            }
            if (below.maxCoeff() > p_max && is_super(below, -1))
                return -1;
        }
        return 0;
    }
    // rho(A) >= 1: a Perron vector w >= 0 with A w >= w that the current step
    // dominates makes every later step at least a multiple of w.
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success)
        return 0;
    Eigen::Index top = 0;
    es.eigenvalues().real().maxCoeff(&top);
    if (es.eigenvalues()(top).real() < 1.0)
        return 0;
    Eigen::VectorXd w = es.eigenvectors().col(top).real().cwiseAbs();
    const double wmax = w.maxCoeff();
    if (!(wmax > 0.0))
        return 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (w(i) < 1e-12 * wmax)
            w(i) = 0.0;
        else if (!(step[static_cast<std::size_t>(i)] > 0.0))
            return 0;
    }
    const Eigen::VectorXd aw = times_a(w);
    for (Eigen::Index i = 0; i < dim; ++i)
        if (w(i) > 0.0 && aw(i) < w(i) * (1.0 + 1e-12))
            return 0;
    return -1;
}

/// Monotone iteration p <- T(p) from `start`. `affine` enables the exact
/// step-ratio infeasibility certificate; `refute`, when set, is consulted
/// for non-affine maps once the ratios suggest divergence and returns true
/// when infeasibility is proven from the given iterate. `hit_cap` marks a
/// proven infeasibility; running out of iterations leaves it unset.
FeasibilityResult iterate(const Map& apply, std::vector<double> start, double p_max, const FeasibilityOptions& options,
                          bool affine, const std::function<bool(const std::vector<double>&)>& refute)
{
    const std::size_t n = start.size();
    FeasibilityResult res;
    res.p = std::move(start);
    std::vector<double> next(n), step(n), prev_step(n, 0.0), candidate(n), image(n);
    const int refutation_gap = 8;
    int next_refutation = 0, next_scan = 16, scan_gap = 16;
    for (int it = 1; it <= options.max_iterations; ++it) {
        res.iterations = it;
        apply(res.p, next);
        double max_step = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i] < res.p[i] * (1.0 - 1e-12))
                res.monotone = false;
            step[i] = next[i] - res.p[i];
            max_step = std::max(max_step, std::abs(step[i]));
            scale = std::max(scale, std::abs(next[i]));
        }
        res.p.swap(next);
        if (std::any_of(res.p.begin(), res.p.end(), [p_max](double x) { return x > p_max; })) {
            res.hit_cap = true;
            return res;
        }
        if (max_step <= options.tolerance * scale) {
            res.feasible = true;
            return res;
        }

        // Early certificates from the ratio of successive steps.
        double r_min = kInf, r_max = 0.0;
        bool ratios = it >= 3;
        for (std::size_t i = 0; i < n && ratios; ++i) {
            // Converged components only carry rounding noise.
            const double noise = 1e-13 * res.p[i];
            if (std::abs(step[i]) <= noise && std::abs(prev_step[i]) <= noise)
                continue;
            if (!(prev_step[i] > 0.0) || step[i] < 0.0) {
                ratios = false;
                break;
            }
            const double r = step[i] / prev_step[i];
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
        }
        prev_step = step;
        if (!ratios || r_max == 0.0)
            continue;

        bool diverging = r_min >= 1.0;
        if (!diverging) {
            const double g = r_min / (1.0 - r_min);
            for (std::size_t i = 0; i < n && !diverging; ++i)
                diverging = res.p[i] + g * step[i] > p_max;
        }
        if (diverging) {
            // Steps obey d' = D A d exactly for affine maps, so r_min bounds
            // all later ratios from below: the limit is at least
            // p + r/(1-r) d, or unbounded.
            if (affine) {
                res.hit_cap = true;
                return res;
            }
            if (refute && it >= next_refutation) {
                if (refute(res.p)) {
                    res.hit_cap = true;
                    return res;
                }
                next_refutation = it + refutation_gap;
            }
        }
        if (it >= next_scan) {
            if (affine) {
                const int verdict = decide_affine(apply, res.p, step, p_max, image);
                if (verdict != 0) {
                    if (verdict > 0)
                        res.p = image;
                    (verdict > 0 ? res.feasible : res.hit_cap) = true;
                    return res;
                }
            } else if (auto root = newton_root(apply, res.p, p_max)) {
                // Near a fold the super-solutions form a thin band just beyond
                // the fixed point: probe slightly above the Newton root along
                // (I - J)^{-1} 1, where T(p) - p is about -eps 1.
                const double top = root->push.maxCoeff();
                const double size = *std::max_element(root->p.begin(), root->p.end());
                for (double eps = 1e-12; eps <= 1e-2; eps *= 10.0) {
                    for (std::size_t i = 0; i < n; ++i)
                        candidate[i] = root->p[i] + eps * size * root->push(static_cast<Eigen::Index>(i)) / top;
                    if (std::any_of(candidate.begin(), candidate.end(), [p_max](double x) { return x > p_max; }))
                        break;
                    apply(candidate, image);
                    bool super = true;
                    for (std::size_t i = 0; i < n && super; ++i)
                        super = image[i] <= candidate[i];
                    if (super) {
                        res.p = image;
                        res.feasible = true;
                        return res;
                    }
                }
            }
            next_scan = it + scan_gap;
            scan_gap *= 2;
        }
        if (r_max < 1.0) {
            // Any p_hat <= p_max with T(p_hat) <= p_hat bounds the least fixed
            // point, so it proves feasibility for every monotone T.
            const double g = r_max / (1.0 - r_max) * (1.0 + 1e-6);
            for (std::size_t i = 0; i < n; ++i)
                candidate[i] = res.p[i] + g * step[i] + 1e-9 * std::abs(step[i]);
            if (std::any_of(candidate.begin(), candidate.end(), [p_max](double x) { return x > p_max; }))
                continue;
            apply(candidate, image);
            bool super = true;
            for (std::size_t i = 0; i < n && super; ++i)
                super = image[i] <= candidate[i];
            if (super) {
                res.p = image;
                res.feasible = true;
                return res;
            }
        }
    }
    return res;
}

} // namespace

FeasibilityResult maxmin_feasible(const RateModel& model, std::span<const double> targets, double p_max,
                                  const FeasibilityOptions& options)
{
    const int k_all = model.size();
    if (static_cast<int>(targets.size()) != k_all)
        throw ConfigError("one SINR target per device required");
    if (model.config().scheme == Scheme::SC3 && model.config().sc3_identical_machine_powers)
        throw ConfigError("data power control is not defined when SC3 machines reuse their pilot powers");
    for (double t : targets)
        if (!(t >= 0.0) || !std::isfinite(t))
            throw ConfigError("SINR targets must be finite and non-negative");

    const bool exact = exact_sc3(model, options);
    const int kh = model.scenario().humans();
    const auto gains = signal_gains(model);
    // SC3 humans make gamma-bar and the coherent term depend on p_h, so the
    // map is only affine in p without them.
    const bool two_phase = model.config().scheme == Scheme::SC3 && kh > 0;
    const auto prelogs = model.config().human_prelogs();
    const auto n = static_cast<std::size_t>(k_all);

    auto human_power = [&](std::size_t i, double i1, double i2) {
        return exact ? invert_two_phase(*options.sc3_human_rate, prelogs[0], prelogs[1], gains[i], i1, i2)
                     : targets[i] * std::max(i1, i2) / gains[i];
    };
    auto apply = [&](const std::vector<double>& p, std::vector<double>& out) {
        const auto t0 = model.terms(0, p);
        std::vector<SinrTerms> t1;
        if (two_phase)
            t1 = model.human_terms(1, p);
        for (std::size_t i = 0; i < n; ++i) {
            if (two_phase && static_cast<int>(i) < kh)
                out[i] = human_power(i, t0[i].interference(), t1[i].interference());
            else
                out[i] = targets[i] * t0[i].interference() / gains[i];
        }
    };
    if (!two_phase)
        return iterate(apply, std::vector<double>(n, 0.0), p_max, options, true, {});

    // Infeasibility for SC3: an affine minorant T_a of T on {a <= p <= p_max}
    // with T_a(a) = T(a) keeps its iterates from a below the least fixed
    // point of T, so proving T_a infeasible proves T infeasible.
    const std::vector<double> top(n, p_max);
    const auto top0 = model.terms(0, top);
    const auto top1 = model.terms(1, top);
    auto refute = [&](const std::vector<double>& a) {
        const auto a0 = model.terms(0, a);
        const auto a1 = model.terms(1, a);
        // Humans: conservative mode keeps the phase that binds at a; exact
        // mode uses the chord plane through the corners of the interference
        // box, which lies below the concave, supermodular inversion.
        std::vector<double> w1(static_cast<std::size_t>(kh)), w2(w1), base(w1);
        std::vector<int> phase(static_cast<std::size_t>(kh));
        for (int k = 0; k < kh; ++k) {
            const auto i = static_cast<std::size_t>(k);
            const double i1 = a0[i].interference(), i2 = a1[i].interference();
            if (!exact) {
                phase[i] = i2 > i1 ? 1 : 0;
                continue;
            }
            const double h1 = top0[i].interference(), h2 = top1[i].interference();
            base[i] = human_power(i, i1, i2);
            w1[i] = h1 > i1 ? (human_power(i, h1, i2) - base[i]) / (h1 - i1) : 0.0;
            w2[i] = h2 > i2 ? (human_power(i, i1, h2) - base[i]) / (h2 - i2) : 0.0;
        }
        auto lower = [&](const std::vector<double>& p, std::vector<double>& out) {
            const auto t0 = model.lower_terms(0, p, a);
            const auto t1 = model.human_terms(1, p);
            for (std::size_t i = 0; i < n; ++i) {
                if (static_cast<int>(i) >= kh)
                    out[i] = targets[i] * t0[i].interference() / gains[i];
                else if (exact)
                    out[i] = base[i] + w1[i] * (t0[i].interference() - a0[i].interference())
                             + w2[i] * (t1[i].interference() - a1[i].interference());
                else
                    out[i] = targets[i] * (phase[i] ? t1[i] : t0[i]).interference() / gains[i];
            }
        };
        return iterate(lower, a, p_max, options, true, {}).hit_cap;
    };
    return iterate(apply, std::vector<double>(n, 0.0), p_max, options, false, refute);
}

double target_violation(const RateModel& model, std::span<const double> targets, std::span<const double> p,
                        const FeasibilityOptions& options)
{
    const bool exact = exact_sc3(model, options);
    const int kh = model.scenario().humans();
    double worst = -kInf;
    for (int k = 0; k < model.size(); ++k) {
        const double t = targets[static_cast<std::size_t>(k)];
        if (exact && k < kh) {
            const double r = model.breakdown(k, p).rate;
            const double goal = *options.sc3_human_rate;
            if (goal > 0.0)
                worst = std::max(worst, (goal - r) / goal);
            continue;
        }
        if (!(t > 0.0))
            continue;
        for (int ph = 0; ph < model.phases(k); ++ph)
            worst = std::max(worst, (t - model.sinr(k, ph, p)) / t);
    }
    return worst;
}

double machine_sinr_upper_bound(const RateModel& model, double p_max)
{
    const int kh = model.scenario().humans();
    double best = kInf;
    std::vector<double> p(static_cast<std::size_t>(model.size()), 0.0);
    for (int k = kh; k < model.size(); ++k) {
        p[static_cast<std::size_t>(k)] = p_max;
        best = std::min(best, model.sinr(k, 0, p));
        p[static_cast<std::size_t>(k)] = 0.0;
    }
    return best;
}

MachineTargetResult max_machine_target(const RateModel& model, double t_h, double p_max,
                                       const FeasibilityOptions& feasibility, const BisectionOptions& bisection,
                                       double known_infeasible)
{
    const int kh = model.scenario().humans();
    const int k_all = model.size();
    std::vector<double> targets(static_cast<std::size_t>(k_all), 0.0);
    auto set_targets = [&](double t_m) {
        for (int k = 0; k < k_all; ++k)
            targets[static_cast<std::size_t>(k)] = k < kh ? t_h : t_m;
    };

    MachineTargetResult out;
    set_targets(0.0);
    auto base = maxmin_feasible(model, targets, p_max, feasibility);
    out.iterations += base.iterations;
    if (!base.feasible)
        return out;
    out.feasible = true;
    out.p = base.p;
    if (model.scenario().machines() == 0)
        return out;

    double lo = 0.0;
    double hi = machine_sinr_upper_bound(model, p_max);
    if (!std::isfinite(hi))
        throw ConfigError("machine SINR upper bound is unbounded");
    if (known_infeasible < hi) {
        hi = known_infeasible;
    } else {
        // The upper bound itself is only reachable without any other transmitter.
        set_targets(hi);
        auto top = maxmin_feasible(model, targets, p_max, feasibility);
        out.iterations += top.iterations;
        if (top.feasible) {
            out.t_m = hi;
            out.t_upper = hi;
            out.p = top.p;
            return out;
        }
    }
    for (int it = 0; it < bisection.max_iterations && hi - lo > bisection.relative_tolerance * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        set_targets(mid);
        auto r = maxmin_feasible(model, targets, p_max, feasibility);
        out.iterations += r.iterations;
        ++out.bisection_steps;
        if (r.feasible) {
            lo = mid;
            out.p = std::move(r.p);
        } else {
            hi = mid;
            // Neither certified nor refuted: mid sits next to a fold of the
            // map, within the iteration cap's resolution of the boundary.
            if (!r.hit_cap && bisection.stop_at_undecided)
                break;
        }
    }
    out.t_m = lo;
    out.t_upper = hi;
    return out;
}

namespace {

std::vector<int> pilot_grid(const Scenario& scenario, const RegionOptions& options)
{
    if (!options.machine_pilot_lengths.empty())
        return options.machine_pilot_lengths;
    const auto& cfg = options.config;
    const int upper = cfg.scheme == Scheme::SC1 ? cfg.coherence_length - 1
                                                : cfg.coherence_length - cfg.human_pilot_length - 1;
    std::vector<int> grid;
    for (int n = 1; n <= std::min(scenario.machines(), upper); ++n)
        grid.push_back(n);
    return grid;
}

std::vector<double> alpha_grid(const RegionOptions& options)
{
    if (!options.alpha_grid.empty())
        return options.alpha_grid;
    std::vector<double> grid;
    for (int i = 0; i <= 50; ++i)
        grid.push_back(i / 50.0);
    return grid;
}

FeasibilityOptions feasibility_for(const RegionOptions& options, double r_h)
{
    FeasibilityOptions f = options.feasibility;
    if (options.sc3_exact_inversion && options.config.scheme == Scheme::SC3)
        f.sc3_human_rate = r_h;
    return f;
}

/// Humans-only scenario (SC1 human CIs) or machines-only scenario.
Scenario class_only(const Scenario& scenario, DeviceClass cls)
{
    std::vector<int> ids;
    for (const auto& d : scenario.devices())
        if (d.cls == cls)
            ids.push_back(d.id);
    return scenario.subset(ids);
}

std::vector<double> pick(std::span<const double> v, int first, int count)
{
    return {v.begin() + first, v.begin() + first + count};
}

struct SchemeSolve {
    bool feasible = false;
    bool pruned = false;
    double r_m = 0.0;
    double t_m = 0.0;
    double t_upper = kInf;
    std::vector<double> p;
    long long iterations = 0;
};

/// Joint schemes (SC2, SC3) at one machine pilot length.
SchemeSolve solve_joint(double r_h, const Scenario& scenario, std::span<const double> q, const RegionOptions& options,
                        int n_p_m, double best_so_far, double ceiling)
{
    SchemeSolve s;
    SchemeConfig cfg = options.config;
    cfg.machine_pilot_length = n_p_m;
    const double p_max = scenario.params().max_data_power_w;
    const auto machine_prelog = cfg.machine_prelogs(scenario.machines());
    if (!(machine_prelog[0] > 0.0))
        return s;
    const PilotBook book = make_book(options.book, n_p_m, scenario.machines(), options.book_seed);
    const RateModel model(scenario, cfg, book, {q.begin(), q.end()});

    const double t_hi = std::min(machine_sinr_upper_bound(model, p_max), ceiling);
    if (scenario.machines() > 0 && machine_prelog[0] * std::log2(1.0 + t_hi) <= best_so_far) {
        s.pruned = true;
        return s;
    }
    const double t_h = sinr_for_rate(r_h, cfg.human_prelogs());
    const auto res = max_machine_target(model, t_h, p_max, feasibility_for(options, r_h), options.bisection, ceiling);
    s.iterations = res.iterations;
    s.feasible = res.feasible;
    if (!res.feasible)
        return s;
    s.t_m = res.t_m;
    s.t_upper = res.t_upper;
    s.r_m = machine_prelog[0] * std::log2(1.0 + res.t_m);
    s.p = res.p;
    return s;
}

struct Sc1Machines {
    double r_star = 0.0;  ///< (N - N_p^m)/N log2(1 + t_m), alpha excluded
    int n_p_m = 0;
    double t_m = 0.0;
    std::vector<double> p;
    long long iterations = 0;
};

Sc1Machines sc1_machine_optimum(const Scenario& scenario, std::span<const double> q, const RegionOptions& options)
{
    Sc1Machines best;
    const Scenario machines = class_only(scenario, DeviceClass::Machine);
    if (machines.machines() == 0)
        return best;
    const auto mq = pick(q, scenario.humans(), scenario.machines());
    const double p_max = scenario.params().max_data_power_w;
    const double n = options.config.coherence_length;
    for (int n_p_m : pilot_grid(scenario, options)) {
        SchemeConfig cfg = options.config;
        cfg.machine_pilot_length = n_p_m;
        cfg.alpha = 0.0;
        const double prelog = (n - n_p_m) / n;
        const PilotBook book = make_book(options.book, n_p_m, machines.machines(), options.book_seed);
        const RateModel model(machines, cfg, book, mq);
        const double t_hi = machine_sinr_upper_bound(model, p_max);
        if (prelog * std::log2(1.0 + t_hi) <= best.r_star)
            continue;
        const auto res = max_machine_target(model, 0.0, p_max, options.feasibility, options.bisection);
        best.iterations += res.iterations;
        const double r = prelog * std::log2(1.0 + res.t_m);
        if (res.feasible && r > best.r_star) {
            best.r_star = r;
            best.n_p_m = n_p_m;
            best.t_m = res.t_m;
            best.p = res.p;
        }
    }
    return best;
}

/// Whether humans alone reach r_h with fraction alpha of the CIs.
bool sc1_humans_feasible(const Scenario& humans, std::span<const double> hq, const RegionOptions& options, double r_h,
                         double alpha, std::vector<double>& p, long long& iterations)
{
    if (humans.humans() == 0 || r_h <= 0.0) {
        p.assign(static_cast<std::size_t>(humans.size()), 0.0);
        return true;
    }
    if (alpha <= 0.0)
        return false;
    SchemeConfig cfg = options.config;
    cfg.alpha = alpha;
    const RateModel model(humans, cfg, PilotBook{}, {hq.begin(), hq.end()});
    const double t_h = sinr_for_rate(r_h, cfg.human_prelogs());
    const std::vector<double> targets(static_cast<std::size_t>(humans.size()), t_h);
    const auto res = maxmin_feasible(model, targets, humans.params().max_data_power_w, options.feasibility);
    iterations += res.iterations;
    p = res.p;
    return res.feasible;
}

RatePoint sc1_point(double r_h, const Scenario& scenario, std::span<const double> q, const RegionOptions& options,
                    const Sc1Machines& machines)
{
    RatePoint pt;
    pt.scheme = Scheme::SC1;
    pt.receiver = options.config.receiver;
    pt.r_h_target = r_h;
    pt.solver_iterations = machines.iterations;
    const Scenario humans = class_only(scenario, DeviceClass::Human);
    const auto hq = pick(q, 0, scenario.humans());
    for (double alpha : alpha_grid(options)) {
        std::vector<double> ph;
        if (!sc1_humans_feasible(humans, hq, options, r_h, alpha, ph, pt.solver_iterations))
            continue;
        // R_m = (1 - alpha) r*, so the smallest feasible alpha wins.
        pt.feasible = true;
        pt.alpha = alpha;
        pt.r_m = (1.0 - alpha) * machines.r_star;
        pt.n_p_m = machines.n_p_m;
        pt.t_m = machines.t_m;
        pt.p = ph;
        pt.p.insert(pt.p.end(), machines.p.begin(), machines.p.end());
        pt.p.resize(static_cast<std::size_t>(scenario.size()), 0.0);
        break;
    }
    return pt;
}

/// One frontier point of SC2/SC3. `ceilings`, when given, holds per pilot
/// length an infeasible common machine SINR from a smaller human target
/// (NaN once the humans alone failed) and is updated in place.
RatePoint joint_point(double r_h, const Scenario& scenario, std::span<const double> q, const RegionOptions& options,
                      std::vector<double>* ceilings = nullptr)
{
    RatePoint pt;
    pt.scheme = options.config.scheme;
    pt.receiver = options.config.receiver;
    pt.r_h_target = r_h;
    const auto grid = pilot_grid(scenario, options);
    if (ceilings && ceilings->empty())
        ceilings->assign(grid.size(), kInf);

    // Most promising pilot lengths first so that the rate bound prunes more.
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (ceilings) {
        auto bound = [&](std::size_t i) {
            SchemeConfig cfg = options.config;
            cfg.machine_pilot_length = grid[i];
            const double c = (*ceilings)[i];
            return std::isnan(c) ? -kInf : cfg.machine_prelogs(scenario.machines())[0] * std::log2(1.0 + c);
        };
        std::vector<double> b(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            b[i] = bound(i);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return b[x] > b[y]; });
    }

    double best = -1.0;
    for (std::size_t i : order) {
        const int n_p_m = grid[i];
        const double ceiling = ceilings ? (*ceilings)[i] : kInf;
        if (std::isnan(ceiling))
            continue;
        const auto s = solve_joint(r_h, scenario, q, options, n_p_m, std::max(best, 0.0), ceiling);
        pt.solver_iterations += s.iterations;
        if (ceilings && !s.pruned)
            (*ceilings)[i] = s.feasible ? s.t_upper : std::numeric_limits<double>::quiet_NaN();
        const bool better = s.r_m > best || (s.r_m == best && n_p_m < pt.n_p_m);
        if (s.feasible && better) {
            best = s.r_m;
            pt.feasible = true;
            pt.r_m = s.r_m;
            pt.t_m = s.t_m;
            pt.n_p_m = n_p_m;
            pt.p = s.p;
        }
    }
    return pt;
}

} // namespace

RatePoint maxmin_machine_rate(double r_h_target, const Scenario& scenario, std::span<const double> q,
                              const RegionOptions& options)
{
    if (!(r_h_target >= 0.0))
        throw ConfigError("human rate target must be non-negative");
    if (static_cast<int>(q.size()) != scenario.size())
        throw ConfigError("one pilot power per device required");
    switch (options.config.scheme) {
    case Scheme::SC1: return sc1_point(r_h_target, scenario, q, options, sc1_machine_optimum(scenario, q, options));
    case Scheme::OPA: return opa_machine_rate(r_h_target, scenario, q, options);
    default: return joint_point(r_h_target, scenario, q, options);
    }
}

std::vector<RatePoint> trace_rate_region(const Scenario& scenario, std::span<const double> q,
                                         std::span<const double> r_h_grid, const RegionOptions& options)
{
    if (options.config.scheme == Scheme::OPA)
        return trace_opa_region(scenario, q, r_h_grid, options);
    std::vector<RatePoint> out(r_h_grid.size());
    if (options.config.scheme == Scheme::SC1) {
        const auto machines = sc1_machine_optimum(scenario, q, options);
        parallel_chunks(r_h_grid.size(), options.workers,
                        [&](std::size_t i) { out[i] = sc1_point(r_h_grid[i], scenario, q, options, machines); });
        return out;
    }
    // Ascending human targets: each point bounds the next one's pilot lengths.
    std::vector<std::size_t> order(r_h_grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r_h_grid[a] < r_h_grid[b]; });
    std::vector<double> ceilings;
    for (std::size_t i : order)
        out[i] = joint_point(r_h_grid[i], scenario, q, options, &ceilings);
    return out;
}

RatePoint opa_machine_rate(double r_h_target, const Scenario& scenario, std::span<const double> q,
                           const RegionOptions& options)
{
    SchemeConfig cfg = options.config;
    cfg.scheme = Scheme::OPA;
    const int g = cfg.opa_group_size;
    const int km = scenario.machines();
    const int kh = scenario.humans();
    cfg.validate(kh, km);
    const double p_max = scenario.params().max_data_power_w;

    RatePoint pt;
    pt.scheme = Scheme::OPA;
    pt.receiver = cfg.receiver;
    pt.r_h_target = r_h_target;
    pt.n_p_m = g;
    pt.p.assign(static_cast<std::size_t>(scenario.size()), 0.0);
    const double t_h = sinr_for_rate(r_h_target, cfg.human_prelogs());
    const double prelog = cfg.machine_prelogs(km)[0];

    const int groups = km > 0 ? cfg.opa_group_count(km) : 0;
    double t_m = kInf;
    if (groups == 0) {
        const RateModel model(scenario, cfg, PilotBook{}, {q.begin(), q.end()});
        const auto res = max_machine_target(model, t_h, p_max, options.feasibility, options.bisection);
        pt.solver_iterations = res.iterations;
        pt.feasible = res.feasible;
        if (res.feasible)
            pt.p = res.p;
        return pt;
    }
    for (int grp = 0; grp < groups; ++grp) {
        const auto members = opa_group_members(km, g, grp);
        const Scenario sub = opa_group_scenario(scenario, g, grp);
        std::vector<double> sq = pick(q, 0, kh);
        for (int j : members)
            sq.push_back(q[static_cast<std::size_t>(kh + j)]);
        const PilotBook book = make_orthogonal_book(g, static_cast<int>(members.size()));
        const RateModel model(sub, cfg, book, sq, km);
        const auto res = max_machine_target(model, t_h, p_max, options.feasibility, options.bisection);
        pt.solver_iterations += res.iterations;
        if (!res.feasible)
            return pt;
        t_m = std::min(t_m, res.t_m);
        // Machine powers from this group's own solve; humans keep the last CI's powers.
        for (std::size_t i = 0; i < members.size(); ++i)
            pt.p[static_cast<std::size_t>(kh + members[i])] = res.p[static_cast<std::size_t>(kh) + i];
        for (int k = 0; k < kh; ++k)
            pt.p[static_cast<std::size_t>(k)] = std::max(pt.p[static_cast<std::size_t>(k)], res.p[static_cast<std::size_t>(k)]);
    }
    pt.feasible = true;
    pt.t_m = t_m;
    pt.r_m = prelog * std::log2(1.0 + t_m);
    return pt;
}

std::vector<RatePoint> trace_opa_region(const Scenario& scenario, std::span<const double> q,
                                        std::span<const double> r_h_grid, const RegionOptions& options)
{
    std::vector<RatePoint> out(r_h_grid.size());
    parallel_chunks(r_h_grid.size(), options.workers,
                    [&](std::size_t i) { out[i] = opa_machine_rate(r_h_grid[i], scenario, q, options); });
    return out;
}

double max_human_rate(const Scenario& scenario, std::span<const double> q, const RegionOptions& options)
{
    const int kh = scenario.humans();
    if (kh == 0)
        return 0.0;
    const double p_max = scenario.params().max_data_power_w;

    // Max-min human SINR with machines silent in data: bisection on a common
    // human target below the interference-free bound.
    auto human_bound = [&](const RateModel& model) {
        std::vector<double> p(static_cast<std::size_t>(model.size()), 0.0);
        double hi = kInf;
        for (int k = 0; k < kh; ++k) {
            p[static_cast<std::size_t>(k)] = p_max;
            for (int ph = 0; ph < model.phases(k); ++ph)
                hi = std::min(hi, model.sinr(k, ph, p));
            p[static_cast<std::size_t>(k)] = 0.0;
        }
        return hi;
    };
    auto best_common = [&](const RateModel& model, const FeasibilityOptions& f) {
        std::vector<double> targets(static_cast<std::size_t>(model.size()), 0.0);
        double lo = 0.0;
        double hi = human_bound(model);
        for (int it = 0; it < options.bisection.max_iterations && hi - lo > options.bisection.relative_tolerance * hi;
             ++it) {
            const double mid = 0.5 * (lo + hi);
            std::fill(targets.begin(), targets.begin() + kh, mid);
            const auto r = maxmin_feasible(model, targets, p_max, f);
            (r.feasible ? lo : hi) = mid;
            if (!r.feasible && !r.hit_cap && options.bisection.stop_at_undecided)
                break;
        }
        return lo;
    };

    SchemeConfig cfg = options.config;
    if (cfg.scheme == Scheme::SC1) {
        cfg.alpha = 1.0;
        const Scenario humans = class_only(scenario, DeviceClass::Human);
        const RateModel model(humans, cfg, PilotBook{}, pick(q, 0, kh));
        return cfg.human_prelogs()[0] * std::log2(1.0 + best_common(model, options.feasibility));
    }
    if (cfg.scheme == Scheme::OPA) {
        double worst = kInf;
        const int groups = std::max(1, cfg.opa_group_count(scenario.machines()));
        for (int grp = 0; grp < groups && scenario.machines() > 0; ++grp) {
            const auto members = opa_group_members(scenario.machines(), cfg.opa_group_size, grp);
            const Scenario sub = opa_group_scenario(scenario, cfg.opa_group_size, grp);
            std::vector<double> sq = pick(q, 0, kh);
            for (int j : members)
                sq.push_back(q[static_cast<std::size_t>(kh + j)]);
            const RateModel model(sub, cfg, make_orthogonal_book(cfg.opa_group_size, static_cast<int>(members.size())),
                                  sq, scenario.machines());
            worst = std::min(worst, best_common(model, options.feasibility));
        }
        return cfg.human_prelogs()[0] * std::log2(1.0 + worst);
    }

    // Exact SC3 inversion: bisection on the common human rate itself, below
    // the best rate any human reaches alone at p_max.
    auto best_exact = [&](const RateModel& model, double floor) {
        std::vector<double> p(static_cast<std::size_t>(model.size()), 0.0);
        double hi = kInf;
        for (int k = 0; k < kh; ++k) {
            p[static_cast<std::size_t>(k)] = p_max;
            hi = std::min(hi, model.breakdown(k, p).rate);
            p[static_cast<std::size_t>(k)] = 0.0;
        }
        if (hi <= floor)
            return 0.0;
        std::vector<double> targets(static_cast<std::size_t>(model.size()), 0.0);
        FeasibilityOptions f = options.feasibility;
        double lo = 0.0;
        for (int it = 0; it < options.bisection.max_iterations && hi - lo > options.bisection.relative_tolerance * hi;
             ++it) {
            const double mid = 0.5 * (lo + hi);
            f.sc3_human_rate = mid;
            std::fill(targets.begin(), targets.begin() + kh, sinr_for_rate(mid, model.config().human_prelogs()));
            const auto r = maxmin_feasible(model, targets, p_max, f);
            (r.feasible ? lo : hi) = mid;
            if (!r.feasible && !r.hit_cap && options.bisection.stop_at_undecided)
                break;
        }
        return lo;
    };

    // SC2 / SC3: search the same machine pilot grid as the machine optimisation.
    const bool exact = options.sc3_exact_inversion && cfg.scheme == Scheme::SC3;
    double best = 0.0;
    for (int n_p_m : pilot_grid(scenario, options)) {
        cfg.machine_pilot_length = n_p_m;
        const RateModel model(scenario, cfg, make_book(options.book, n_p_m, scenario.machines(), options.book_seed),
                              {q.begin(), q.end()});
        const auto prelogs = cfg.human_prelogs();
        const double a = std::accumulate(prelogs.begin(), prelogs.end(), 0.0);
        if (exact) {
            best = std::max(best, best_exact(model, best));
            continue;
        }
        if (a * std::log2(1.0 + human_bound(model)) <= best)
            continue;
        const double t = best_common(model, options.feasibility);
        best = std::max(best, a * std::log2(1.0 + t));
    }
    return best;
}

void write_region_csv(std::span<const RatePoint> points, const Scenario& scenario, const RegionOptions& options,
                      std::uint64_t seed, std::ostream& out, bool header)
{
    if (header)
        out << "scheme,receiver,M,R_h_target,R_m,feasible,N_p_m_opt,alpha_opt,solver_iterations,t_m,book_kind,"
               "N,N_p_h,seed\n";
    const auto old_precision = out.precision(12);
    for (const auto& p : points)
        out << to_string(p.scheme) << ',' << to_string(p.receiver) << ',' << scenario.antennas() << ','
            << p.r_h_target << ',' << p.r_m << ',' << (p.feasible ? 1 : 0) << ',' << p.n_p_m << ',' << p.alpha << ','
            << p.solver_iterations << ',' << p.t_m << ','
            << to_string(p.scheme == Scheme::OPA ? PilotKind::Orthogonal : options.book) << ','
            << options.config.coherence_length << ',' << options.config.human_pilot_length << ',' << seed << '\n';
    out.precision(old_precision);
}

} // namespace mtcmimo
