#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "epinet/core.hpp"

namespace epinet {

/// Compartment counts per zone. Conservation s + i + r = P is maintained by
/// every operation that produces one of these.
struct SirState {
    Vector s;
    Vector i;
    Vector r;

    Eigen::Index zones() const { return s.size(); }
};

inline void check_sir(const SirState& st, const Metapopulation& pop, double rel_tol = 1e-9) {
    require(st.s.size() == pop.size() && st.i.size() == pop.size() && st.r.size() == pop.size(),
            errc::dimension_mismatch, "state size must match metapopulation");
    for (Eigen::Index n = 0; n < pop.size(); ++n) {
        require(st.s(n) >= 0 && st.i(n) >= 0 && st.r(n) >= 0, errc::negative_entry,
                "compartments must be non-negative");
        const double p = pop.populations()(n);
        require(std::abs(st.s(n) + st.i(n) + st.r(n) - p) <= rel_tol * p, errc::invalid_argument,
                "s + i + r must equal the zone population");
    }
}

namespace detail {
inline void check_rates(double alpha, double beta, double dt) {
    require(std::isfinite(alpha) && alpha >= 0, errc::invalid_argument, "alpha must be >= 0");
    require(std::isfinite(beta) && beta >= 0 && beta <= 1, errc::invalid_argument,
            "beta must be in [0, 1]");
    require(std::isfinite(dt) && dt > 0, errc::invalid_argument, "dt must be positive");
}
} // namespace detail

/// One explicit-Euler step of the single-population SIR dynamics
/// ds = -alpha*s*i*dt, di = (alpha*s*i - beta*i)*dt, dr = beta*i*dt.
/// New infections are clamped so s never goes negative.
inline SirState step_single_sir(const SirState& st, double alpha, double beta, double dt) {
    detail::check_rates(alpha, beta, dt);
    require(st.zones() == 1, errc::dimension_mismatch, "single-population step needs N = 1");
    require(st.s(0) >= 0 && st.i(0) >= 0 && st.r(0) >= 0, errc::negative_entry,
            "compartments must be non-negative");
    const double new_inf = std::min(alpha * st.s(0) * st.i(0) * dt, st.s(0));
    const double recov = std::min(beta * st.i(0) * dt, st.i(0) + new_inf);
    SirState out = st;
    out.s(0) = st.s(0) - new_inf;
    out.i(0) = st.i(0) + new_inf - recov;
    out.r(0) = st.r(0) + recov;
    return out;
}

/// One explicit-Euler step of the metapopulation SIR dynamics. The contact
/// pressure on zone n is sum_m (h_mn/P_m + h_nm/P_n) * i_m; with the
/// h_nn = P_n/2 convention the within-zone term reduces to i_n.
inline SirState step_metapop_sir(const SirState& st, const MobilityVolumes& h,
                                 const Metapopulation& pop, double alpha, double beta, double dt) {
    detail::check_rates(alpha, beta, dt);
    require(st.zones() == pop.size() && h.size() == pop.size(), errc::dimension_mismatch,
            "state, mobility and metapopulation sizes must agree");
    const Vector& p = pop.populations();
    const Matrix inflow = (h.h().array().colwise() / p.array()).matrix(); // h_nm / P_n
    const Vector pressure = inflow.transpose() * st.i + inflow * st.i;
    SirState out = st;
    for (Eigen::Index n = 0; n < pop.size(); ++n) {
        const double new_inf = std::min(alpha * st.s(n) * pressure(n) * dt, st.s(n));
        const double recov = std::min(beta * st.i(n) * dt, st.i(n) + new_inf);
        out.s(n) = st.s(n) - new_inf;
        out.i(n) = st.i(n) + new_inf - recov;
        out.r(n) = st.r(n) + recov;
    }
    return out;
}

/// Euler integration over a time span, stepping at dt (default 0.1 day).
inline SirState integrate_single_sir(SirState st, double alpha, double beta, double days,
                                     double dt = 0.1) {
    const int steps = static_cast<int>(std::llround(days / dt));
    for (int k = 0; k < steps; ++k) st = step_single_sir(st, alpha, beta, dt);
    return st;
}

inline SirState integrate_metapop_sir(SirState st, const MobilityVolumes& h,
                                      const Metapopulation& pop, double alpha, double beta,
                                      double days, double dt = 0.1) {
    const int steps = static_cast<int>(std::llround(days / dt));
    for (int k = 0; k < steps; ++k) st = step_metapop_sir(st, h, pop, alpha, beta, dt);
    return st;
}

/// Walks the daily bookkeeping shared by state reconstruction, simulation and
/// rollout prediction. After absorbing days 1..t-1 the accessors give the
/// day-t susceptible counts and infectious mass:
///   s(t) = P - sum_{tau<t} delta(tau)
///   v(t) = sum_{tau<t} (1-beta)^{t-tau-1} delta(tau)
class DailyRecursion {
public:
    DailyRecursion(const Metapopulation& pop, double beta)
        : s_(pop.populations()), v_(Vector::Zero(pop.size())), beta_(beta) {
        require(beta > 0 && beta <= 1, errc::invalid_argument, "beta must be in (0, 1]");
    }

    void absorb(const Vector& delta) {
        v_ = (1.0 - beta_) * v_ + delta;
        s_ -= delta;
    }

    const Vector& susceptible() const { return s_; }
    const Vector& infectious_mass() const { return v_; }
    double beta() const { return beta_; }

private:
    Vector s_;
    Vector v_;
    double beta_;
};

/// Derives incidence rates u and infectious mass v from daily new-infection
/// counts: u_n(T) = delta_n(T) / (P_n - sum_{t<T} delta_n(t)),
/// v_n(T) = sum_{t<T} (1-beta)^{T-t-1} delta_n(t).
inline StateSeries states_from_deltas(const OutbreakSeries& series, const Metapopulation& pop) {
    series.check_against(pop);
    const Eigen::Index days = series.days();
    const Eigen::Index zones = series.zones();
    StateSeries out;
    out.u.resize(days, zones);
    out.v.resize(days, zones);
    DailyRecursion rec(pop, series.beta());
    for (Eigen::Index t = 0; t < days; ++t) {
        const Vector delta = series.deltas().row(t).transpose();
        for (Eigen::Index n = 0; n < zones; ++n) {
            const double s = rec.susceptible()(n);
            if (delta(n) > 0.0)
                require(s > 0.0, errc::exhausted_population,
                        "zone '" + pop.zone(n).id + "' has no susceptible individuals left on day " +
                            std::to_string(t + 1));
            const double u = (delta(n) > 0.0) ? delta(n) / s : 0.0;
            require(u <= 1.0 + 1e-12, errc::invalid_series,
                    "incidence rate above 1 in zone '" + pop.zone(n).id + "'");
            out.u(t, n) = std::min(u, 1.0);
        }
        out.v.row(t) = rec.infectious_mass().transpose();
        rec.absorb(delta);
    }
    return out;
}

/// Rebuilds the SIR state at day T (1-based) from case counts:
/// s via the running product of (1 - u), i as the infectious mass v(T),
/// r as the remainder.
inline SirState reconstruct_sir(const OutbreakSeries& series, const Metapopulation& pop,
                                Eigen::Index at_day) {
    require(at_day >= 1 && at_day <= series.days(), errc::invalid_argument,
            "reconstruction day out of range");
    const StateSeries st = states_from_deltas(series, pop);
    SirState out;
    out.s = pop.populations();
    for (Eigen::Index t = 0; t + 1 < at_day; ++t)
        out.s.array() *= (1.0 - st.u.row(t).array()).transpose();
    out.i = st.v.row(at_day - 1).transpose();
    out.r = pop.populations() - out.s - out.i;
    for (Eigen::Index n = 0; n < pop.size(); ++n)
        if (out.r(n) < 0) {
            require(out.r(n) > -1e-9 * pop.populations()(n), errc::negative_entry,
                    "negative recovered count");
            out.r(n) = 0.0;
        }
    return out;
}

/// A simulated outbreak plus the number of entries where the incidence rate
/// had to be clamped into [0, 1].
struct SimulatedOutbreak {
    OutbreakSeries series;
    std::int64_t clamp_events = 0;
};

/// Continues an observed prefix for `horizon` more days under the network
/// interaction recursion u(t) = G v(t), delta(t) = u(t) .* s(t). Deterministic;
/// clamping of u into [0, 1] is counted, not silent.
inline SimulatedOutbreak simulate_outbreak(const InfectionNetwork& g, const Metapopulation& pop,
                                           const OutbreakSeries& prefix, Eigen::Index horizon) {
    require(g.size() == pop.size(), errc::dimension_mismatch,
            "network size must match metapopulation");
    prefix.check_against(pop);
    require(horizon >= 0, errc::invalid_argument, "horizon must be >= 0");

    const Eigen::Index t0 = prefix.days();
    Matrix deltas(t0 + horizon, pop.size());
    deltas.topRows(t0) = prefix.deltas();

    DailyRecursion rec(pop, prefix.beta());
    for (Eigen::Index t = 0; t < t0; ++t) rec.absorb(prefix.deltas().row(t).transpose());

    std::int64_t clamps = 0;
    for (Eigen::Index t = t0; t < t0 + horizon; ++t) {
        Vector u = g.g() * rec.infectious_mass();
        for (Eigen::Index n = 0; n < u.size(); ++n) {
            if (u(n) < 0.0 || u(n) > 1.0) ++clamps;
            u(n) = std::clamp(u(n), 0.0, 1.0);
        }
        const Vector delta = (u.array() * rec.susceptible().array().max(0.0)).matrix();
        deltas.row(t) = delta.transpose();
        rec.absorb(delta);
    }
    return SimulatedOutbreak{OutbreakSeries(std::move(deltas), prefix.day0(), prefix.beta()),
                             clamps};
}

} // namespace epinet
