#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "epinet/core.hpp"
#include "epinet/features.hpp"

namespace epinet {

enum class Variant { basic, plpri, datpri, l1pri, l2pri, d2pri };

inline const char* variant_name(Variant v) {
    switch (v) {
    case Variant::basic: return "basic";
    case Variant::plpri: return "plpri";
    case Variant::datpri: return "datpri";
    case Variant::l1pri: return "l1pri";
    case Variant::l2pri: return "l2pri";
    case Variant::d2pri: return "d2pri";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    for (Variant v : {Variant::basic, Variant::plpri, Variant::datpri, Variant::l1pri,
                      Variant::l2pri, Variant::d2pri})
        if (s == variant_name(v)) return v;
    fail(errc::invalid_argument, "unknown model variant '" + s + "'");
}

inline bool uses_data_prior(Variant v) { return v == Variant::datpri || v == Variant::d2pri; }

/// Sum-of-squares fit residual sum_t || u(t) - G v(t) ||^2.
inline double objective_j1(const Matrix& g, const StateSeries& states) {
    require(g.rows() == g.cols() && g.rows() == states.zones(), errc::dimension_mismatch,
            "network and state dimensions must agree");
    const Matrix residual = states.u.transpose() - g * states.v.transpose();
    return residual.squaredNorm();
}

namespace detail {

inline Vector off_diagonal_degrees(const Matrix& g) {
    return g.rowwise().sum() - g.diagonal();
}

inline double degree_log_term(const Matrix& g, double epsilon_deg) {
    const Vector deg = off_diagonal_degrees(g);
    double acc = 0.0;
    for (Eigen::Index n = 0; n < deg.size(); ++n) acc += std::log(epsilon_deg + deg(n));
    return acc;
}

} // namespace detail

/// The jointly regularized objective
///   J = J1 + lambda * sum_n ln(eps + sum_{m != n} g_nm)
///       + eta * ||G - X x_k w||_F^2 + mu * ||w||^2.
inline double objective_full(const Matrix& g, const Vector& w, const StateSeries& states,
                             const FeatureTensor& x, const InferenceConfig& cfg) {
    double j = objective_j1(g, states);
    if (cfg.lambda != 0.0) j += cfg.lambda * detail::degree_log_term(g, cfg.epsilon_deg);
    if (cfg.eta != 0.0) {
        const Matrix xw = mode_k_product(x, RegressionWeights(w));
        j += cfg.eta * (g - xw).squaredNorm();
    }
    if (cfg.mu != 0.0) j += cfg.mu * w.squaredNorm();
    return j;
}

/// Exact entrywise partial derivatives of objective_full with respect to G.
inline Matrix grad_g_raw(const Matrix& g, const Vector& w, const StateSeries& states,
                         const FeatureTensor& x, const InferenceConfig& cfg) {
    require(g.rows() == g.cols() && g.rows() == states.zones(), errc::dimension_mismatch,
            "network and state dimensions must agree");
    const Matrix v = states.v.transpose(); // N x T
    const Matrix u = states.u.transpose();
    Matrix grad = 2.0 * (g * v - u) * v.transpose();
    if (cfg.lambda != 0.0) {
        const Vector deg = detail::off_diagonal_degrees(g);
        for (Eigen::Index n = 0; n < g.rows(); ++n) {
            const double pen = cfg.lambda / (cfg.epsilon_deg + deg(n));
            for (Eigen::Index m = 0; m < g.cols(); ++m)
                if (m != n) grad(n, m) += pen;
        }
    }
    if (cfg.eta != 0.0) grad += 2.0 * cfg.eta * (g - mode_k_product(x, RegressionWeights(w)));
    require(grad.allFinite(), errc::numerical_blowup, "non-finite gradient");
    return grad;
}

/// Gradient of objective_full projected onto symmetric matrices; this is the
/// direction a projected step over symmetric non-negative networks descends.
inline Matrix grad_g(const Matrix& g, const Vector& w, const StateSeries& states,
                     const FeatureTensor& x, const InferenceConfig& cfg) {
    return symmetrized(grad_g_raw(g, w, states, x, cfg));
}

/// Partial derivatives of objective_full with respect to the regression
/// weights: dJ/dw_k = -2 eta <G - X x_k w, X_k> + 2 mu w_k.
inline Vector grad_w(const Matrix& g, const Vector& w, const FeatureTensor& x,
                     const InferenceConfig& cfg) {
    require(w.size() == x.features(), errc::dimension_mismatch,
            "weight count must match feature count");
    require(g.rows() == x.zones() && g.cols() == x.zones(), errc::dimension_mismatch,
            "network and feature dimensions must agree");
    Vector grad = 2.0 * cfg.mu * w;
    if (cfg.eta != 0.0) {
        const Matrix residual = g - mode_k_product(x, RegressionWeights(w));
        for (Eigen::Index k = 0; k < x.features(); ++k)
            grad(k) -= 2.0 * cfg.eta * residual.cwiseProduct(x.slice(k)).sum();
    }
    require(grad.allFinite(), errc::numerical_blowup, "non-finite gradient");
    return grad;
}

struct InferenceResult {
    InfectionNetwork g;
    std::optional<RegressionWeights> w;
    std::vector<double> objective_trace; // value at init, then after each iteration
    int iterations = 0;
    bool converged = false;
};

/// Thrown when the fixed-step policy keeps increasing the objective.
class DivergedError : public Error {
public:
    DivergedError(std::string what, std::vector<double> trace)
        : Error(errc::diverged, std::move(what)), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

namespace detail {

/// Precomputed quadratic form of J1 plus the regularization weights in
/// effect. J1(G) = cu - 2<G,C> + <G, G S> with S = sum_t v v^T, C = sum_t u v^T.
struct SpgdProblem {
    Matrix S;
    Matrix C;
    double cu = 0.0;
    double lambda = 0.0, eta = 0.0, mu = 0.0, l1 = 0.0, l2 = 0.0;
    double epsilon_deg = 1e-8;
    const FeatureTensor* x = nullptr;

    static SpgdProblem build(const StateSeries& states, const FeatureTensor* x,
                             const InferenceConfig& cfg, Variant variant) {
        SpgdProblem p;
        const Matrix v = states.v.transpose();
        const Matrix u = states.u.transpose();
        p.S = v * v.transpose();
        p.C = u * v.transpose();
        p.cu = u.squaredNorm();
        p.epsilon_deg = cfg.epsilon_deg;
        p.x = x;
        // Weights not used by the chosen variant are forced to zero.
        switch (variant) {
        case Variant::basic: break;
        case Variant::plpri: p.lambda = cfg.lambda; break;
        case Variant::datpri: p.eta = cfg.eta; p.mu = cfg.mu; break;
        case Variant::l1pri: p.l1 = cfg.l1; break;
        case Variant::l2pri: p.l2 = cfg.l2; break;
        case Variant::d2pri: p.lambda = cfg.lambda; p.eta = cfg.eta; p.mu = cfg.mu; break;
        }
        return p;
    }

    double j1(const Matrix& g) const {
        return cu - 2.0 * g.cwiseProduct(C).sum() + g.cwiseProduct(g * S).sum();
    }

    /// All differentiable terms (everything except the l1 penalty).
    double smooth(const Matrix& g, const Vector& w, const Matrix& xw) const {
        double j = j1(g);
        if (lambda != 0.0) j += lambda * degree_log_term(g, epsilon_deg);
        if (eta != 0.0) j += eta * (g - xw).squaredNorm();
        if (mu != 0.0) j += mu * w.squaredNorm();
        if (l2 != 0.0) j += l2 * g.squaredNorm();
        return j;
    }

    double total(const Matrix& g, const Vector& w, const Matrix& xw) const {
        double j = smooth(g, w, xw);
        if (l1 != 0.0) j += l1 * g.sum(); // g >= 0, so the L1 norm is the plain sum
        return j;
    }

    Matrix grad_g_smooth(const Matrix& g, const Matrix& xw) const {
        Matrix grad = 2.0 * (g * S - C);
        if (lambda != 0.0) {
            const Vector deg = off_diagonal_degrees(g);
            for (Eigen::Index n = 0; n < g.rows(); ++n) {
                const double pen = lambda / (epsilon_deg + deg(n));
                for (Eigen::Index m = 0; m < g.cols(); ++m)
                    if (m != n) grad(n, m) += pen;
            }
        }
        if (eta != 0.0) grad += 2.0 * eta * (g - xw);
        if (l2 != 0.0) grad += 2.0 * l2 * g;
        return grad;
    }

    Vector grad_w(const Matrix& g, const Vector& w, const Matrix& xw) const {
        Vector grad = 2.0 * mu * w;
        if (eta != 0.0) {
            const Matrix residual = g - xw;
            for (Eigen::Index k = 0; k < x->features(); ++k)
                grad(k) -= 2.0 * eta * residual.cwiseProduct(x->slice(k)).sum();
        }
        return grad;
    }

    Matrix mode_k(const Vector& w) const {
        Matrix out = Matrix::Zero(S.rows(), S.cols());
        if (x)
            for (Eigen::Index k = 0; k < x->features(); ++k) out += w(k) * x->slice(k);
        return out;
    }
};

/// Projection-arc step on G: gradient move, one-sided soft threshold by the
/// l1 weight, projection onto the non-negative orthant. Symmetry is preserved
/// because the gradient is symmetrized and all updates are entrywise.
inline Matrix g_candidate(const Matrix& g, const Matrix& dir, double step, double l1) {
    return ((g - step * dir).array() - step * l1).matrix();
}

inline Matrix project_nonneg(const Matrix& m) { return m.cwiseMax(0.0); }

} // namespace detail

/// Semi-supervised proximal gradient descent over (G, w): alternates a
/// projected gradient step on the network with one on the regression weights
/// until the relative objective change drops below tol. g0/w0 override the
/// random initialization (warm starts); g0 must be symmetric non-negative.
inline InferenceResult spgd_infer(const StateSeries& states, const FeatureTensor* x,
                                  const InferenceConfig& cfg, Variant variant,
                                  const Matrix* g0 = nullptr, const Vector* w0 = nullptr) {
    cfg.validate();
    require(states.days() >= 1 && states.zones() >= 1, errc::invalid_argument,
            "state series must be nonempty");
    if (uses_data_prior(variant))
        require(x != nullptr, errc::missing_features,
                std::string(variant_name(variant)) + " needs a feature tensor");
    if (x)
        require(x->zones() == states.zones(), errc::dimension_mismatch,
                "feature tensor and state dimensions must agree");

    const Eigen::Index n = states.zones();
    const detail::SpgdProblem prob =
        detail::SpgdProblem::build(states, uses_data_prior(variant) ? x : nullptr, cfg, variant);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // G starts i.i.d. uniform on (0, 1/N], then symmetrized; w uniform on (0, 1].
    Matrix g(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) g(r, c) = (1.0 - unit(rng)) / static_cast<double>(n);
    g = symmetrized(g);
    if (g0) {
        require(g0->rows() == n && g0->cols() == n, errc::dimension_mismatch, "bad g0 shape");
        require(is_symmetric_exact(*g0) && (g0->array() >= 0.0).all(), errc::invalid_argument,
                "g0 must be symmetric and non-negative");
        g = *g0;
    }
    Vector w;
    if (uses_data_prior(variant)) {
        w.resize(x->features());
        for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = 1.0 - unit(rng);
        if (w0) {
            require(w0->size() == w.size(), errc::dimension_mismatch, "bad w0 shape");
            w = w0->cwiseMax(0.0);
        }
    } else {
        w = Vector::Zero(0);
    }

    Matrix xw = prob.mode_k(w);
    double objective = prob.total(g, w, xw);
    std::vector<double> trace{objective};

    const auto* fixed = std::get_if<FixedStep>(&cfg.step_policy);
    const auto* back = std::get_if<BacktrackingStep>(&cfg.step_policy);
    constexpr int divergence_guard = 10;
    constexpr double min_step = 1e-18;
    int increases = 0;
    int iterations = 0;
    bool converged = false;

    for (int l = 1; l <= cfg.max_iters; ++l) {
        iterations = l;

        // G-step
        {
            const Matrix dir = symmetrized(prob.grad_g_smooth(g, xw));
            require(dir.allFinite(), errc::numerical_blowup, "non-finite gradient on G");
            if (fixed) {
                g = detail::project_nonneg(detail::g_candidate(g, dir, fixed->step, prob.l1));
            } else {
                const double f0 = prob.total(g, w, xw);
                double s = back->init;
                while (true) {
                    const Matrix cand =
                        detail::project_nonneg(detail::g_candidate(g, dir, s, prob.l1));
                    const double fc = prob.total(cand, w, xw);
                    const double move2 = (cand - g).squaredNorm();
                    if (fc <= f0 - (back->armijo_c / s) * move2) {
                        g = cand;
                        break;
                    }
                    s *= back->shrink;
                    if (s < min_step) break; // no acceptable move: keep g
                }
            }
        }

        // w-step
        if (uses_data_prior(variant)) {
            const Vector dir = prob.grad_w(g, w, xw);
            require(dir.allFinite(), errc::numerical_blowup, "non-finite gradient on w");
            if (fixed) {
                w = (w - fixed->step * dir).cwiseMax(0.0);
                xw = prob.mode_k(w);
            } else {
                const double f0 = prob.total(g, w, xw);
                double s = back->init;
                while (true) {
                    const Vector cand = (w - s * dir).cwiseMax(0.0);
                    const Matrix cand_xw = prob.mode_k(cand);
                    const double fc = prob.total(g, cand, cand_xw);
                    const double move2 = (cand - w).squaredNorm();
                    if (fc <= f0 - (back->armijo_c / s) * move2) {
                        w = cand;
                        xw = cand_xw;
                        break;
                    }
                    s *= back->shrink;
                    if (s < min_step) break;
                }
            }
        }

        const double next = prob.total(g, w, xw);
        require(std::isfinite(next), errc::numerical_blowup, "objective became non-finite");
        trace.push_back(next);

        if (fixed) {
            if (next > objective + 1e-12 * std::max(1.0, std::abs(objective))) {
                if (++increases > divergence_guard)
                    throw DivergedError("fixed-step objective increased for " +
                                            std::to_string(increases) + " consecutive iterations",
                                        trace);
            } else {
                increases = 0;
            }
        }

        const double rel = std::abs(next - objective) / std::max(std::abs(objective), 1e-12);
        objective = next;
        if (rel < cfg.tol) {
            converged = true;
            break;
        }
    }

    std::optional<RegressionWeights> weights;
    if (uses_data_prior(variant)) weights = RegressionWeights(w);
    return InferenceResult{InfectionNetwork(std::move(g)), std::move(weights), std::move(trace),
                           iterations, converged};
}

/// Closed-form scalar least squares for the infection-rate adjustment:
/// argmin_a sum_t ||u(t) - a G v(t)||^2 clamped to a >= 0.
inline double fit_alpha_adjustment(const InfectionNetwork& g_ref, const StateSeries& states) {
    require(g_ref.size() == states.zones(), errc::dimension_mismatch,
            "network and state dimensions must agree");
    const Matrix a = g_ref.g() * states.v.transpose(); // N x T of G v(t)
    const double den = a.squaredNorm();
    require(den > 0.0, errc::no_signal, "G v(t) vanishes for every day");
    const double num = states.u.transpose().cwiseProduct(a).sum();
    return std::max(0.0, num / den);
}

} // namespace epinet
