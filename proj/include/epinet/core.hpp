#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "epinet/errors.hpp"

namespace epinet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// (m + m^T)/2. IEEE addition commutes, so the result compares equal to its
/// own transpose entry for entry.
inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric_exact(const Matrix& m) {
    if (m.rows() != m.cols()) return false;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m.cols(); ++j)
            if (m(i, j) != m(j, i)) return false;
    return true;
}

struct Zone {
    std::string id;
    double population = 0.0;
    std::optional<std::array<double, 2>> centroid; // planar km coordinates

    friend bool operator==(const Zone&, const Zone&) = default;
};

/// A set of sub-populations in canonical order (sorted by zone id). All
/// matrices and series in the library are indexed positionally against this
/// order; the ordering is the single source of truth for index <-> zone.
class Metapopulation {
public:
    explicit Metapopulation(std::vector<Zone> records) {
        require(!records.empty(), errc::empty_zone_list, "no zones given");
        std::sort(records.begin(), records.end(),
                  [](const Zone& a, const Zone& b) { return a.id < b.id; });
        for (std::size_t i = 0; i < records.size(); ++i) {
            const Zone& z = records[i];
            if (i > 0 && z.id == records[i - 1].id)
                fail(errc::duplicate_zone, "zone id '" + z.id + "' appears more than once");
            require(std::isfinite(z.population) && z.population > 0.0,
                    errc::non_positive_population, "zone '" + z.id + "' has population <= 0");
        }
        zones_ = std::move(records);
        pop_.resize(static_cast<Eigen::Index>(zones_.size()));
        for (std::size_t i = 0; i < zones_.size(); ++i)
            pop_(static_cast<Eigen::Index>(i)) = zones_[i].population;
    }

    Eigen::Index size() const { return pop_.size(); }
    const std::vector<Zone>& zones() const { return zones_; }
    const Vector& populations() const { return pop_; }
    double total_population() const { return pop_.sum(); }
    const Zone& zone(Eigen::Index n) const { return zones_[static_cast<std::size_t>(n)]; }

    /// Index of a zone id in canonical order, or -1.
    Eigen::Index index_of(const std::string& id) const {
        auto it = std::lower_bound(zones_.begin(), zones_.end(), id,
                                   [](const Zone& z, const std::string& s) { return z.id < s; });
        if (it == zones_.end() || it->id != id) return -1;
        return static_cast<Eigen::Index>(it - zones_.begin());
    }

    bool has_centroids() const {
        return std::all_of(zones_.begin(), zones_.end(),
                           [](const Zone& z) { return z.centroid.has_value(); });
    }

    friend bool operator==(const Metapopulation& a, const Metapopulation& b) {
        return a.zones_ == b.zones_;
    }

private:
    std::vector<Zone> zones_;
    Vector pop_;
};

inline Metapopulation validate_metapopulation(std::vector<Zone> records) {
    return Metapopulation(std::move(records));
}

/// Daily counts of newly infected persons, T days by N zones, together with
/// the disease recovery rate beta. beta belongs to the series because it is
/// disease knowledge, not a solver knob.
class OutbreakSeries {
public:
    OutbreakSeries(Matrix deltas, std::string day0, double beta)
        : deltas_(std::move(deltas)), day0_(std::move(day0)), beta_(beta) {
        require(deltas_.rows() >= 1 && deltas_.cols() >= 1, errc::invalid_series,
                "need at least one day and one zone");
        require(all_finite(deltas_), errc::non_finite, "delta counts must be finite");
        require((deltas_.array() >= 0.0).all(), errc::negative_entry,
                "delta counts must be non-negative");
        require(std::isfinite(beta_) && beta_ > 0.0 && beta_ <= 1.0, errc::invalid_argument,
                "beta must be in (0, 1]");
    }

    Eigen::Index days() const { return deltas_.rows(); }
    Eigen::Index zones() const { return deltas_.cols(); }
    const Matrix& deltas() const { return deltas_; }
    const std::string& day0() const { return day0_; }
    double beta() const { return beta_; }

    /// Cumulative infections per zone over the whole series.
    Vector totals() const { return deltas_.colwise().sum().transpose(); }

    /// Checks the series against the populations it is indexed by.
    void check_against(const Metapopulation& pop) const {
        require(zones() == pop.size(), errc::dimension_mismatch,
                "series has " + std::to_string(zones()) + " zones, metapopulation has " +
                    std::to_string(pop.size()));
        Vector tot = totals();
        for (Eigen::Index n = 0; n < pop.size(); ++n)
            require(tot(n) <= pop.populations()(n) * (1.0 + 1e-12), errc::invalid_series,
                    "cumulative infections in zone '" + pop.zone(n).id + "' exceed its population");
    }

    friend bool operator==(const OutbreakSeries& a, const OutbreakSeries& b) {
        return a.day0_ == b.day0_ && a.beta_ == b.beta_ && a.deltas_.rows() == b.deltas_.rows() &&
               a.deltas_.cols() == b.deltas_.cols() && (a.deltas_.array() == b.deltas_.array()).all();
    }

private:
    Matrix deltas_; // T x N
    std::string day0_;
    double beta_;
};

/// Incidence rates u and effective infectious counts v, both T x N, derived
/// from an OutbreakSeries.
struct StateSeries {
    Matrix u; // incidence rate per zone and day, in [0, 1]
    Matrix v; // recovery-discounted infectious mass, >= 0

    Eigen::Index days() const { return u.rows(); }
    Eigen::Index zones() const { return u.cols(); }
};

/// Symmetric non-negative N x N adjacency of the inferred infection network.
class InfectionNetwork {
public:
    explicit InfectionNetwork(Matrix g) : g_(std::move(g)) {
        require(g_.rows() == g_.cols(), errc::dimension_mismatch, "adjacency must be square");
        require(all_finite(g_), errc::non_finite, "adjacency entries must be finite");
        require((g_.array() >= 0.0).all(), errc::negative_entry,
                "adjacency entries must be non-negative");
        require(is_symmetric_exact(g_), errc::invalid_argument,
                "adjacency must be exactly symmetric");
    }

    /// Builds from an arbitrary square matrix by averaging with its transpose.
    static InfectionNetwork from_symmetrizing(const Matrix& m) {
        return InfectionNetwork(symmetrized(m));
    }

    Eigen::Index size() const { return g_.rows(); }
    const Matrix& g() const { return g_; }

    /// Out-degree of every node excluding the self loop.
    Vector off_diagonal_degrees() const {
        return g_.rowwise().sum() - g_.diagonal();
    }

    friend bool operator==(const InfectionNetwork& a, const InfectionNetwork& b) {
        return a.g_.rows() == b.g_.rows() && (a.g_.array() == b.g_.array()).all();
    }

private:
    Matrix g_;
};

/// Average daily visitor volumes h_nm between zones. The diagonal carries the
/// within-zone convention h_nn = P_n/2 and is set at construction.
class MobilityVolumes {
public:
    MobilityVolumes(Matrix h, const Metapopulation& pop) : h_(std::move(h)) {
        require(h_.rows() == h_.cols() && h_.rows() == pop.size(), errc::dimension_mismatch,
                "mobility matrix shape must match the metapopulation");
        require(all_finite(h_), errc::non_finite, "mobility volumes must be finite");
        require((h_.array() >= 0.0).all(), errc::negative_entry,
                "mobility volumes must be non-negative");
        h_.diagonal() = 0.5 * pop.populations();
    }

    Eigen::Index size() const { return h_.rows(); }
    const Matrix& h() const { return h_; }

    friend bool operator==(const MobilityVolumes& a, const MobilityVolumes& b) {
        return a.h_.rows() == b.h_.rows() && (a.h_.array() == b.h_.array()).all();
    }

private:
    Matrix h_;
};

/// K prior-feature slices, each N x N, non-negative and max-normalized to 1.
class FeatureTensor {
public:
    FeatureTensor(std::vector<Matrix> slices, std::vector<std::string> names)
        : slices_(std::move(slices)), names_(std::move(names)) {
        require(!slices_.empty(), errc::invalid_argument, "feature tensor needs at least one slice");
        require(names_.size() == slices_.size(), errc::invalid_argument,
                "one name per feature slice required");
        const Eigen::Index n = slices_.front().rows();
        for (const Matrix& s : slices_) {
            require(s.rows() == n && s.cols() == n, errc::dimension_mismatch,
                    "all feature slices must be N x N");
            require(all_finite(s), errc::non_finite, "feature entries must be finite");
            require((s.array() >= 0.0).all(), errc::negative_feature,
                    "feature entries must be non-negative");
            const double mx = s.maxCoeff();
            require(std::abs(mx - 1.0) <= 1e-9, errc::invalid_argument,
                    "feature slices must be max-normalized to 1");
        }
    }

    Eigen::Index zones() const { return slices_.front().rows(); }
    Eigen::Index features() const { return static_cast<Eigen::Index>(slices_.size()); }
    const Matrix& slice(Eigen::Index k) const { return slices_[static_cast<std::size_t>(k)]; }
    const std::vector<Matrix>& slices() const { return slices_; }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<Matrix> slices_;
    std::vector<std::string> names_;
};

/// Non-negative regression weights, one per feature slice.
struct RegressionWeights {
    Vector w;

    explicit RegressionWeights(Vector weights) : w(std::move(weights)) {
        require(w.size() >= 1, errc::invalid_argument, "need at least one weight");
        require(w.allFinite(), errc::non_finite, "weights must be finite");
        require((w.array() >= 0.0).all(), errc::negative_entry, "weights must be non-negative");
    }
};

struct FixedStep {
    double step = 0.01;
    friend bool operator==(const FixedStep&, const FixedStep&) = default;
};

struct BacktrackingStep {
    double init = 1.0;
    double shrink = 0.5;
    double armijo_c = 1e-4;
    friend bool operator==(const BacktrackingStep&, const BacktrackingStep&) = default;
};

using StepPolicy = std::variant<FixedStep, BacktrackingStep>;

/// Solver hyperparameters. lambda weights the power-law degree prior, eta the
/// data prior residual, mu the weight decay on w, l1/l2 the plain-norm
/// baselines. epsilon_deg keeps the log-degree term finite at zero degree.
struct InferenceConfig {
    double lambda = 0.0;
    double eta = 0.0;
    double mu = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    int max_iters = 5000;
    double tol = 1e-7;
    StepPolicy step_policy = BacktrackingStep{};
    double epsilon_deg = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        require(lambda >= 0 && eta >= 0 && mu >= 0 && l1 >= 0 && l2 >= 0, errc::invalid_argument,
                "regularization weights must be non-negative");
        require(max_iters > 0, errc::invalid_argument, "max_iters must be positive");
        require(std::isfinite(tol) && tol > 0, errc::invalid_argument, "tol must be positive");
        require(std::isfinite(epsilon_deg) && epsilon_deg > 0, errc::invalid_argument,
                "epsilon_deg must be positive");
        if (const auto* f = std::get_if<FixedStep>(&step_policy))
            require(f->step > 0, errc::invalid_argument, "fixed step must be positive");
        if (const auto* b = std::get_if<BacktrackingStep>(&step_policy)) {
            require(b->init > 0, errc::invalid_argument, "backtracking init must be positive");
            require(b->shrink > 0 && b->shrink < 1, errc::invalid_argument,
                    "backtracking shrink must be in (0, 1)");
            require(b->armijo_c > 0 && b->armijo_c < 1, errc::invalid_argument,
                    "armijo constant must be in (0, 1)");
        }
    }
};

} // namespace epinet
