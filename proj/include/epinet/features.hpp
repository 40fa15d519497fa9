#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "epinet/core.hpp"

namespace epinet {

/// Raw gravity volumes P_n*P_m / D_nm^2 between distinct zones, zero on the
/// diagonal. Requires centroids for every zone.
inline Matrix gravity_feature_raw(const Metapopulation& pop) {
    const Eigen::Index n = pop.size();
    for (Eigen::Index k = 0; k < n; ++k)
        require(pop.zone(k).centroid.has_value(), errc::missing_centroid,
                "zone '" + pop.zone(k).id + "' has no centroid");
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto& ca = *pop.zone(a).centroid;
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const auto& cb = *pop.zone(b).centroid;
            const double dx = ca[0] - cb[0];
            const double dy = ca[1] - cb[1];
            const double d2 = dx * dx + dy * dy;
            require(d2 > 0.0, errc::degenerate_distance,
                    "zones '" + pop.zone(a).id + "' and '" + pop.zone(b).id +
                        "' share a centroid");
            const double v = pop.populations()(a) * pop.populations()(b) / d2;
            out(a, b) = v;
            out(b, a) = v;
        }
    }
    return out;
}

/// Gravity-model visitor volume feature, max-normalized to [0, 1].
inline Matrix gravity_feature(const Metapopulation& pop) {
    Matrix raw = gravity_feature_raw(pop);
    const double mx = raw.maxCoeff();
    if (mx > 0.0) raw /= mx;
    return raw;
}

/// Mode-k product of the feature tensor with a weight vector:
/// out_nm = sum_k w_k * x_nm,k.
inline Matrix mode_k_product(const FeatureTensor& x, const RegressionWeights& w) {
    require(w.w.size() == x.features(), errc::dimension_mismatch,
            "weight count must match feature count");
    Matrix out = Matrix::Zero(x.zones(), x.zones());
    for (Eigen::Index k = 0; k < x.features(); ++k) out += w.w(k) * x.slice(k);
    return out;
}

/// Assembles a feature tensor from raw slices, max-normalizing each one.
/// Slices must be non-negative (features are required to correlate positively
/// with mobility; transform negative-correlated inputs upstream) and not all
/// zero.
inline FeatureTensor build_feature_tensor(std::vector<Matrix> slices,
                                          std::vector<std::string> names) {
    require(!slices.empty(), errc::invalid_argument, "need at least one feature slice");
    require(names.size() == slices.size(), errc::invalid_argument,
            "one name per feature slice required");
    for (std::size_t k = 0; k < slices.size(); ++k) {
        Matrix& s = slices[k];
        require(s.rows() == s.cols(), errc::dimension_mismatch, "feature slices must be square");
        require(all_finite(s), errc::non_finite, "feature '" + names[k] + "' has non-finite entries");
        require((s.array() >= 0.0).all(), errc::negative_feature,
                "feature '" + names[k] + "' has negative entries");
        const double mx = s.maxCoeff();
        require(mx > 0.0, errc::degenerate_feature, "feature '" + names[k] + "' is all zero");
        s /= mx;
    }
    return FeatureTensor(std::move(slices), std::move(names));
}

} // namespace epinet
