#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "assocnet/activation.hpp"
#include "assocnet/error.hpp"

#include <json.hpp>

namespace assocnet {

enum class NormMode { l1, max, zscore };

inline NormMode parse_norm_mode(std::string_view s) {
    if (s == "l1") return NormMode::l1;
    if (s == "max") return NormMode::max;
    if (s == "zscore") return NormMode::zscore;
    fail("stats: unknown normalization mode '", s, "' (expected l1, max or zscore)");
}

inline const char* norm_mode_name(NormMode m) {
    switch (m) {
        case NormMode::l1: return "l1";
        case NormMode::max: return "max";
        case NormMode::zscore: return "zscore";
    }
    return "?";
}

namespace detail {

// In-place normalization of one vector; degenerate vectors (zero sum, zero
// max, zero variance) pass through unchanged.
template <typename Access>
void normalize_slice(std::size_t len, NormMode mode, Access at) {
    if (len == 0) return;
    switch (mode) {
        case NormMode::l1: {
            double sum = 0.0;
            for (std::size_t i = 0; i < len; ++i) sum += at(i);
            if (sum == 0.0) return;
            for (std::size_t i = 0; i < len; ++i) at(i) /= sum;
            break;
        }
        case NormMode::max: {
            double mx = 0.0;
            for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, at(i));
            if (mx == 0.0) return;
            for (std::size_t i = 0; i < len; ++i) at(i) /= mx;
            break;
        }
        case NormMode::zscore: {
            double mean = 0.0;
            for (std::size_t i = 0; i < len; ++i) mean += at(i);
            mean /= static_cast<double>(len);
            double var = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                double d = at(i) - mean;
                var += d * d;
            }
            var /= static_cast<double>(len);
            if (var == 0.0) return;
            const double sd = std::sqrt(var);
            for (std::size_t i = 0; i < len; ++i) at(i) = (at(i) - mean) / sd;
            break;
        }
    }
}

// Mid-ranks (1-based); ties share the average of the ranks they span.
inline std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double normal_two_sided_p(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace detail

// Column pass then row pass, same mode for both.
inline ActivationMatrix normalize(const ActivationMatrix& m, NormMode mode) {
    ActivationMatrix out = m;
    for (auto& col : out.columns)
        detail::normalize_slice(col.size(), mode, [&](std::size_t i) -> double& { return col[i]; });
    for (std::size_t r = 0; r < out.rows(); ++r)
        detail::normalize_slice(out.cols(), mode,
                                [&](std::size_t j) -> double& { return out.columns[j][r]; });
    return out;
}

// Wilcoxon signed-rank test for paired samples, normal approximation with
// mid-ranks and the standard tie correction, no continuity correction.
// effect_r = z / sqrt(n).
struct PairedTestResult {
    std::size_t n = 0;       // pairs remaining after zero-difference removal
    double w_plus = 0.0;
    double w_minus = 0.0;
    double z = 0.0;
    double p = 1.0;
    double effect_r = 0.0;

    nlohmann::json to_json() const {
        return {{"n", n},      {"w_plus", w_plus}, {"w_minus", w_minus},
                {"z", z},      {"p", p},           {"effect_r", effect_r}};
    }
};

inline PairedTestResult wilcoxon_paired(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "wilcoxon: paired samples must have equal length");
    require(x.size() >= 5, "wilcoxon: need at least 5 pairs, got ", x.size());

    std::vector<double> diffs;
    diffs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    const std::size_t n = diffs.size();
    require(n >= 5, "wilcoxon: fewer than 5 nonzero differences (", n, ")");

    std::vector<double> abs_d(n);
    for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[i]);
    const std::vector<double> ranks = detail::midranks(abs_d);

    PairedTestResult res;
    res.n = n;
    for (std::size_t i = 0; i < n; ++i)
        (diffs[i] > 0.0 ? res.w_plus : res.w_minus) += ranks[i];

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    {
        std::vector<double> sorted(abs_d);
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    require(variance > 0.0, "wilcoxon: degenerate rank variance");
    res.z = (res.w_plus - mean) / std::sqrt(variance);
    res.p = detail::normal_two_sided_p(res.z);
    res.effect_r = res.z / std::sqrt(nn);
    return res;
}

struct CorrelationResult {
    double rho = 0.0;
    double p = 1.0;
    std::size_t n = 0;

    nlohmann::json to_json() const { return {{"rho", rho}, {"p", p}, {"n", n}}; }
};

// Spearman rank correlation: Pearson on mid-ranks, two-sided p from the
// t approximation with n-2 degrees of freedom.
inline CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "spearman: samples must have equal length");
    require(x.size() >= 3, "spearman: need at least 3 observations, got ", x.size());
    const std::size_t n = x.size();

    const std::vector<double> rx = detail::midranks(x);
    const std::vector<double> ry = detail::midranks(y);
    const double mean = (static_cast<double>(n) + 1.0) / 2.0;  // mid-ranks always average this
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean, dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, "spearman: constant input vector, rho undefined");

    CorrelationResult res;
    res.n = n;
    res.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    if (std::abs(res.rho) == 1.0) {
        res.p = 0.0;
    } else {
        const double df = static_cast<double>(n) - 2.0;
        const double t = res.rho * std::sqrt(df / (1.0 - res.rho * res.rho));
        boost::math::students_t_distribution<double> dist(df);
        res.p = 2.0 * boost::math::cdf(dist, -std::abs(t));
    }
    return res;
}

}  // namespace assocnet
