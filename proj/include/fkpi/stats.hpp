#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "fkpi/errors.hpp"

// Statistical helpers shared by the verification suites and the CLI:
// goodness-of-fit tests and ordinary least squares on log-log data.

namespace fkpi {

namespace detail {

inline double gammln(double x) {
    static constexpr double cof[6] = {76.18009172947146,  -86.50532032941677, 24.01409824083091,
                                      -1.231739572450155, 0.1208650973866179e-2,
                                      -0.5395239384953e-5};
    double y = x;
    double tmp = x + 5.5;
    tmp -= (x + 0.5) * std::log(tmp);
    double ser = 1.000000000190015;
    for (double c : cof) ser += c / ++y;
    return -tmp + std::log(2.5066282746310005 * ser / x);
}

/// Regularized upper incomplete gamma Q(a, x), series/continued fraction.
inline double gammq(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw NonpositiveValue("gammq: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        // series for P(a,x), return 1 - P
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 500; ++i) {
            ++ap;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gammln(a));
    }
    // continued fraction for Q(a,x)
    const double fpmin = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gammln(a)) * h;
}

}  // namespace detail

/// Survival function of the chi-square distribution.
inline double chi_square_sf(double stat, double dof) {
    return detail::gammq(0.5 * dof, 0.5 * stat);
}

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

/// Pearson goodness-of-fit of observed counts against expected
/// probabilities. Cells with negligible expected mass are skipped (they
/// contribute no information and would blow up the statistic).
inline ChiSquareResult chi_square_gof(const std::vector<double>& counts,
                                      const std::vector<double>& expected_probs) {
    if (counts.size() != expected_probs.size())
        throw DimensionMismatch("chi_square_gof: size mismatch");
    double total = 0.0;
    for (double c : counts) total += c;
    if (!(total > 0.0)) throw BadSize("chi_square_gof: empty sample");
    ChiSquareResult r;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double expect = expected_probs[i] * total;
        if (expect < 1e-9) continue;
        ++cells;
        double diff = counts[i] - expect;
        r.statistic += diff * diff / expect;
    }
    if (cells < 2) throw BadSize("chi_square_gof: fewer than two informative cells");
    r.dof = static_cast<double>(cells - 1);
    r.p_value = chi_square_sf(r.statistic, r.dof);
    return r;
}

/// One-sample Kolmogorov-Smirnov statistic against a given CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw BadSize("ks_statistic: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

/// Asymptotic Kolmogorov critical value at the 1% level is 1.628/sqrt(n).
inline constexpr double kKolmogorov01 = 1.628;

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares on (log x, log y) pairs.
inline SlopeFit fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DimensionMismatch("fit_slope: size mismatch");
    if (xs.size() < 3) throw InsufficientPoints("fit_slope: need at least 3 points");
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw NonpositiveValue("fit_slope: log-log fit needs positive data");
        double x = std::log(xs[i]);
        double y = std::log(ys[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    double den = static_cast<double>(n) * sxx - sx * sx;
    if (den == 0.0) throw InsufficientPoints("fit_slope: degenerate abscissae");
    SlopeFit f;
    f.points = n;
    f.slope = (static_cast<double>(n) * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / static_cast<double>(n);
    double ss_tot = syy - sy * sy / static_cast<double>(n);
    if (ss_tot <= 0.0) {
        f.r_squared = 1.0;  // all y equal: the fit is exact by convention
        return f;
    }
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::log(xs[i]);
        double y = std::log(ys[i]);
        double e = y - (f.intercept + f.slope * x);
        ss_res += e * e;
    }
    f.r_squared = 1.0 - ss_res / ss_tot;
    return f;
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;       // unbiased sample variance
    double se_mean = 0.0;   // standard error of the mean
    std::size_t n = 0;
};

inline MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar r;
    r.n = xs.size();
    if (r.n == 0) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(r.n);
    if (r.n > 1) {
        for (double x : xs) r.var += (x - r.mean) * (x - r.mean);
        r.var /= static_cast<double>(r.n - 1);
        r.se_mean = std::sqrt(r.var / static_cast<double>(r.n));
    }
    return r;
}

}  // namespace fkpi
