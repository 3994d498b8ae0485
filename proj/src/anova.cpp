#include "litefbcn/anova.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lfb {

namespace {

// Continued fraction for the incomplete beta, modified Lentz evaluation.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw NumericError("incomplete beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, double df1, double df2) {
    if (f <= 0.0) return 1.0;
    const double x = df2 / (df2 + df1 * f);
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x);
}

AnovaResult rm_anova(const std::vector<std::vector<double>>& scores) {
    const std::size_t n_subj = scores.size();
    if (n_subj < 2) throw TooFewSamples("rm_anova: need at least 2 subjects (folds)");
    const std::size_t n_treat = scores[0].size();
    if (n_treat < 2) throw TooFewSamples("rm_anova: need at least 2 methods");
    for (const auto& row : scores) {
        if (row.size() != n_treat) {
            throw ShapeMismatch("rm_anova: ragged score matrix (missing cells)");
        }
    }

    double grand = 0.0;
    for (const auto& row : scores) {
        for (double v : row) grand += v;
    }
    grand /= static_cast<double>(n_subj * n_treat);

    std::vector<double> treat_mean(n_treat, 0.0), subj_mean(n_subj, 0.0);
    for (std::size_t s = 0; s < n_subj; ++s) {
        for (std::size_t t = 0; t < n_treat; ++t) {
            treat_mean[t] += scores[s][t];
            subj_mean[s] += scores[s][t];
        }
    }
    for (double& v : treat_mean) v /= static_cast<double>(n_subj);
    for (double& v : subj_mean) v /= static_cast<double>(n_treat);

    double ss_treat = 0.0, ss_subj = 0.0, ss_total = 0.0;
    for (std::size_t t = 0; t < n_treat; ++t) {
        const double d = treat_mean[t] - grand;
        ss_treat += d * d;
    }
    ss_treat *= static_cast<double>(n_subj);
    for (std::size_t s = 0; s < n_subj; ++s) {
        const double d = subj_mean[s] - grand;
        ss_subj += d * d;
    }
    ss_subj *= static_cast<double>(n_treat);
    for (std::size_t s = 0; s < n_subj; ++s) {
        for (std::size_t t = 0; t < n_treat; ++t) {
            const double d = scores[s][t] - grand;
            ss_total += d * d;
        }
    }
    double ss_error = ss_total - ss_treat - ss_subj;
    if (ss_error < 0.0) ss_error = 0.0;  // roundoff guard

    AnovaResult r;
    r.df_treatment = n_treat - 1;
    r.df_error = (n_treat - 1) * (n_subj - 1);

    if (ss_treat <= 0.0) {
        r.f_statistic = 0.0;
        r.p_value = 1.0;
        r.significant = false;
        return r;
    }
    if (ss_error <= 0.0) {
        r.f_statistic = std::numeric_limits<double>::infinity();
        r.p_value = 0.0;
        r.degenerate = true;
        r.significant = true;
        return r;
    }

    const double ms_treat = ss_treat / static_cast<double>(r.df_treatment);
    const double ms_error = ss_error / static_cast<double>(r.df_error);
    r.f_statistic = ms_treat / ms_error;
    r.p_value = f_upper_tail(r.f_statistic, static_cast<double>(r.df_treatment),
                             static_cast<double>(r.df_error));
    r.significant = r.p_value < kAnovaAlpha;
    return r;
}

}  // namespace lfb
