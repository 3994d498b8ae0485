#pragma once

#include <vector>

#include "litefbcn/errors.hpp"

namespace lfb {

struct AnovaResult {
    double f_statistic = 0.0;
    std::size_t df_treatment = 0;
    std::size_t df_error = 0;
    double p_value = 1.0;
    bool significant = false;  // at alpha = 0.05
    bool degenerate = false;   // zero error sum of squares
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// Upper tail P(F(df1, df2) > f).
double f_upper_tail(double f, double df1, double df2);

// One-way within-subjects (repeated measures) ANOVA on a subjects x methods
// score matrix. The subject effect is removed from the error term:
//   SS_error = SS_total - SS_treatment - SS_subject,
//   F = (SS_treatment / df_t) / (SS_error / df_e),
//   df_t = m - 1, df_e = (m - 1)(s - 1).
// Identical method columns give F = 0, p = 1. A zero error term with a
// nonzero treatment term is reported as p = 0 with the degenerate flag.
AnovaResult rm_anova(const std::vector<std::vector<double>>& scores);

inline constexpr double kAnovaAlpha = 0.05;

}  // namespace lfb
