#pragma once

#include <span>

namespace mcmmf {

// Pearson correlation of two equally sized samples (size >= 2), clamped to
// [-1, 1]. If exactly one side is constant the correlation is taken as 0;
// if both are constant it is undefined and throws undefined_correlation.
double pearson(std::span<const double> u, std::span<const double> v);

double mean(std::span<const double> v);
double stddev(std::span<const double> v); // population, not sample

// Least-squares line y = a + b*x; r2 is the coefficient of determination.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace mcmmf
