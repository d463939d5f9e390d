#include "mcmmf/stats.hpp"

#include <cmath>
#include <stdexcept>

#include "mcmmf/errors.hpp"

namespace mcmmf {

double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

double pearson(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw std::invalid_argument("pearson: size mismatch");
    if (u.size() < 2)
        throw std::invalid_argument("pearson: need at least 2 samples");

    const double mu = mean(u);
    const double mv = mean(v);
    double suu = 0.0, svv = 0.0, suv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double du = u[i] - mu;
        const double dv = v[i] - mv;
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    if (suu == 0.0 && svv == 0.0)
        throw undefined_correlation("pearson: both samples are constant");
    if (suu == 0.0 || svv == 0.0) return 0.0;
    double r = suv / std::sqrt(suu * svv);
    if (r > 1.0) r = 1.0;
    if (r < -1.0) r = -1.0;
    return r;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need two equally sized samples");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: x is constant");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

} // namespace mcmmf
