#include <cmath>
#include <stdexcept>

#include "admmprune/report.hpp"

namespace admmprune {

namespace {

// Continued fraction for the incomplete beta function, modified Lentz scheme.
double beta_cf(double a, double b, double x) {
    const double eps = 1e-15;
    const double tiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

void sample_moments(const std::vector<double>& s, const char* name, double& mean, double& var) {
    if (s.size() < 2)
        throw std::runtime_error(std::string("welch_t_test: sample ") + name +
                                 " needs at least 2 values");
    double sum = 0.0;
    for (double v : s) sum += v;
    mean = sum / static_cast<double>(s.size());
    double sq = 0.0;
    for (double v : s) sq += (v - mean) * (v - mean);
    var = sq / static_cast<double>(s.size() - 1);
    if (var == 0.0)
        throw std::runtime_error(std::string("welch_t_test: sample ") + name +
                                 " has zero variance");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::runtime_error("incomplete_beta: a, b must be > 0");
    if (x < 0.0 || x > 1.0) throw std::runtime_error("incomplete_beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x));
    // symmetry keeps the continued fraction in its fast-converging region
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

TTestResult welch_t_test(const std::vector<double>& sample_a,
                         const std::vector<double>& sample_b) {
    double ma, va, mb, vb;
    sample_moments(sample_a, "a", ma, va);
    sample_moments(sample_b, "b", mb, vb);
    double na = static_cast<double>(sample_a.size());
    double nb = static_cast<double>(sample_b.size());
    double qa = va / na, qb = vb / nb;
    TTestResult r;
    r.t = (ma - mb) / std::sqrt(qa + qb);
    r.dof = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    // two-sided p: P(|T| >= |t|) = I_x(dof/2, 1/2) with x = dof/(dof + t^2)
    r.p = incomplete_beta(r.dof / 2.0, 0.5, r.dof / (r.dof + r.t * r.t));
    return r;
}

}  // namespace admmprune
