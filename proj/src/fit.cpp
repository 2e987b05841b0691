// Weighted Levenberg-Marquardt fit of a Gaussian dip on a straight baseline.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "homsim/analysis.hpp"

namespace homsim {

namespace {

using Vec5 = Eigen::Matrix<double, kFitParams, 1>;
using Mat5 = Eigen::Matrix<double, kFitParams, kFitParams>;

Vec5 to_vec(const FitParams& p)
{
    const auto a = p.as_array();
    return Vec5(a.data());
}

FitParams to_params(const Vec5& v) { return {v[0], v[1], v[2], v[3], v[4]}; }

// Gaussian term and its derivatives w.r.t. center and width, averaged over
// the two taps at tau +- half_offset.
struct GaussTerm {
    double value = 0.0;
    double d_center = 0.0;
    double d_width = 0.0;
};

GaussTerm gauss_term(double tau, double center, double width, double half_offset)
{
    GaussTerm t;
    const int taps = half_offset == 0.0 ? 1 : 2;
    const double shifts[2] = {-half_offset, half_offset};
    for (int k = 0; k < taps; ++k) {
        const double x = tau + (taps == 1 ? 0.0 : shifts[k]) - center;
        const double g = std::exp(-x * x / (2.0 * width * width));
        t.value += g;
        t.d_center += g * x / (width * width);
        t.d_width += g * x * x / (width * width * width);
    }
    t.value /= taps;
    t.d_center /= taps;
    t.d_width /= taps;
    return t;
}

struct Problem {
    const BinnedSeries& series;
    std::vector<double> sigma;

    explicit Problem(const BinnedSeries& s) : series(s), sigma(s.size())
    {
        for (std::size_t i = 0; i < s.size(); ++i) sigma[i] = std::sqrt(std::max(s.variance[i], 1.0));
    }

    double chi2(const Vec5& p) const
    {
        const auto params = to_params(p);
        double sum = 0.0;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double r = (series.counts[i] - gaussian_line(params, series.delay_fs[i], series.pair_offset_fs)) / sigma[i];
            sum += r * r;
        }
        return sum;
    }

    // Normal matrix J^T J and gradient J^T r of the weighted residuals.
    void normal_equations(const Vec5& p, Mat5& jtj, Vec5& jtr) const
    {
        jtj.setZero();
        jtr.setZero();
        const double half = series.pair_offset_fs / 2.0;
        for (std::size_t i = 0; i < series.size(); ++i) {
            const double tau = series.delay_fs[i];
            const auto g = gauss_term(tau, p[3], p[4], half);
            Vec5 row;
            row << 1.0, tau, g.value, p[2] * g.d_center, p[2] * g.d_width;
            row /= sigma[i];
            const double model = p[0] + p[1] * tau + p[2] * g.value;
            const double r = (series.counts[i] - model) / sigma[i];
            jtj.noalias() += row * row.transpose();
            jtr += row * r;
        }
    }

    // Pair-averaged points i and i+k share one raw bin, correlation 1/2.
    Mat5 paired_meat(const Vec5& p, const Mat5& jtj) const
    {
        const std::size_t n = series.size();
        const double spacing = (series.delay_fs.back() - series.delay_fs.front()) / static_cast<double>(n - 1);
        const auto k = static_cast<std::size_t>(std::lround(series.pair_offset_fs / spacing));
        Mat5 meat = jtj;
        if (k == 0 || k >= n) return meat;
        const double half = series.pair_offset_fs / 2.0;
        std::vector<Vec5> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double tau = series.delay_fs[i];
            const auto g = gauss_term(tau, p[3], p[4], half);
            rows[i] << 1.0, tau, g.value, p[2] * g.d_center, p[2] * g.d_width;
            rows[i] /= sigma[i];
        }
        for (std::size_t i = 0; i + k < n; ++i) {
            meat.noalias() += 0.5 * (rows[i] * rows[i + k].transpose() + rows[i + k] * rows[i].transpose());
        }
        return meat;
    }
};

double median(std::vector<double> v)
{
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) m = (m + *std::max_element(v.begin(), v.begin() + mid)) / 2.0;
    return m;
}

}  // namespace

double gaussian_line(const FitParams& p, double tau_fs, double pair_offset_fs)
{
    return p.c0 + p.c1 * tau_fs + p.amplitude * gauss_term(tau_fs, p.center_fs, p.width_fs, pair_offset_fs / 2.0).value;
}

double FitResult::error(int i) const { return std::sqrt(std::max(covariance[i][i], 0.0)); }

double FitResult::fwhm_fs() const { return 2.0 * std::sqrt(2.0 * std::numbers::ln2) * params.width_fs; }

double FitResult::evaluate(double tau_fs) const { return gaussian_line(params, tau_fs, pair_offset_fs); }

FitParams initial_guess(const BinnedSeries& series)
{
    const std::size_t n = series.size();
    const std::size_t quarter = std::max<std::size_t>(1, n / 4);
    std::vector<double> outer;
    outer.insert(outer.end(), series.counts.begin(), series.counts.begin() + quarter);
    outer.insert(outer.end(), series.counts.end() - quarter, series.counts.end());
    const double baseline = median(outer);

    // Extremum of a short centered moving average of the residual.
    const std::size_t half = std::max<std::size_t>(1, n / 60);
    std::size_t best = 0;
    double best_dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) sum += series.counts[j] - baseline;
        const double dev = sum / static_cast<double>(hi - lo + 1);
        if (std::abs(dev) > std::abs(best_dev)) {
            best_dev = dev;
            best = i;
        }
    }

    FitParams p;
    p.c0 = baseline;
    p.c1 = 0.0;
    p.amplitude = best_dev;
    p.center_fs = series.delay_fs[best];
    p.width_fs = (series.delay_fs.back() - series.delay_fs.front()) / 10.0;
    return p;
}

FitResult fit_gaussian_line(const BinnedSeries& series, const FitOptions& options)
{
    series.validate();
    if (series.size() < 10) throw FitError("Gaussian+line fit needs at least 10 points, got " + std::to_string(series.size()));

    const Problem problem(series);
    Vec5 p = to_vec(initial_guess(series));
    double chi2 = problem.chi2(p);
    double lambda = 1e-3;
    bool converged = false;
    int iter = 0;

    Mat5 jtj;
    Vec5 jtr;
    problem.normal_equations(p, jtj, jtr);
    for (; iter < options.max_iterations && !converged; ++iter) {
        Mat5 damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
        const Vec5 step = damped.ldlt().solve(jtr);
        const Vec5 trial = p + step;
        const double trial_chi2 = trial[4] > 0.0 && step.allFinite() ? problem.chi2(trial) : HUGE_VAL;

        if (trial_chi2 <= chi2) {
            const bool small_step = ((step.array().abs()) <= options.step_tolerance * (p.array().abs() + options.step_tolerance)).all();
            const bool flat = chi2 - trial_chi2 <= 1e-15 * chi2;
            p = trial;
            chi2 = trial_chi2;
            lambda = std::max(lambda / 10.0, 1e-15);
            problem.normal_equations(p, jtj, jtr);
            converged = small_step || (flat && lambda <= 1e-6);
        } else {
            lambda *= 10.0;
            // No descent direction left at any damping: numerically stationary.
            if (lambda > 1e16) converged = true;
        }
    }

    Eigen::FullPivLU<Mat5> lu(jtj);
    if (!lu.isInvertible()) throw FitError("singular normal matrix: data do not constrain the Gaussian+line model");
    Mat5 cov = lu.inverse();
    if (series.pair_offset_fs > 0.0) cov = cov * problem.paired_meat(p, jtj) * cov;

    FitResult fit;
    fit.params = to_params(p);
    for (int i = 0; i < kFitParams; ++i) {
        for (int j = 0; j < kFitParams; ++j) fit.covariance[i][j] = cov(i, j);
    }
    fit.chi2 = chi2;
    fit.dof = static_cast<int>(series.size()) - kFitParams;
    fit.iterations = iter;
    fit.converged = converged;
    fit.pair_offset_fs = series.pair_offset_fs;

    const double base = fit.baseline_at_center();
    if (base == 0.0) throw FitError("fitted baseline vanishes at the dip center");
    fit.visibility = -fit.params.amplitude / base;
    // dV/d(c0, c1, A, center, width)
    Vec5 grad;
    grad << fit.params.amplitude / (base * base), fit.params.amplitude * fit.params.center_fs / (base * base), -1.0 / base,
        fit.params.amplitude * fit.params.c1 / (base * base), 0.0;
    fit.visibility_error = std::sqrt(std::max(grad.dot(cov * grad), 0.0));
    return fit;
}

double residual_fringe_visibility(const BinnedSeries& series, const FitResult& fit, double fringe_period_fs)
{
    const double omega = 2.0 * std::numbers::pi / fringe_period_fs;
    double re = 0.0;
    double im = 0.0;
    double level = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double model = fit.evaluate(series.delay_fs[i]);
        const double r = series.counts[i] - model;
        re += r * std::cos(omega * series.delay_fs[i]);
        im -= r * std::sin(omega * series.delay_fs[i]);
        level += model;
    }
    const double n = static_cast<double>(series.size());
    return 2.0 * std::hypot(re, im) / n / (level / n);
}

}  // namespace homsim
