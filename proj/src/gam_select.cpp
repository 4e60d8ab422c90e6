#include <cmath>
#include <functional>

#include "delaylens/errors.hpp"
#include "delaylens/gam.hpp"
#include "gam_internal.hpp"

namespace delaylens {

namespace {

struct GcvEval {
    double gcv = std::numeric_limits<double>::infinity();
    double edf = 0.0;
};

// GCV of one lambda vector against a frozen working system (M, r): refit the
// penalized normal equations, then score the implied coefficients with the
// true Bernoulli deviance.
GcvEval working_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd& m, const Eigen::VectorXd& r,
                    const std::vector<PenaltyTerm>& penalties, const std::vector<double>& lambda,
                    double ridge) {
    const auto n = static_cast<double>(X.rows());
    Eigen::MatrixXd a = m;
    detail::add_penalties(a, penalties, lambda, ridge);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    GcvEval out;
    if (ldlt.info() != Eigen::Success) return out;
    const Eigen::VectorXd beta = ldlt.solve(r);
    if (!beta.allFinite()) return out;
    const Eigen::VectorXd eta = X * beta;
    const double dev = detail::bernoulli_deviance(eta, y);
    out.edf = ldlt.solve(m).trace();
    const double denom = n - out.edf;
    if (denom <= 0.0) return out;
    out.gcv = n * dev / (denom * denom);
    return out;
}

// Golden-section minimum of f over [lo, hi]; returns the abscissa.
double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                       double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

}  // namespace

SelectResult select_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<PenaltyTerm>& penalties, int n_lambda,
                           const SelectOptions& options) {
    SelectResult res;
    res.lambda.assign(static_cast<std::size_t>(n_lambda), 1.0);
    if (n_lambda == 0) {
        const PirlsResult fit = pirls_fit(X, y, penalties, res.lambda, options.pirls);
        const double n = static_cast<double>(X.rows());
        const double denom = n - fit.edf_total;
        res.gcv = denom > 0.0 ? n * fit.deviance / (denom * denom)
                              : std::numeric_limits<double>::infinity();
        return res;
    }

    const auto n = static_cast<double>(X.rows());
    Eigen::MatrixXd m, scratch;
    Eigen::VectorXd w, wz, r, eta;

    double prev_gcv = std::numeric_limits<double>::infinity();
    for (int outer = 1; outer <= options.max_outer; ++outer) {
        res.outer_iterations = outer;
        const PirlsResult fit = pirls_fit(X, y, penalties, res.lambda, options.pirls);
        const double ridge = fit.ridge_used ? options.pirls.ridge : 0.0;

        // Freeze the working system at the converged coefficients, then tune
        // each smoothing parameter against it.
        eta.noalias() = X * fit.beta;
        detail::working_weights(eta, y, w, wz);
        detail::normal_equations(X, w, wz, m, r, scratch);

        for (int j = 0; j < n_lambda; ++j) {
            std::vector<double> trial = res.lambda;
            auto objective = [&](double log10_lambda) {
                trial[static_cast<std::size_t>(j)] = std::pow(10.0, log10_lambda);
                return working_gcv(X, y, m, r, penalties, trial, ridge).gcv;
            };
            const double at_min = objective(options.log10_min);
            const double at_max = objective(options.log10_max);
            const double best_log10 =
                golden_minimize(objective, options.log10_min, options.log10_max,
                                options.coord_tol);
            const double at_best = objective(best_log10);
            const double spread = std::max({at_min, at_max, at_best}) -
                                  std::min({at_min, at_max, at_best});
            if (!(spread > 1e-9 * (std::abs(at_best) + 1e-12))) {
                // Flat GCV profile over the whole grid: prefer the smoothest
                // model and record that the data did not decide.
                res.lambda[static_cast<std::size_t>(j)] = std::pow(10.0, options.log10_max);
                res.plateau_warning = true;
            } else {
                res.lambda[static_cast<std::size_t>(j)] = std::pow(10.0, best_log10);
            }
        }

        const PirlsResult refit = pirls_fit(X, y, penalties, res.lambda, options.pirls);
        const double denom = n - refit.edf_total;
        res.gcv = denom > 0.0 ? n * refit.deviance / (denom * denom)
                              : std::numeric_limits<double>::infinity();
        if (std::abs(res.gcv - prev_gcv) < options.gcv_tol * (std::abs(prev_gcv) + 1e-12)) {
            break;
        }
        prev_gcv = res.gcv;
    }
    return res;
}

FitResult fit_model(const ModelSpec& spec, const std::vector<PersonPeriodRow>& rows,
                    const FitOptions& options) {
    Design design = build_design(spec, rows);
    const std::vector<PenaltyTerm> penalties = penalties_from_design(design);
    const int n_lambda = design.n_penalties();

    FitResult fit;
    fit.spec = spec;
    fit.warnings = design.warnings;

    if (options.fixed_lambda) {
        if (static_cast<int>(options.fixed_lambda->size()) != n_lambda) {
            throw UsageError("expected " + std::to_string(n_lambda) +
                             " smoothing parameters, got " +
                             std::to_string(options.fixed_lambda->size()));
        }
        fit.lambda = *options.fixed_lambda;
    } else {
        SelectOptions sel_opts = options.select;
        sel_opts.pirls = options.pirls;
        SelectResult sel = select_lambda(design.X, design.y, penalties, n_lambda, sel_opts);
        fit.lambda = sel.lambda;
        fit.plateau_warning = sel.plateau_warning;
        if (sel.plateau_warning) {
            fit.warnings.push_back(
                "smoothing selection saw a flat criterion profile; kept the smoothest fit");
        }
    }

    PirlsResult pirls = pirls_fit(design.X, design.y, penalties, fit.lambda, options.pirls);

    fit.blocks = std::move(design.blocks);
    fit.column_names = std::move(design.column_names);
    fit.penalty_names = std::move(design.penalty_names);
    fit.beta = std::move(pirls.beta);
    fit.covariance = std::move(pirls.covariance);
    fit.edf_per_column = std::move(pirls.edf_per_column);
    fit.edf_total = pirls.edf_total;
    fit.deviance = pirls.deviance;
    fit.penalized_deviance = pirls.penalized_deviance;
    fit.n_rows = design.X.rows();
    fit.n_events = static_cast<std::int64_t>((design.y.array() > 0.5).count());
    fit.pirls_iterations = pirls.iterations;
    fit.converged = pirls.converged;
    fit.ridge_used = pirls.ridge_used;
    fit.convergence_trace = std::move(pirls.trace);
    if (pirls.ridge_used) {
        fit.warnings.push_back("separation guard engaged: coefficients carry a small ridge");
    }

    const double n = static_cast<double>(fit.n_rows);
    const double denom = n - fit.edf_total;
    fit.gcv = denom > 0.0 ? n * fit.deviance / (denom * denom)
                          : std::numeric_limits<double>::infinity();

    for (const DesignBlock& b : fit.blocks) {
        fit.edf_per_term[b.name] = fit.edf_per_column.segment(b.col_start, b.col_count).sum();
    }
    return fit;
}

}  // namespace delaylens
