#include <algorithm>
#include <cmath>

#include "delaylens/delay_pipeline.hpp"
#include "delaylens/errors.hpp"
#include "delaylens/gam.hpp"

namespace delaylens {

namespace {

void validate_basis_shape(int k, int degree) {
    if (degree < 0) throw UsageError("spline degree must be nonnegative");
    if (k < degree + 2) {
        throw UsageError("basis dimension " + std::to_string(k) +
                         " too small for degree " + std::to_string(degree) +
                         " (need k >= degree + 2)");
    }
}

void validate_knots(const BSplineBasis& basis) {
    for (std::size_t i = 1; i < basis.knots.size(); ++i) {
        if (!(basis.knots[i - 1] < basis.knots[i])) {
            throw UsageError("knot vector must be strictly increasing");
        }
    }
}

}  // namespace

Eigen::RowVectorXd BSplineBasis::row(double x) const {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(num_basis);
    x = std::clamp(x, x_min, x_max);

    // Knot span: knots[s] <= x < knots[s+1] with s in [degree, num_basis-1];
    // the right boundary belongs to the last span.
    int s = degree;
    while (s < num_basis - 1 && x >= knots[static_cast<std::size_t>(s + 1)]) ++s;

    // de Boor's basis-function recurrence over the degree+1 active functions.
    std::vector<double> N(static_cast<std::size_t>(degree) + 1, 0.0);
    std::vector<double> left(static_cast<std::size_t>(degree) + 1, 0.0);
    std::vector<double> right(static_cast<std::size_t>(degree) + 1, 0.0);
    N[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[static_cast<std::size_t>(j)] = x - knots[static_cast<std::size_t>(s + 1 - j)];
        right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(s + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[static_cast<std::size_t>(r + 1)] +
                                 left[static_cast<std::size_t>(j - r)];
            const double temp = N[static_cast<std::size_t>(r)] / denom;
            N[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        N[static_cast<std::size_t>(j)] = saved;
    }
    for (int r = 0; r <= degree; ++r) {
        out(s - degree + r) = N[static_cast<std::size_t>(r)];
    }
    return out;
}

BSplineBasis make_uniform_basis(double a, double b, int k, int degree) {
    validate_basis_shape(k, degree);
    if (!(a < b)) throw UsageError("spline domain must have positive width");
    const int nseg = k - degree;
    const double h = (b - a) / nseg;
    BSplineBasis basis;
    basis.degree = degree;
    basis.num_basis = k;
    basis.x_min = a;
    basis.x_max = b;
    basis.knots.resize(static_cast<std::size_t>(k + degree + 1));
    for (int j = 0; j <= k + degree; ++j) {
        basis.knots[static_cast<std::size_t>(j)] = a + (j - degree) * h;
    }
    basis.knots[static_cast<std::size_t>(degree)] = a;
    basis.knots[static_cast<std::size_t>(k)] = b;
    validate_knots(basis);
    return basis;
}

BSplineBasis make_quantile_basis(std::vector<double> values, int k, int degree) {
    validate_basis_shape(k, degree);
    if (values.empty()) throw UsageError("quantile knots need data");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double a = *mn;
    const double b = *mx;
    if (!(a < b)) throw UsageError("spline domain must have positive width");

    const int nseg = k - degree;
    std::vector<double> breaks;
    breaks.push_back(a);
    for (int i = 1; i < nseg; ++i) {
        breaks.push_back(percentile_interpolated(values, 100.0 * i / nseg));
    }
    breaks.push_back(b);
    // Ties in the data can collapse interior breakpoints; fall back to uniform
    // spacing in that case.
    for (std::size_t i = 1; i < breaks.size(); ++i) {
        if (!(breaks[i] - breaks[i - 1] > 1e-12 * (b - a))) {
            return make_uniform_basis(a, b, k, degree);
        }
    }

    BSplineBasis basis;
    basis.degree = degree;
    basis.num_basis = k;
    basis.x_min = a;
    basis.x_max = b;
    basis.knots.resize(static_cast<std::size_t>(k + degree + 1));
    for (int i = 0; i <= nseg; ++i) {
        basis.knots[static_cast<std::size_t>(degree + i)] = breaks[static_cast<std::size_t>(i)];
    }
    const double h_lo = breaks[1] - breaks[0];
    const double h_hi = breaks[static_cast<std::size_t>(nseg)] -
                        breaks[static_cast<std::size_t>(nseg - 1)];
    for (int j = 1; j <= degree; ++j) {
        basis.knots[static_cast<std::size_t>(degree - j)] = a - j * h_lo;
        basis.knots[static_cast<std::size_t>(k + j)] = b + j * h_hi;
    }
    validate_knots(basis);
    return basis;
}

Eigen::MatrixXd difference_matrix(int k, int order) {
    if (order < 1) throw UsageError("difference order must be at least 1");
    if (k <= order) {
        throw UsageError("difference penalty needs more coefficients (" + std::to_string(k) +
                         ") than its order (" + std::to_string(order) + ")");
    }
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(k, k);
    for (int o = 0; o < order; ++o) {
        const auto rows = d.rows() - 1;
        Eigen::MatrixXd step(rows, d.cols());
        step = d.bottomRows(rows) - d.topRows(rows);
        d = std::move(step);
    }
    return d;
}

Eigen::MatrixXd difference_penalty(int k, int order) {
    const Eigen::MatrixXd d = difference_matrix(k, order);
    return d.transpose() * d;
}

Eigen::MatrixXd sum_to_zero_transform(const Eigen::VectorXd& col_sums) {
    const auto k = col_sums.size();
    if (k < 2) throw UsageError("constraint needs at least two columns");
    if (col_sums.norm() < 1e-300) {
        throw UsageError("constraint vector is zero; nothing to absorb");
    }
    Eigen::MatrixXd c = col_sums;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    Eigen::MatrixXd q = qr.householderQ();
    return q.rightCols(k - 1);
}

LinkValue cloglog_inverse(double eta) {
    constexpr double kEps = 1e-12;
    const double ex = std::exp(eta);
    double pi = -std::expm1(-ex);  // 1 - exp(-exp(eta)) without cancellation
    const double deriv = std::exp(eta - ex);
    pi = std::clamp(pi, kEps, 1.0 - kEps);
    return {pi, deriv};
}

double cloglog_link(double pi) {
    constexpr double kEps = 1e-12;
    pi = std::clamp(pi, kEps, 1.0 - kEps);
    return std::log(-std::log1p(-pi));
}

double covariate_value(const CovariateVector& cv, std::string_view name) {
    if (name == "logGDP") return cv.logGDP;
    if (name == "logPOP") return cv.logPOP;
    if (name == "logFATALITY_cum") return cv.logFATALITY_cum;
    if (name == "govcensor") return cv.govcensor;
    if (name == "selfcensor") return cv.selfcensor;
    if (name == "logBORDER") return cv.logBORDER;
    if (name == "logPOP50km") return cv.logPOP50km;
    if (name == "logDISTANCE") return cv.logDISTANCE;
    if (name == "logFATALITY_wk") return cv.logFATALITY_wk;
    if (name == "logEVENTS_wk") return cv.logEVENTS_wk;
    if (name == "internet") return static_cast<double>(cv.internet);
    throw UsageError("unknown covariate '" + std::string(name) + "'");
}

ModelSpec m1_spec() {
    ModelSpec spec;
    spec.name = "m1";
    spec.smooths = {
        {"logGDP"}, {"logPOP"}, {"logFATALITY_cum"}, {"govcensor"}, {"selfcensor"},
    };
    spec.internet_linear = true;
    spec.regime_linear = true;
    return spec;
}

ModelSpec m2_spec(bool include_weekly_events) {
    ModelSpec spec;
    spec.name = "m2";
    spec.smooths = {
        {"logBORDER"}, {"logPOP50km"}, {"logDISTANCE"}, {"logFATALITY_wk"},
    };
    if (include_weekly_events) spec.smooths.push_back({"logEVENTS_wk"});
    return spec;
}

namespace {

struct PendingBlock {
    DesignBlock block;
    Eigen::MatrixXd columns;  // n x block.col_count
};

// Builds a constrained spline block over the rows where `active` is true
// (empty mask = all rows). Falls back to a centered linear column when the
// constrained basis is rank deficient over the data, and drops the term when
// even that is degenerate. Returns false if dropped.
bool make_smooth_block(const std::string& name, const std::string& variable,
                       const SmoothTermSpec& term, KnotPlacement placement,
                       const std::vector<double>& x, const std::vector<char>& active,
                       std::vector<std::string>& warnings, PendingBlock& out) {
    const auto n = static_cast<Eigen::Index>(x.size());
    std::vector<double> seen;
    seen.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (active.empty() || active[i]) seen.push_back(x[i]);
    }
    if (seen.empty()) {
        warnings.push_back(name + " dropped: no observations");
        return false;
    }
    const auto [mn, mx] = std::minmax_element(seen.begin(), seen.end());
    if (!(*mx - *mn > 1e-12)) {
        warnings.push_back(name + " dropped: constant covariate");
        return false;
    }

    BSplineBasis basis = placement == KnotPlacement::Quantile
                             ? make_quantile_basis(seen, term.k, term.degree)
                             : make_uniform_basis(*mn, *mx, term.k, term.degree);

    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, term.k);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!active.empty() && !active[static_cast<std::size_t>(i)]) continue;
        b.row(i) = basis.row(x[static_cast<std::size_t>(i)]);
    }
    const Eigen::VectorXd col_sums = b.colwise().sum();
    const Eigen::MatrixXd z = sum_to_zero_transform(col_sums);
    Eigen::MatrixXd xc = b * z;

    // Rank probe on the constrained Gram matrix.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(xc.cols(), xc.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        gram.selfadjointView<Eigen::Lower>());
    const double max_eig = eig.eigenvalues().maxCoeff();
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(max_eig > 0.0)) {
        warnings.push_back(name + " dropped: empty design block");
        return false;
    }
    if (min_eig < 1e-9 * max_eig) {
        // Constrained basis is rank deficient over this data; keep the term as
        // a centered straight line instead.
        warnings.push_back(name + " rank deficient: term reduced to linear");
        double mean = 0.0;
        for (double v : seen) mean += v;
        mean /= static_cast<double>(seen.size());
        out.block.name = name;
        out.block.kind = BlockKind::Smooth;
        out.block.variable = variable;
        out.block.col_count = 1;
        out.block.dropped_to_linear = true;
        out.block.center = mean;
        out.columns = Eigen::MatrixXd::Zero(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (active.empty() || active[static_cast<std::size_t>(i)]) {
                out.columns(i, 0) = x[static_cast<std::size_t>(i)] - mean;
            }
        }
        return true;
    }

    out.block.name = name;
    out.block.kind = BlockKind::Smooth;
    out.block.variable = variable;
    out.block.basis = std::move(basis);
    out.block.transform = z;
    out.block.penalty = z.transpose() * difference_penalty(term.k, term.penalty_order) * z;
    out.block.col_count = static_cast<int>(xc.cols());
    out.columns = std::move(xc);
    return true;
}

}  // namespace

Design build_design(const ModelSpec& spec, const std::vector<PersonPeriodRow>& rows) {
    if (rows.empty()) throw UsageError("design needs at least one person-period row");
    const auto n = static_cast<Eigen::Index>(rows.size());

    Design design;
    std::vector<PendingBlock> pending;

    {
        PendingBlock intercept;
        intercept.block.name = "(Intercept)";
        intercept.block.kind = BlockKind::Intercept;
        intercept.block.col_count = 1;
        intercept.columns = Eigen::MatrixXd::Ones(n, 1);
        pending.push_back(std::move(intercept));
    }

    auto add_linear = [&](const std::string& name, auto&& value_of) {
        Eigen::MatrixXd col(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            col(i, 0) = value_of(rows[static_cast<std::size_t>(i)]);
        }
        if ((col.array() - col(0, 0)).abs().maxCoeff() < 1e-12) {
            design.warnings.push_back(name + " dropped: zero variance");
            return;
        }
        PendingBlock b;
        b.block.name = name;
        b.block.kind = BlockKind::Linear;
        b.block.variable = name;
        b.block.col_count = 1;
        b.columns = std::move(col);
        pending.push_back(std::move(b));
    };

    if (spec.regime_linear) {
        add_linear("regime:Electoral Autocracy", [](const PersonPeriodRow& r) {
            return r.covariates.regime == Regime::ElectoralAutocracy ? 1.0 : 0.0;
        });
        add_linear("regime:Democracy", [](const PersonPeriodRow& r) {
            return r.covariates.regime == Regime::Democracy ? 1.0 : 0.0;
        });
    }
    if (spec.internet_linear) {
        add_linear("internet", [](const PersonPeriodRow& r) {
            return static_cast<double>(r.covariates.internet);
        });
    }

    int next_penalty = 0;

    // Factor-smooth baseline: a separate centered smooth of t per event type,
    // sharing one knot vector but penalized independently unless configured
    // otherwise.
    {
        std::vector<double> t(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) t[i] = rows[i].t;
        int shared_index = -1;
        for (EventType type : all_event_types()) {
            std::vector<char> active(rows.size(), 0);
            bool any = false;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].event_type == type) {
                    active[i] = 1;
                    any = true;
                }
            }
            const std::string name = "baseline[" + std::string(to_string(type)) + "]";
            if (!any) {
                design.warnings.push_back(name + " dropped: no rows of this event type");
                continue;
            }
            PendingBlock b;
            if (!make_smooth_block(name, spec.baseline.variable, spec.baseline,
                                   spec.knot_placement, t, active, design.warnings, b)) {
                continue;
            }
            b.block.event_type_level = static_cast<int>(type);
            if (!b.block.dropped_to_linear) {
                if (spec.shared_baseline_lambda) {
                    if (shared_index < 0) {
                        shared_index = next_penalty++;
                        design.penalty_names.push_back("baseline");
                    }
                    b.block.penalty_index = shared_index;
                } else {
                    b.block.penalty_index = next_penalty++;
                    design.penalty_names.push_back(name);
                }
            }
            pending.push_back(std::move(b));
        }
    }

    for (const SmoothTermSpec& term : spec.smooths) {
        std::vector<double> x(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x[i] = covariate_value(rows[i].covariates, term.variable);
        }
        PendingBlock b;
        const std::string name = "s(" + term.variable + ")";
        if (!make_smooth_block(name, term.variable, term, spec.knot_placement, x, {},
                               design.warnings, b)) {
            continue;
        }
        if (!b.block.dropped_to_linear) {
            b.block.penalty_index = next_penalty++;
            design.penalty_names.push_back(name);
        }
        pending.push_back(std::move(b));
    }

    int total_cols = 0;
    for (const auto& b : pending) total_cols += b.block.col_count;
    design.X.resize(n, total_cols);
    design.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.y(i) = static_cast<double>(rows[static_cast<std::size_t>(i)].y);
    }

    int cursor = 0;
    for (auto& b : pending) {
        b.block.col_start = cursor;
        design.X.block(0, cursor, n, b.block.col_count) = b.columns;
        for (int c = 0; c < b.block.col_count; ++c) {
            design.column_names.push_back(
                b.block.col_count == 1 ? b.block.name
                                       : b.block.name + "." + std::to_string(c + 1));
        }
        cursor += b.block.col_count;
        design.blocks.push_back(std::move(b.block));
    }
    return design;
}

Eigen::RowVectorXd design_row(const std::vector<DesignBlock>& blocks, int n_cols,
                              const CovariateVector& cv, EventType type, double t) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_cols);
    bool any_baseline = false;
    bool hit_baseline = false;
    for (const DesignBlock& b : blocks) {
        switch (b.kind) {
            case BlockKind::Intercept:
                row(b.col_start) = 1.0;
                break;
            case BlockKind::Linear:
                if (b.variable == "internet") {
                    row(b.col_start) = static_cast<double>(cv.internet);
                } else if (b.variable == "regime:Electoral Autocracy") {
                    row(b.col_start) = cv.regime == Regime::ElectoralAutocracy ? 1.0 : 0.0;
                } else if (b.variable == "regime:Democracy") {
                    row(b.col_start) = cv.regime == Regime::Democracy ? 1.0 : 0.0;
                } else {
                    throw UsageError("unknown linear term '" + b.variable + "'");
                }
                break;
            case BlockKind::Smooth: {
                const bool is_baseline = b.event_type_level >= 0;
                if (is_baseline) {
                    any_baseline = true;
                    if (b.event_type_level != static_cast<int>(type)) break;
                    hit_baseline = true;
                }
                const double x = b.variable == "t" ? t : covariate_value(cv, b.variable);
                if (b.dropped_to_linear) {
                    row(b.col_start) = x - b.center;
                } else {
                    row.segment(b.col_start, b.col_count) = b.basis.row(x) * b.transform;
                }
                break;
            }
        }
    }
    if (any_baseline && !hit_baseline) {
        throw DataError("no baseline smooth was fit for event type '" +
                        std::string(to_string(type)) + "'");
    }
    return row;
}

std::vector<PenaltyTerm> penalties_from_design(const Design& design) {
    std::vector<PenaltyTerm> out;
    for (const DesignBlock& b : design.blocks) {
        if (b.penalty_index < 0) continue;
        out.push_back({b.name, b.col_start, b.penalty, b.penalty_index});
    }
    return out;
}

}  // namespace delaylens
