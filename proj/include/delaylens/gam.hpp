#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delaylens/survival.hpp"

namespace delaylens {

// --- B-spline machinery -----------------------------------------------------

// Uniform extended (unrepeated) knot vector: num_basis + degree + 1 knots with
// the data domain [x_min, x_max] spanned by num_basis - degree segments.
// Evaluation clamps x to the domain, so boundary rows stay a partition of one.
struct BSplineBasis {
    std::vector<double> knots;
    int degree = 3;
    int num_basis = 0;
    double x_min = 0.0;
    double x_max = 1.0;

    Eigen::RowVectorXd row(double x) const;
};

BSplineBasis make_uniform_basis(double a, double b, int k, int degree);
// Interior breakpoints at data quantiles; spacing of the end segments extends
// the knot vector. Non-default: the difference-penalty null space maps to an
// affine function of x only under uniform spacing.
BSplineBasis make_quantile_basis(std::vector<double> values, int k, int degree);

// D (order-th difference operator, (k-order) x k) and S = D^T D.
Eigen::MatrixXd difference_matrix(int k, int order);
Eigen::MatrixXd difference_penalty(int k, int order);

// Orthonormal k x (k-1) transform Z with col_sums^T Z = 0: reparameterizes a
// smooth so its fitted values sum to zero over the data.
Eigen::MatrixXd sum_to_zero_transform(const Eigen::VectorXd& col_sums);

// --- Link -------------------------------------------------------------------

struct LinkValue {
    double pi = 0.0;
    double deriv = 0.0;  // d pi / d eta = exp(eta - exp(eta))
};

// pi = 1 - exp(-exp(eta)) clamped to [1e-12, 1 - 1e-12].
LinkValue cloglog_inverse(double eta);
double cloglog_link(double pi);  // log(-log(1 - pi))

// --- Model specification and design -----------------------------------------

enum class KnotPlacement { Uniform, Quantile };

struct SmoothTermSpec {
    std::string variable;
    int k = 10;
    int degree = 3;
    int penalty_order = 2;
    bool by_event_type = false;
};

struct ModelSpec {
    std::string name = "m1";
    int d_max = 20;
    SmoothTermSpec baseline{"t", 10, 3, 2, true};
    std::vector<SmoothTermSpec> smooths;
    bool internet_linear = false;
    bool regime_linear = false;
    bool shared_baseline_lambda = false;
    KnotPlacement knot_placement = KnotPlacement::Uniform;
};

// Country-level model: event-type baseline in t, five covariate smooths,
// linear internet and regime effects.
ModelSpec m1_spec();
// Event-level model: event-type baseline plus four geography smooths; the
// weekly event count term is a documented variant.
ModelSpec m2_spec(bool include_weekly_events = false);

enum class BlockKind { Intercept, Linear, Smooth };

struct DesignBlock {
    std::string name;
    BlockKind kind = BlockKind::Linear;
    int col_start = 0;
    int col_count = 0;
    std::string variable;
    int event_type_level = -1;  // >= 0 when this is one level of a factor-smooth
    BSplineBasis basis;
    Eigen::MatrixXd transform;  // k x (k-1) sum-to-zero reparameterization
    Eigen::MatrixXd penalty;    // constrained penalty, col_count x col_count
    int penalty_index = -1;
    bool dropped_to_linear = false;
    double center = 0.0;  // subtracted from x for linear fallback columns
};

struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<DesignBlock> blocks;
    std::vector<std::string> column_names;
    std::vector<std::string> penalty_names;
    std::vector<std::string> warnings;

    int n_penalties() const { return static_cast<int>(penalty_names.size()); }
};

double covariate_value(const CovariateVector& cv, std::string_view name);

Design build_design(const ModelSpec& spec, const std::vector<PersonPeriodRow>& rows);

// Row of the design for a prediction point; blocks must come from build_design
// or a loaded fit. Throws DataError when the factor-smooth has no block for
// the requested event type.
Eigen::RowVectorXd design_row(const std::vector<DesignBlock>& blocks, int n_cols,
                              const CovariateVector& cv, EventType type, double t);

// --- Penalized IRLS ---------------------------------------------------------

struct PenaltyTerm {
    std::string name;
    int col_start = 0;
    Eigen::MatrixXd S;
    int lambda_index = 0;
};

std::vector<PenaltyTerm> penalties_from_design(const Design& design);

struct PirlsOptions {
    double tol = 1e-8;    // relative penalized-deviance change
    int max_iter = 200;
    double ridge = 1e-8;  // added to the diagonal on detected separation
};

struct PirlsResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;      // inverse penalized expected information
    Eigen::VectorXd edf_per_column;  // diag of the influence map
    double edf_total = 0.0;
    double deviance = 0.0;
    double penalized_deviance = 0.0;
    int iterations = 0;
    bool converged = false;
    bool ridge_used = false;
    std::vector<double> trace;  // penalized deviance per iteration
};

// Maximizes the Bernoulli log-likelihood minus (1/2) sum_j lambda_j b^T S_j b
// by Fisher scoring with step halving, so the penalized deviance never
// increases along the trace. Throws NumericError (with the trace in the
// message) on non-convergence.
PirlsResult pirls_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<PenaltyTerm>& penalties,
                      const std::vector<double>& lambda, const PirlsOptions& options = {});

// Penalized Bernoulli log-likelihood and its analytic gradient at beta.
double penalized_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const std::vector<PenaltyTerm>& penalties,
                        const std::vector<double>& lambda, const Eigen::VectorXd& beta,
                        Eigen::VectorXd* gradient = nullptr);

// --- Smoothing-parameter selection -------------------------------------------

struct SelectOptions {
    double log10_min = -8.0;
    double log10_max = 8.0;
    double coord_tol = 0.05;  // golden-section interval width on log10 lambda
    double gcv_tol = 1e-6;    // outer-loop relative GCV change
    int max_outer = 10;
    PirlsOptions pirls;
};

struct SelectResult {
    std::vector<double> lambda;
    double gcv = 0.0;
    int outer_iterations = 0;
    bool plateau_warning = false;
};

// Minimizes GCV = n * deviance / (n - edf_total)^2 by coordinate-wise
// golden-section search on log10 lambda. Flat profiles resolve to the largest
// lambda on the plateau.
SelectResult select_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<PenaltyTerm>& penalties, int n_lambda,
                           const SelectOptions& options = {});

// --- Full fit ----------------------------------------------------------------

struct FitOptions {
    SelectOptions select;
    PirlsOptions pirls;
    std::optional<std::vector<double>> fixed_lambda;  // skips selection
};

struct FitResult {
    ModelSpec spec;
    std::vector<DesignBlock> blocks;
    std::vector<std::string> column_names;
    std::vector<std::string> penalty_names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    std::vector<double> lambda;
    Eigen::VectorXd edf_per_column;
    std::map<std::string, double> edf_per_term;
    double edf_total = 0.0;
    double deviance = 0.0;
    double penalized_deviance = 0.0;
    double gcv = 0.0;
    std::int64_t n_rows = 0;
    std::int64_t n_events = 0;
    int pirls_iterations = 0;
    bool converged = false;
    bool ridge_used = false;
    bool plateau_warning = false;
    std::vector<double> convergence_trace;
    std::vector<std::string> warnings;

    int n_cols() const { return static_cast<int>(beta.size()); }
};

FitResult fit_model(const ModelSpec& spec, const std::vector<PersonPeriodRow>& rows,
                    const FitOptions& options = {});

// --- Prediction and summaries -------------------------------------------------

struct HazardPrediction {
    double eta = 0.0;
    double se_eta = 0.0;
    double pi = 0.0;
};

HazardPrediction predict_hazard(const FitResult& fit, const CovariateVector& cv, EventType type,
                                double t);

struct CurvePoint {
    double x = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    bool clamped = false;  // x fell outside the training range
};

// Baseline hazard with all covariate effects zeroed:
// pi_t = cloglog_inverse(beta_0 + s_0(t, type)), SE by the delta method.
std::vector<CurvePoint> baseline_hazard_curve(const FitResult& fit, EventType type);

struct PartialEffectCurve {
    std::string term;
    std::vector<CurvePoint> points;  // centered effect on the linear predictor scale
};

PartialEffectCurve partial_effect(const FitResult& fit, const std::string& term,
                                  const std::vector<double>& grid);

struct CoefRow {
    std::string term;
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 0.0;
};

// One row per linear coefficient (intercept, internet, regime dummies), Wald
// z and two-sided normal p.
std::vector<CoefRow> coefficient_table(const FitResult& fit);

// --- Persistence ----------------------------------------------------------------

std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(std::string_view json_text);

std::string format_curve_csv(const std::vector<CurvePoint>& points);
std::string format_coefficient_csv(const std::vector<CoefRow>& rows);

}  // namespace delaylens
