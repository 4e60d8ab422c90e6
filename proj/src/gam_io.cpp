#include <json.hpp>

#include "delaylens/csv.hpp"
#include "delaylens/errors.hpp"
#include "delaylens/gam.hpp"

namespace delaylens {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    ordered_json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    out["data"] = data;  // row-major
    return out;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw DataError("matrix payload has wrong element count");
    }
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++];
    }
    return m;
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
    std::vector<double> data(v.data(), v.data() + v.size());
    return ordered_json(data);
}

const char* kind_name(BlockKind kind) {
    switch (kind) {
        case BlockKind::Intercept: return "intercept";
        case BlockKind::Linear: return "linear";
        case BlockKind::Smooth: return "smooth";
    }
    return "linear";
}

BlockKind kind_from_name(const std::string& s) {
    if (s == "intercept") return BlockKind::Intercept;
    if (s == "linear") return BlockKind::Linear;
    if (s == "smooth") return BlockKind::Smooth;
    throw DataError("unknown design block kind '" + s + "'");
}

ordered_json smooth_spec_to_json(const SmoothTermSpec& t) {
    ordered_json j;
    j["variable"] = t.variable;
    j["k"] = t.k;
    j["degree"] = t.degree;
    j["penalty_order"] = t.penalty_order;
    j["by_event_type"] = t.by_event_type;
    return j;
}

SmoothTermSpec smooth_spec_from_json(const ordered_json& j) {
    SmoothTermSpec t;
    t.variable = j.at("variable").get<std::string>();
    t.k = j.at("k").get<int>();
    t.degree = j.at("degree").get<int>();
    t.penalty_order = j.at("penalty_order").get<int>();
    t.by_event_type = j.at("by_event_type").get<bool>();
    return t;
}

}  // namespace

std::string fit_to_json(const FitResult& fit) {
    ordered_json j;

    ordered_json model;
    model["name"] = fit.spec.name;
    model["d_max"] = fit.spec.d_max;
    model["knot_placement"] =
        fit.spec.knot_placement == KnotPlacement::Quantile ? "quantile" : "uniform";
    model["shared_baseline_lambda"] = fit.spec.shared_baseline_lambda;
    model["baseline"] = smooth_spec_to_json(fit.spec.baseline);
    ordered_json smooths = ordered_json::array();
    for (const SmoothTermSpec& t : fit.spec.smooths) smooths.push_back(smooth_spec_to_json(t));
    model["smooths"] = smooths;
    model["internet_linear"] = fit.spec.internet_linear;
    model["regime_linear"] = fit.spec.regime_linear;
    j["model"] = model;

    j["columns"] = fit.column_names;
    j["penalties"] = fit.penalty_names;
    j["lambda"] = fit.lambda;
    j["coefficients"] = vector_to_json(fit.beta);
    j["covariance"] = matrix_to_json(fit.covariance);

    ordered_json edf;
    edf["per_column"] = vector_to_json(fit.edf_per_column);
    ordered_json per_term;
    for (const auto& [name, value] : fit.edf_per_term) per_term[name] = value;
    edf["per_term"] = per_term;
    edf["total"] = fit.edf_total;
    j["edf"] = edf;

    ordered_json stats;
    stats["deviance"] = fit.deviance;
    stats["penalized_deviance"] = fit.penalized_deviance;
    stats["gcv"] = fit.gcv;
    stats["n_rows"] = fit.n_rows;
    stats["n_events"] = fit.n_events;
    stats["iterations"] = fit.pirls_iterations;
    stats["converged"] = fit.converged;
    stats["ridge_used"] = fit.ridge_used;
    stats["plateau_warning"] = fit.plateau_warning;
    j["fit"] = stats;

    j["convergence_trace"] = fit.convergence_trace;
    j["warnings"] = fit.warnings;

    ordered_json blocks = ordered_json::array();
    for (const DesignBlock& b : fit.blocks) {
        ordered_json jb;
        jb["name"] = b.name;
        jb["kind"] = kind_name(b.kind);
        jb["col_start"] = b.col_start;
        jb["col_count"] = b.col_count;
        jb["variable"] = b.variable;
        jb["event_type_level"] = b.event_type_level;
        jb["penalty_index"] = b.penalty_index;
        jb["dropped_to_linear"] = b.dropped_to_linear;
        jb["center"] = b.center;
        if (b.kind == BlockKind::Smooth && !b.dropped_to_linear) {
            ordered_json basis;
            basis["knots"] = b.basis.knots;
            basis["degree"] = b.basis.degree;
            basis["num_basis"] = b.basis.num_basis;
            basis["x_min"] = b.basis.x_min;
            basis["x_max"] = b.basis.x_max;
            jb["basis"] = basis;
            jb["transform"] = matrix_to_json(b.transform);
        }
        blocks.push_back(jb);
    }
    j["blocks"] = blocks;

    return j.dump(1);
}

FitResult fit_from_json(std::string_view json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fit payload is not valid JSON: ") + e.what());
    }
    try {
        FitResult fit;
        const ordered_json& model = j.at("model");
        fit.spec.name = model.at("name").get<std::string>();
        fit.spec.d_max = model.at("d_max").get<int>();
        fit.spec.knot_placement = model.at("knot_placement").get<std::string>() == "quantile"
                                      ? KnotPlacement::Quantile
                                      : KnotPlacement::Uniform;
        fit.spec.shared_baseline_lambda = model.at("shared_baseline_lambda").get<bool>();
        fit.spec.baseline = smooth_spec_from_json(model.at("baseline"));
        for (const auto& t : model.at("smooths")) {
            fit.spec.smooths.push_back(smooth_spec_from_json(t));
        }
        fit.spec.internet_linear = model.at("internet_linear").get<bool>();
        fit.spec.regime_linear = model.at("regime_linear").get<bool>();

        fit.column_names = j.at("columns").get<std::vector<std::string>>();
        fit.penalty_names = j.at("penalties").get<std::vector<std::string>>();
        fit.lambda = j.at("lambda").get<std::vector<double>>();
        const auto beta = j.at("coefficients").get<std::vector<double>>();
        fit.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                     static_cast<Eigen::Index>(beta.size()));
        fit.covariance = matrix_from_json(j.at("covariance"));
        if (fit.covariance.rows() != fit.beta.size() ||
            fit.covariance.cols() != fit.beta.size()) {
            throw DataError("covariance shape does not match the coefficient count");
        }

        const ordered_json& edf = j.at("edf");
        const auto per_col = edf.at("per_column").get<std::vector<double>>();
        fit.edf_per_column = Eigen::Map<const Eigen::VectorXd>(
            per_col.data(), static_cast<Eigen::Index>(per_col.size()));
        for (const auto& [name, value] : edf.at("per_term").items()) {
            fit.edf_per_term[name] = value.get<double>();
        }
        fit.edf_total = edf.at("total").get<double>();

        const ordered_json& stats = j.at("fit");
        fit.deviance = stats.at("deviance").get<double>();
        fit.penalized_deviance = stats.at("penalized_deviance").get<double>();
        fit.gcv = stats.at("gcv").get<double>();
        fit.n_rows = stats.at("n_rows").get<std::int64_t>();
        fit.n_events = stats.at("n_events").get<std::int64_t>();
        fit.pirls_iterations = stats.at("iterations").get<int>();
        fit.converged = stats.at("converged").get<bool>();
        fit.ridge_used = stats.at("ridge_used").get<bool>();
        fit.plateau_warning = stats.at("plateau_warning").get<bool>();

        fit.convergence_trace = j.at("convergence_trace").get<std::vector<double>>();
        fit.warnings = j.at("warnings").get<std::vector<std::string>>();

        for (const auto& jb : j.at("blocks")) {
            DesignBlock b;
            b.name = jb.at("name").get<std::string>();
            b.kind = kind_from_name(jb.at("kind").get<std::string>());
            b.col_start = jb.at("col_start").get<int>();
            b.col_count = jb.at("col_count").get<int>();
            b.variable = jb.at("variable").get<std::string>();
            b.event_type_level = jb.at("event_type_level").get<int>();
            b.penalty_index = jb.at("penalty_index").get<int>();
            b.dropped_to_linear = jb.at("dropped_to_linear").get<bool>();
            b.center = jb.at("center").get<double>();
            if (jb.contains("basis")) {
                const ordered_json& basis = jb.at("basis");
                b.basis.knots = basis.at("knots").get<std::vector<double>>();
                b.basis.degree = basis.at("degree").get<int>();
                b.basis.num_basis = basis.at("num_basis").get<int>();
                b.basis.x_min = basis.at("x_min").get<double>();
                b.basis.x_max = basis.at("x_max").get<double>();
                b.transform = matrix_from_json(jb.at("transform"));
            }
            if (b.col_start < 0 || b.col_count < 0 ||
                b.col_start + b.col_count > fit.beta.size()) {
                throw DataError("design block '" + b.name + "' exceeds the coefficient vector");
            }
            fit.blocks.push_back(std::move(b));
        }
        return fit;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fit payload is missing required fields: ") + e.what());
    }
}

std::string format_curve_csv(const std::vector<CurvePoint>& points) {
    std::string out = "x,estimate,se,clamped\n";
    for (const CurvePoint& p : points) {
        out += format_double(p.x);
        out += ',';
        out += format_double(p.estimate);
        out += ',';
        out += format_double(p.se);
        out += ',';
        out += p.clamped ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string format_coefficient_csv(const std::vector<CoefRow>& rows) {
    std::string out = "term,estimate,se,z,p\n";
    for (const CoefRow& r : rows) {
        out += csv_field(r.term);
        out += ',';
        out += format_double(r.estimate);
        out += ',';
        out += format_double(r.se);
        out += ',';
        out += format_double(r.z);
        out += ',';
        out += format_double(r.p);
        out += '\n';
    }
    return out;
}

}  // namespace delaylens
