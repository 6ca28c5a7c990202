#pragma once

#include "common.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <stdexcept>
#include <vector>

namespace cdpred {

/// Correlation-matrix PCA: z-scoring statistics plus principal axes sorted by descending eigenvalue.
struct PcaModel {
    Vector col_means;
    Vector col_stds;   // constant columns carry 1 so they standardize to 0
    Matrix components;  // d x d, row i = i-th principal axis
    Vector eigenvalues;
    Vector explained_variance_ratio;

    Eigen::Index dim() const noexcept { return col_means.size(); }
};

inline PcaModel fit_pca(const Matrix& x) {
    if (x.rows() < 2) throw std::invalid_argument("fit_pca: need at least 2 rows");
    if (x.cols() < 1) throw std::invalid_argument("fit_pca: need at least 1 column");
    if (!x.allFinite()) throw std::invalid_argument("fit_pca: non-finite input");

    const double denom = static_cast<double>(x.rows() - 1);
    PcaModel m;
    m.col_means = x.colwise().mean().transpose();
    Matrix z = x.rowwise() - m.col_means.transpose();
    m.col_stds = (z.colwise().squaredNorm().array() / denom).sqrt().matrix().transpose();
    for (Eigen::Index j = 0; j < m.col_stds.size(); ++j)
        if (!(m.col_stds(j) > 0.0)) m.col_stds(j) = 1.0;
    z.array().rowwise() /= m.col_stds.transpose().array();

    const Matrix cov = (z.transpose() * z) / denom;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");

    const Eigen::Index d = cov.rows();
    m.eigenvalues.resize(d);
    m.components.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        // Solver returns ascending order.
        const Eigen::Index src = d - 1 - i;
        m.eigenvalues(i) = std::max(0.0, solver.eigenvalues()(src));
        Vector axis = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        for (Eigen::Index j = 1; j < d; ++j)
            if (std::abs(axis(j)) > std::abs(axis(arg))) arg = j;
        if (axis(arg) < 0) axis = -axis;
        m.components.row(i) = axis.transpose();
    }
    const double total = m.eigenvalues.sum();
    m.explained_variance_ratio = total > 0 ? Vector(m.eigenvalues / total) : Vector(Vector::Zero(d));
    return m;
}

/// Smallest k whose cumulative explained-variance ratio reaches `threshold`.
inline Eigen::Index components_for_variance(const PcaModel& model, double threshold = 0.95) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("components_for_variance: threshold must lie in (0, 1]");
    const Eigen::Index d = model.explained_variance_ratio.size();
    if (d == 0) throw std::invalid_argument("components_for_variance: model not fitted");
    if (model.explained_variance_ratio.sum() <= 0.0) return 1;
    double cum = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        cum += model.explained_variance_ratio(k);
        if (cum >= threshold) return k + 1;
    }
    // Rounding can leave the full sum a few ulps below 1.
    return d;
}

inline Matrix standardize(const PcaModel& model, const Matrix& x) {
    if (x.cols() != model.dim()) throw std::invalid_argument("pca: column-count mismatch");
    Matrix z = x.rowwise() - model.col_means.transpose();
    z.array().rowwise() /= model.col_stds.transpose().array();
    return z;
}

/// Projects standardized rows of `x` onto the first k principal axes.
inline Matrix transform(const PcaModel& model, const Matrix& x, Eigen::Index k) {
    if (k < 1 || k > model.dim()) throw std::invalid_argument("pca transform: k out of range");
    return standardize(model, x) * model.components.topRows(k).transpose();
}

/// Maps k-dimensional scores back to standardized feature space.
inline Matrix back_project(const PcaModel& model, const Matrix& scores) {
    const Eigen::Index k = scores.cols();
    if (k < 1 || k > model.dim()) throw std::invalid_argument("pca back_project: k out of range");
    return scores * model.components.topRows(k);
}

inline nlohmann::json to_json(const PcaModel& m) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    std::vector<double> comps;
    comps.reserve(static_cast<std::size_t>(m.components.size()));
    for (Eigen::Index i = 0; i < m.components.rows(); ++i)
        for (Eigen::Index j = 0; j < m.components.cols(); ++j) comps.push_back(m.components(i, j));
    return {{"format", "cdpred.pca"},
            {"dim", m.dim()},
            {"means", vec(m.col_means)},
            {"stds", vec(m.col_stds)},
            {"eigenvalues", vec(m.eigenvalues)},
            {"explained_variance_ratio", vec(m.explained_variance_ratio)},
            {"components_row_major", comps}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cdpred.pca") throw std::invalid_argument("pca_from_json: not a PCA model");
    const auto d = j.at("dim").get<Eigen::Index>();
    auto vec = [&](const char* key) {
        const auto v = j.at(key).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != d) throw std::invalid_argument(std::string("pca_from_json: bad length for ") + key);
        return Vector(Eigen::Map<const Vector>(v.data(), d));
    };
    PcaModel m;
    m.col_means = vec("means");
    m.col_stds = vec("stds");
    m.eigenvalues = vec("eigenvalues");
    m.explained_variance_ratio = vec("explained_variance_ratio");
    const auto comps = j.at("components_row_major").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(comps.size()) != d * d) throw std::invalid_argument("pca_from_json: bad component matrix size");
    m.components = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(comps.data(), d, d);
    return m;
}

}  // namespace cdpred
