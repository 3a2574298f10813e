#include "geomlens/geometry_metrics.hpp"

#include "geomlens/errors.hpp"
#include "geomlens/numeric.hpp"

#include <cmath>

namespace geomlens::geometry {

namespace {

// Normalized copies of the nonzero rows.
Matrix nonzero_unit_rows(const Eigen::Ref<const Matrix>& m, std::vector<Eigen::Index>* kept = nullptr) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (m.row(i).squaredNorm() > 0.0) idx.push_back(i);
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto rr = static_cast<Eigen::Index>(r);
        out.row(rr) = m.row(idx[r]) / m.row(idx[r]).norm();
    }
    if (kept) *kept = std::move(idx);
    return out;
}

}  // namespace

Incoherence incoherence(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& ctx) {
    if (pos.cols() != ctx.cols()) throw InvalidInput("pos and ctx dimensions differ");
    const Matrix p = nonzero_unit_rows(pos);
    const Matrix c = nonzero_unit_rows(ctx);
    if (p.rows() == 0 || c.rows() == 0) throw DegenerateInput("incoherence needs a nonzero row in each basis");
    const Matrix cos = (p * c.transpose()).cwiseAbs();
    Incoherence inc;
    inc.pairs = static_cast<std::size_t>(cos.size());
    inc.max = std::min(1.0, cos.maxCoeff());
    inc.mean = std::min(inc.max, numeric::pairwise_sum({cos.data(), inc.pairs}) / static_cast<double>(inc.pairs));
    return inc;
}

ClusterSimilarity cluster_similarity(const Eigen::Ref<const Matrix>& ctx, const std::vector<long long>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != ctx.rows())
        throw InvalidInput("label count does not match the number of context rows");
    if (ctx.rows() < 2) throw DegenerateInput("cluster similarity needs at least two sequences");
    std::vector<Eigen::Index> kept;
    const Matrix u = nonzero_unit_rows(ctx, &kept);
    const Matrix g = u * u.transpose();
    std::vector<double> inter, intra;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = i + 1; j < g.rows(); ++j) {
            const bool same = labels[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])] ==
                              labels[static_cast<std::size_t>(kept[static_cast<std::size_t>(j)])];
            (same ? intra : inter).push_back(g(i, j));
        }
    ClusterSimilarity s;
    s.inter_pairs = inter.size();
    s.intra_pairs = intra.size();
    if (!inter.empty()) s.inter = numeric::pairwise_sum(inter) / static_cast<double>(inter.size());
    if (!intra.empty()) s.intra = numeric::pairwise_sum(intra) / static_cast<double>(intra.size());
    return s;
}

Matrix joint_gram(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& ctx) {
    if (ctx.rows() > 0 && pos.cols() != ctx.cols()) throw InvalidInput("pos and ctx dimensions differ");
    Matrix stacked(pos.rows() + ctx.rows(), pos.cols());
    stacked.topRows(pos.rows()) = pos;
    if (ctx.rows() > 0) stacked.bottomRows(ctx.rows()) = ctx;
    bool any = false;
    for (Eigen::Index i = 0; i < stacked.rows(); ++i) {
        const double n = stacked.row(i).norm();
        if (n > 0.0) {
            stacked.row(i) /= n;
            any = true;
        }
    }
    if (!any) throw DegenerateInput("joint Gram of all-zero bases");
    Matrix g = Matrix::Zero(stacked.rows(), stacked.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(stacked);
    g = g.selfadjointView<Eigen::Lower>();
    g = g.cwiseMax(-1.0).cwiseMin(1.0);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        if (stacked.row(i).squaredNorm() > 0.0) g(i, i) = 1.0;
    return g;
}

SimilarityReport similarity_report(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& ctx,
                                   const std::vector<long long>& labels) {
    SimilarityReport r;
    r.incoherence = incoherence(pos, ctx);
    r.clusters = cluster_similarity(ctx, labels);
    return r;
}

PcaProjection pca_projection(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& cvec_samples,
                             int n_components) {
    const Eigen::Index T = pos.rows();
    if (T < 2) throw InvalidInput("PCA projection needs T >= 2");
    if (n_components < 1) throw InvalidInput("n_components must be positive");
    if (cvec_samples.rows() > 0 && cvec_samples.cols() != pos.cols())
        throw InvalidInput("cvec samples and pos dimensions differ");
    const Eigen::Index k = n_components;

    Eigen::BDCSVD<Matrix> svd(pos, Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    if (sigma.size() == 0 || sigma(0) == 0.0) throw DegenerateInput("positional basis is zero");

    PcaProjection out;
    out.axes = Matrix::Zero(pos.cols(), k);
    const double tol = sigma(0) * 1e-12 * static_cast<double>(std::max(pos.rows(), pos.cols()));
    for (Eigen::Index i = 0; i < k && i < sigma.size(); ++i) {
        if (sigma(i) <= tol) break;
        Vector axis = svd.matrixV().col(i);
        if (pos.row(T - 1).dot(axis) < 0.0) axis = -axis;
        out.axes.col(i) = axis;
        ++out.effective_components;
    }
    if (out.effective_components < n_components)
        out.warning = "rank(P) = " + std::to_string(out.effective_components) + " < " +
                      std::to_string(n_components) + "; missing coordinates are zero";
    out.pos_coords = pos * out.axes;
    out.cvec_coords = cvec_samples.rows() > 0 ? Matrix(cvec_samples * out.axes) : Matrix(0, k);
    return out;
}

}  // namespace geomlens::geometry
