#include "geomlens/decompose.hpp"

#include "geomlens/errors.hpp"
#include "geomlens/numeric.hpp"

#include <cmath>
#include <fstream>

namespace geomlens {

Vector Decomposition::cvec(std::size_t c, std::size_t t) const {
    const auto T = num_positions();
    return ctx.row(static_cast<Eigen::Index>(c)).transpose() +
           resid.row(static_cast<Eigen::Index>(c * T + t)).transpose();
}

Matrix Decomposition::cvec_sequence(std::size_t c) const {
    const auto T = static_cast<Eigen::Index>(num_positions());
    Matrix out = resid.middleRows(static_cast<Eigen::Index>(c) * T, T);
    out.rowwise() += ctx.row(static_cast<Eigen::Index>(c));
    return out;
}

EmbeddingTensor Decomposition::reconstruct() const {
    const auto C = num_sequences();
    const auto T = num_positions();
    const auto d = static_cast<std::size_t>(mu.size());
    EmbeddingTensor e(C, T, d);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) {
            auto row = e.token(c, t);
            const auto r = static_cast<Eigen::Index>(c * T + t);
            for (std::size_t j = 0; j < d; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                row[j] = mu(jj) + pos(static_cast<Eigen::Index>(t), jj) + ctx(static_cast<Eigen::Index>(c), jj) +
                         resid(r, jj);
            }
        }
    return e;
}

PositionalBasis PositionalBasis::from_rows(const Eigen::Ref<const Matrix>& pos) {
    PositionalBasis b;
    b.P = pos;
    b.normalized = pos;
    for (Eigen::Index t = 0; t < pos.rows(); ++t) {
        const double n = pos.row(t).norm();
        if (n == 0.0) {
            b.zero_rows.push_back(t);
        } else {
            b.normalized.row(t) /= n;
        }
    }
    return b;
}

bool PositionalBasis::is_zero_row(Eigen::Index t) const {
    for (auto z : zero_rows)
        if (z == t) return true;
    return false;
}

MeanComponents decompose_means(const EmbeddingTensor& e) {
    e.validate();
    const auto C = e.num_sequences();
    const auto T = e.num_positions();
    const auto d = e.dim();
    const double* base = e.data().data();

    // Row-major scratch: per-position means (T×d) and per-sequence means (C×d).
    RowMatrix pos_mean(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(d));
    RowMatrix ctx_mean(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < T; ++t)
        numeric::pairwise_row_sum(base + t * d, 0, C, T * d, d, pos_mean.row(static_cast<Eigen::Index>(t)).data());
    pos_mean /= static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c)
        numeric::pairwise_row_sum(base + c * T * d, 0, T, d, d, ctx_mean.row(static_cast<Eigen::Index>(c)).data());
    ctx_mean /= static_cast<double>(T);

    MeanComponents m;
    m.mu.resize(static_cast<Eigen::Index>(d));
    numeric::pairwise_row_sum(pos_mean.data(), 0, T, d, d, m.mu.data());
    m.mu /= static_cast<double>(T);

    m.pos = pos_mean;
    m.pos.rowwise() -= m.mu.transpose();
    m.ctx = ctx_mean;
    m.ctx.rowwise() -= m.mu.transpose();
    return m;
}

Decomposition decompose(const EmbeddingTensor& e) {
    MeanComponents m = decompose_means(e);
    const auto C = e.num_sequences();
    const auto T = e.num_positions();
    const auto d = static_cast<Eigen::Index>(e.dim());

    Decomposition dec;
    dec.resid.resize(static_cast<Eigen::Index>(C * T), d);
    for (std::size_t c = 0; c < C; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            const auto r = static_cast<Eigen::Index>(c * T + t);
            const double* h = e.token(c, t).data();
            double* out = dec.resid.row(r).data();
            for (Eigen::Index j = 0; j < d; ++j) out[j] = h[j] - m.mu(j) - m.pos(ti, j) - m.ctx(ci, j);
        }
    }
    dec.mu = std::move(m.mu);
    dec.pos = std::move(m.pos);
    dec.ctx = std::move(m.ctx);
    return dec;
}

std::optional<EmbeddingTensor> drop_artifacts(const EmbeddingTensor& e, const ArtifactOptions& opts) {
    if (opts.drop_layer_if_last) {
        if (!opts.final_layer) throw InvalidInput("drop_layer_if_last requires the final layer index");
        if (e.layer == *opts.final_layer) return std::nullopt;
    }
    if (!opts.drop_first_token) return e;
    const auto C = e.num_sequences();
    const auto T = e.num_positions();
    const auto d = e.dim();
    if (T < 2) throw InvalidInput("cannot drop the first token of a T=1 tensor");
    EmbeddingTensor out(C, T - 1, d);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 1; t < T; ++t) {
            auto src = e.token(c, t);
            std::copy(src.begin(), src.end(), out.token(c, t - 1).begin());
        }
    out.layer = e.layer;
    out.seq_labels = e.seq_labels;
    out.model_name = e.model_name;
    out.dropped_first_token = true;
    return out;
}

std::optional<EmbeddingTensor> drop_artifacts(EmbeddingTensor&& e, const ArtifactOptions& opts) {
    if (opts.drop_layer_if_last) {
        if (!opts.final_layer) throw InvalidInput("drop_layer_if_last requires the final layer index");
        if (e.layer == *opts.final_layer) return std::nullopt;
    }
    if (!opts.drop_first_token) return std::move(e);
    const auto C = e.num_sequences();
    const auto T = e.num_positions();
    const auto d = e.dim();
    if (T < 2) throw InvalidInput("cannot drop the first token of a T=1 tensor");
    // compact in place: token (c, t) moves to slot c*(T-1) + t-1, never forward
    std::vector<double> data = std::move(e.data());
    for (std::size_t c = 0; c < C; ++c) {
        const auto src = data.begin() + static_cast<std::ptrdiff_t>((c * T + 1) * d);
        std::copy(src, src + static_cast<std::ptrdiff_t>((T - 1) * d),
                  data.begin() + static_cast<std::ptrdiff_t>(c * (T - 1) * d));
    }
    data.resize(C * (T - 1) * d);
    EmbeddingTensor out(C, T - 1, d, std::move(data));
    out.layer = e.layer;
    out.seq_labels = std::move(e.seq_labels);
    out.model_name = std::move(e.model_name);
    out.dropped_first_token = true;
    return out;
}

CrossLayerStats cross_layer_stats(const std::vector<EmbeddingTensor>& layers) {
    if (layers.empty()) throw InvalidInput("cross_layer_stats needs at least one layer");
    const auto C = layers[0].num_sequences();
    const auto T = layers[0].num_positions();
    const auto d = layers[0].dim();
    for (const auto& l : layers)
        if (l.num_sequences() != C || l.num_positions() != T || l.dim() != d)
            throw InvalidInput("all layers must share C, T, d");

    const auto L = layers.size();
    const auto n = C * T;
    CrossLayerStats s;
    s.cosine = Matrix::Identity(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
    s.mean_norm.resize(L);

    std::vector<Vector> norms(L);
    for (std::size_t l = 0; l < L; ++l) {
        norms[l] = layers[l].tokens().rowwise().norm();
        s.mean_norm[l] = numeric::pairwise_sum({norms[l].data(), n}) / static_cast<double>(n);
    }
    std::vector<double> cos(n);
    for (std::size_t a = 0; a < L; ++a)
        for (std::size_t b = a + 1; b < L; ++b) {
            const auto ta = layers[a].tokens();
            const auto tb = layers[b].tokens();
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double denom = norms[a](ii) * norms[b](ii);
                cos[i] = denom == 0.0 ? 0.0 : ta.row(ii).dot(tb.row(ii)) / denom;
            }
            const double v = numeric::pairwise_sum(cos) / static_cast<double>(n);
            s.cosine(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
            s.cosine(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
        }
    return s;
}

void write_decomposition(const Decomposition& dec, const std::filesystem::path& dir, io::DType dtype,
                         const io::json& extra_sidecar) {
    std::filesystem::create_directories(dir);
    const auto C = static_cast<std::uint64_t>(dec.num_sequences());
    const auto T = static_cast<std::uint64_t>(dec.num_positions());
    const auto d = static_cast<std::uint64_t>(dec.mu.size());

    io::write_container(io::TensorContainer::from_values(
                            "generic", dtype, {d}, std::span<const double>(dec.mu.data(), d)),
                        dir / "mu.gt");
    io::write_container(io::matrix_to_container(dec.pos, "generic", dtype), dir / "pos.gt");
    io::write_container(io::matrix_to_container(dec.ctx, "generic", dtype), dir / "ctx.gt");
    io::write_container(io::TensorContainer::from_values(
                            "generic", dtype, {C, T, d},
                            std::span<const double>(dec.resid.data(), static_cast<std::size_t>(dec.resid.size()))),
                        dir / "resid.gt");

    const auto basis = PositionalBasis::from_rows(dec.pos);
    io::json side = extra_sidecar.is_object() ? extra_sidecar : io::json::object();
    side["shapes"] = {{"mu", {d}}, {"pos", {T, d}}, {"ctx", {C, d}}, {"resid", {C, T, d}}};
    side["zero_pos_rows"] = basis.zero_rows;
    side["dtype"] = io::to_string(dtype);
    std::ofstream out(dir / "decomposition.json");
    if (!out) throw IoError("cannot write decomposition sidecar in '" + dir.string() + "'");
    out << side.dump(2) << '\n';
}

}  // namespace geomlens
