#include "geomlens/types.hpp"

#include "geomlens/errors.hpp"

#include <cmath>
#include <string>

namespace geomlens {

EmbeddingTensor::EmbeddingTensor(std::size_t C, std::size_t T, std::size_t d)
    : EmbeddingTensor(C, T, d, std::vector<double>(C * T * d, 0.0)) {}

EmbeddingTensor::EmbeddingTensor(std::size_t C, std::size_t T, std::size_t d, std::vector<double> data)
    : seq_labels(C, 0), C_(C), T_(T), d_(d), data_(std::move(data)) {
    if (data_.size() != C * T * d)
        throw InvalidInput("embedding data has " + std::to_string(data_.size()) + " entries, expected " +
                           std::to_string(C * T * d));
}

void EmbeddingTensor::validate() const {
    if (C_ == 0 || T_ == 0 || d_ == 0) throw InvalidInput("embedding tensor must have C, T, d >= 1");
    if (seq_labels.size() != C_)
        throw InvalidInput("seq_labels has " + std::to_string(seq_labels.size()) + " entries for C=" +
                           std::to_string(C_));
    for (double v : data_)
        if (!std::isfinite(v)) throw InvalidInput("embedding tensor contains non-finite entries");
}

void AttentionWeights::validate() const {
    if (wq.rows() != wk.rows() || wq.cols() != wk.cols())
        throw InvalidInput("W^q and W^k shapes differ");
    if (wq.cols() == 0 || wq.rows() == 0) throw InvalidInput("empty attention weights");
    if (wq.cols() > wq.rows()) throw InvalidInput("d_head exceeds d");
    if (!wq.allFinite() || !wk.allFinite()) throw InvalidInput("attention weights contain non-finite entries");
}

Matrix AttentionWeights::bilinear() const {
    return (wq * wk.transpose()) / std::sqrt(static_cast<double>(d_head()));
}

}  // namespace geomlens
