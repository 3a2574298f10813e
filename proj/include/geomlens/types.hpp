#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geomlens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

/// Hidden states of one layer: C sequences × T positions × d features,
/// stored row-major so that h_{c,t} is a contiguous d-vector.
class EmbeddingTensor {
public:
    EmbeddingTensor() = default;
    EmbeddingTensor(std::size_t C, std::size_t T, std::size_t d);
    EmbeddingTensor(std::size_t C, std::size_t T, std::size_t d, std::vector<double> data);

    std::size_t num_sequences() const { return C_; }
    std::size_t num_positions() const { return T_; }
    std::size_t dim() const { return d_; }

    double& at(std::size_t c, std::size_t t, std::size_t j) { return data_[(c * T_ + t) * d_ + j]; }
    double at(std::size_t c, std::size_t t, std::size_t j) const { return data_[(c * T_ + t) * d_ + j]; }

    std::span<const double> token(std::size_t c, std::size_t t) const {
        return {data_.data() + (c * T_ + t) * d_, d_};
    }
    std::span<double> token(std::size_t c, std::size_t t) {
        return {data_.data() + (c * T_ + t) * d_, d_};
    }

    /// T×d view of sequence c.
    ConstRowMap sequence(std::size_t c) const {
        return ConstRowMap(data_.data() + c * T_ * d_, static_cast<Eigen::Index>(T_),
                           static_cast<Eigen::Index>(d_));
    }
    /// (C·T)×d view of every token, sequence-major.
    ConstRowMap tokens() const {
        return ConstRowMap(data_.data(), static_cast<Eigen::Index>(C_ * T_),
                           static_cast<Eigen::Index>(d_));
    }
    RowMap tokens() {
        return RowMap(data_.data(), static_cast<Eigen::Index>(C_ * T_), static_cast<Eigen::Index>(d_));
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    int layer = 0;
    std::vector<long long> seq_labels;
    std::string model_name;
    bool dropped_first_token = false;

    /// Throws InvalidInput unless dimensions are positive, the label count
    /// matches C and every entry is finite.
    void validate() const;

private:
    std::size_t C_ = 0;
    std::size_t T_ = 0;
    std::size_t d_ = 0;
    std::vector<double> data_;
};

/// Query/key projections of one attention head, each d × d_head.
struct AttentionWeights {
    Matrix wq;
    Matrix wk;
    int layer = 0;
    int head = 0;

    Eigen::Index d_head() const { return wq.cols(); }
    Eigen::Index dim() const { return wq.rows(); }

    void validate() const;

    /// W = W^q (W^k)^T / sqrt(d_head).
    Matrix bilinear() const;
};

}  // namespace geomlens
