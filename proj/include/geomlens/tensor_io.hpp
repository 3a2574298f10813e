#pragma once

// Self-describing binary container (".gt"):
//
//   offset 0   8 bytes   magic "GEOMTNSR"
//   offset 8   u32 LE    version (1)
//   offset 12  u64 LE    header length H
//   offset 20  H bytes   UTF-8 JSON header
//              zero padding up to the next multiple of 8
//              payload: little-endian scalars, row-major
//
// Mandatory header keys: "dtype" ("f32" | "f64"), "shape" (array of
// non-negative integers), "kind" ("embeddings" | "weight_q" | "weight_k" |
// "generic").

#include "geomlens/types.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace geomlens::io {

using json = nlohmann::json;

inline constexpr char kMagic[8] = {'G', 'E', 'O', 'M', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kVersion = 1;

enum class DType { f32, f64 };

std::size_t dtype_size(DType t);
std::string to_string(DType t);
DType parse_dtype(const std::string& s);

class TensorContainer {
public:
    TensorContainer() = default;

    /// Builds a container from f64 values, encoding them as `dtype`. Extra
    /// header keys are merged into the header (mandatory keys win).
    static TensorContainer from_values(const std::string& kind, DType dtype, std::vector<std::uint64_t> shape,
                                       std::span<const double> values, const json& extra = json::object());

    /// Parses the header text and validates the payload size. Throws
    /// FormatError on missing or malformed keys, CorruptPayload on size mismatch.
    static TensorContainer from_parts(std::string header_text, std::vector<std::byte> payload);

    const std::string& header_text() const { return header_text_; }
    const json& header() const { return header_; }
    DType dtype() const { return dtype_; }
    const std::vector<std::uint64_t>& shape() const { return shape_; }
    const std::string& kind() const { return kind_; }
    const std::vector<std::byte>& payload() const { return payload_; }

    std::uint64_t element_count() const;

    /// Payload decoded and promoted to f64.
    std::vector<double> values() const;

    bool operator==(const TensorContainer& other) const {
        return header_text_ == other.header_text_ && payload_ == other.payload_;
    }

private:
    std::string header_text_;
    json header_;
    DType dtype_ = DType::f64;
    std::vector<std::uint64_t> shape_;
    std::string kind_;
    std::vector<std::byte> payload_;
};

std::vector<std::byte> serialize(const TensorContainer& c);
TensorContainer parse(std::span<const std::byte> bytes);

TensorContainer read_container(const std::filesystem::path& path);
/// Reads only the JSON header of a container file.
json read_header(const std::filesystem::path& path);
void write_container(const TensorContainer& c, const std::filesystem::path& path);

// Domain conversions.

TensorContainer embedding_to_container(const EmbeddingTensor& e, DType dtype = DType::f32);
/// Requires kind "embeddings" (or "generic") with a rank-3 shape. Absent
/// seq_labels default to cluster 0 for every sequence.
EmbeddingTensor container_to_embedding(const TensorContainer& c);

TensorContainer matrix_to_container(const Eigen::Ref<const Matrix>& m, const std::string& kind,
                                    DType dtype = DType::f64, const json& extra = json::object());
Matrix container_to_matrix(const TensorContainer& c);

EmbeddingTensor read_embedding(const std::filesystem::path& path);
Matrix read_matrix(const std::filesystem::path& path);
AttentionWeights read_attention_weights(const std::filesystem::path& wq, const std::filesystem::path& wk);

}  // namespace geomlens::io
