#include "geomlens/tensor_io.hpp"

#include "geomlens/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace geomlens::io {

namespace {

constexpr std::size_t kPrefixSize = 8 + 4 + 8;

template <typename U>
void put_le(std::vector<std::byte>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFFu));
}

template <typename U>
U get_le(const std::byte* p) {
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(std::to_integer<unsigned>(p[i])) << (8 * i);
    return value;
}

std::size_t padding_for(std::size_t offset) { return (8 - offset % 8) % 8; }

const char* const kKinds[] = {"embeddings", "weight_q", "weight_k", "generic"};

}  // namespace

std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

std::string to_string(DType t) { return t == DType::f32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& s) {
    if (s == "f32") return DType::f32;
    if (s == "f64") return DType::f64;
    throw FormatError("unknown dtype '" + s + "'");
}

std::uint64_t TensorContainer::element_count() const {
    std::uint64_t n = 1;
    for (auto s : shape_) n *= s;
    return n;
}

namespace {

struct HeaderInfo {
    json header;
    DType dtype = DType::f64;
    std::vector<std::uint64_t> shape;
    std::string kind;

    std::uint64_t payload_bytes() const {
        std::uint64_t n = dtype_size(dtype);
        for (auto d : shape) n *= d;
        return n;
    }
};

HeaderInfo parse_header(const std::string& header_text) {
    HeaderInfo info;
    try {
        info.header = json::parse(header_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("header is not valid JSON: ") + e.what());
    }
    const json& h = info.header;
    if (!h.is_object()) throw FormatError("header must be a JSON object");
    for (const char* key : {"dtype", "shape", "kind"})
        if (!h.contains(key)) throw FormatError(std::string("header is missing mandatory key '") + key + "'");
    if (!h["dtype"].is_string()) throw FormatError("header key 'dtype' must be a string");
    info.dtype = parse_dtype(h["dtype"].get<std::string>());
    if (!h["kind"].is_string()) throw FormatError("header key 'kind' must be a string");
    info.kind = h["kind"].get<std::string>();
    if (std::find(std::begin(kKinds), std::end(kKinds), info.kind) == std::end(kKinds))
        throw FormatError("unknown kind '" + info.kind + "'");
    if (!h["shape"].is_array()) throw FormatError("header key 'shape' must be an array");
    for (const auto& dim : h["shape"]) {
        if (!dim.is_number_unsigned() && !(dim.is_number_integer() && dim.get<long long>() >= 0))
            throw FormatError("shape entries must be non-negative integers");
        info.shape.push_back(dim.get<std::uint64_t>());
    }
    return info;
}

// Reads magic, version, header and padding; leaves the stream at the payload.
std::string read_prefix(std::istream& in) {
    std::array<std::byte, kPrefixSize> prefix{};
    if (!in.read(reinterpret_cast<char*>(prefix.data()), kPrefixSize))
        throw FormatError("file too short for container prefix");
    if (std::memcmp(prefix.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("bad magic");
    const auto version = get_le<std::uint32_t>(prefix.data() + 8);
    if (version != kVersion) throw UnsupportedVersion("unsupported container version " + std::to_string(version));
    const auto header_len = get_le<std::uint64_t>(prefix.data() + 12);
    if (header_len > (1ULL << 32)) throw FormatError("implausible header length");
    std::string header(static_cast<std::size_t>(header_len), '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
        throw FormatError("header length exceeds file size");
    const std::size_t pad = padding_for(kPrefixSize + header.size());
    char zeros[8] = {};
    if (pad > 0) {
        if (!in.read(zeros, static_cast<std::streamsize>(pad)))
            throw CorruptPayload("file truncated inside header padding");
        for (std::size_t i = 0; i < pad; ++i)
            if (zeros[i] != 0) throw FormatError("non-zero header padding");
    }
    return header;
}

}  // namespace

TensorContainer TensorContainer::from_parts(std::string header_text, std::vector<std::byte> payload) {
    HeaderInfo info = parse_header(header_text);
    TensorContainer c;
    c.header_ = std::move(info.header);
    c.dtype_ = info.dtype;
    c.kind_ = std::move(info.kind);
    c.shape_ = std::move(info.shape);
    c.header_text_ = std::move(header_text);
    c.payload_ = std::move(payload);
    const std::uint64_t expected = c.element_count() * dtype_size(c.dtype_);
    if (c.payload_.size() != expected)
        throw CorruptPayload("payload has " + std::to_string(c.payload_.size()) + " bytes, header implies " +
                             std::to_string(expected));
    return c;
}

TensorContainer TensorContainer::from_values(const std::string& kind, DType dtype, std::vector<std::uint64_t> shape,
                                             std::span<const double> values, const json& extra) {
    json h = extra.is_object() ? extra : json::object();
    h["dtype"] = to_string(dtype);
    h["shape"] = shape;
    h["kind"] = kind;

    std::vector<std::byte> payload;
    payload.reserve(values.size() * dtype_size(dtype));
    for (double v : values) {
        if (dtype == DType::f32)
            put_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
            put_le(payload, std::bit_cast<std::uint64_t>(v));
    }
    return from_parts(h.dump(), std::move(payload));
}

std::vector<double> TensorContainer::values() const {
    const std::size_t n = static_cast<std::size_t>(element_count());
    std::vector<double> out(n);
    const std::byte* p = payload_.data();
    if (dtype_ == DType::f32) {
        for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
    }
    return out;
}

std::vector<std::byte> serialize(const TensorContainer& c) {
    const std::string& h = c.header_text();
    std::vector<std::byte> out;
    const std::size_t pad = padding_for(kPrefixSize + h.size());
    out.reserve(kPrefixSize + h.size() + pad + c.payload().size());
    for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
    put_le(out, kVersion);
    put_le(out, static_cast<std::uint64_t>(h.size()));
    for (char ch : h) out.push_back(static_cast<std::byte>(ch));
    out.insert(out.end(), pad, std::byte{0});
    out.insert(out.end(), c.payload().begin(), c.payload().end());
    return out;
}

TensorContainer parse(std::span<const std::byte> bytes) {
    if (bytes.size() < kPrefixSize) throw FormatError("file too short for container prefix");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("bad magic");
    const auto version = get_le<std::uint32_t>(bytes.data() + 8);
    if (version != kVersion) throw UnsupportedVersion("unsupported container version " + std::to_string(version));
    const auto header_len = get_le<std::uint64_t>(bytes.data() + 12);
    if (header_len > bytes.size() - kPrefixSize) throw FormatError("header length exceeds file size");
    const std::size_t hlen = static_cast<std::size_t>(header_len);
    std::string header(reinterpret_cast<const char*>(bytes.data() + kPrefixSize), hlen);
    const std::size_t pad = padding_for(kPrefixSize + hlen);
    const std::size_t payload_at = kPrefixSize + hlen + pad;
    if (payload_at > bytes.size()) throw CorruptPayload("file truncated inside header padding");
    for (std::size_t i = kPrefixSize + hlen; i < payload_at; ++i)
        if (bytes[i] != std::byte{0}) throw FormatError("non-zero header padding");
    std::vector<std::byte> payload(bytes.begin() + static_cast<std::ptrdiff_t>(payload_at), bytes.end());
    return TensorContainer::from_parts(std::move(header), std::move(payload));
}

TensorContainer read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
        throw IoError("failed reading '" + path.string() + "'");
    return parse(bytes);
}

json read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return parse_header(read_prefix(in)).header;
}

void write_container(const TensorContainer& c, const std::filesystem::path& path) {
    const auto bytes = serialize(c);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TensorContainer embedding_to_container(const EmbeddingTensor& e, DType dtype) {
    json extra;
    extra["layer"] = e.layer;
    extra["seq_labels"] = e.seq_labels;
    if (!e.model_name.empty()) extra["model_name"] = e.model_name;
    if (e.dropped_first_token) extra["dropped_first_token"] = true;
    return TensorContainer::from_values("embeddings", dtype,
                                        {e.num_sequences(), e.num_positions(), e.dim()}, e.data(), extra);
}

EmbeddingTensor container_to_embedding(const TensorContainer& c) {
    if (c.kind() != "embeddings" && c.kind() != "generic")
        throw InvalidInput("container kind '" + c.kind() + "' is not an embedding tensor");
    if (c.shape().size() != 3) throw InvalidInput("embedding container must have a rank-3 shape");
    const auto& s = c.shape();
    EmbeddingTensor e(s[0], s[1], s[2], c.values());
    const json& h = c.header();
    if (h.contains("layer")) e.layer = h["layer"].get<int>();
    if (h.contains("seq_labels") && !h["seq_labels"].is_null())
        e.seq_labels = h["seq_labels"].get<std::vector<long long>>();
    if (h.contains("model_name")) e.model_name = h["model_name"].get<std::string>();
    if (h.contains("dropped_first_token")) e.dropped_first_token = h["dropped_first_token"].get<bool>();
    e.validate();
    return e;
}

TensorContainer matrix_to_container(const Eigen::Ref<const Matrix>& m, const std::string& kind, DType dtype,
                                    const json& extra) {
    const RowMatrix rm = m;
    return TensorContainer::from_values(
        kind, dtype, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
        std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())), extra);
}

Matrix container_to_matrix(const TensorContainer& c) {
    const auto& s = c.shape();
    if (s.size() != 2) throw InvalidInput("expected a rank-2 container, got rank " + std::to_string(s.size()));
    const auto v = c.values();
    return ConstRowMap(v.data(), static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(s[1]));
}

// Streams the payload straight into the tensor instead of going through a
// TensorContainer; layer files are large.
EmbeddingTensor read_embedding(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    const HeaderInfo info = parse_header(read_prefix(in));
    if (info.kind != "embeddings" && info.kind != "generic")
        throw InvalidInput("container kind '" + info.kind + "' is not an embedding tensor");
    if (info.shape.size() != 3) throw InvalidInput("embedding container must have a rank-3 shape");

    const auto payload_at = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(static_cast<std::streamoff>(payload_at), std::ios::beg);
    if (file_size - payload_at != info.payload_bytes())
        throw CorruptPayload("payload has " + std::to_string(file_size - payload_at) + " bytes, header implies " +
                             std::to_string(info.payload_bytes()));

    const std::size_t n = static_cast<std::size_t>(info.payload_bytes() / dtype_size(info.dtype));
    std::vector<double> values(n);
    constexpr std::size_t kChunk = 1 << 16;
    std::vector<std::byte> buf(kChunk * dtype_size(info.dtype));
    for (std::size_t at = 0; at < n; at += kChunk) {
        const std::size_t m = std::min(kChunk, n - at);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(m * dtype_size(info.dtype))))
            throw CorruptPayload("failed reading payload of '" + path.string() + "'");
        const std::byte* p = buf.data();
        if (info.dtype == DType::f32) {
            for (std::size_t i = 0; i < m; ++i) values[at + i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
        } else if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(values.data() + at, p, m * 8);
        } else {
            for (std::size_t i = 0; i < m; ++i) values[at + i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
        }
    }

    const auto& s = info.shape;
    EmbeddingTensor e(s[0], s[1], s[2], std::move(values));
    const json& h = info.header;
    if (h.contains("layer")) e.layer = h["layer"].get<int>();
    if (h.contains("seq_labels") && !h["seq_labels"].is_null())
        e.seq_labels = h["seq_labels"].get<std::vector<long long>>();
    if (h.contains("model_name")) e.model_name = h["model_name"].get<std::string>();
    if (h.contains("dropped_first_token")) e.dropped_first_token = h["dropped_first_token"].get<bool>();
    e.validate();
    return e;
}

Matrix read_matrix(const std::filesystem::path& path) { return container_to_matrix(read_container(path)); }

AttentionWeights read_attention_weights(const std::filesystem::path& wq, const std::filesystem::path& wk) {
    const auto cq = read_container(wq);
    const auto ck = read_container(wk);
    AttentionWeights w;
    w.wq = container_to_matrix(cq);
    w.wk = container_to_matrix(ck);
    const json& h = cq.header();
    if (h.contains("layer")) w.layer = h["layer"].get<int>();
    if (h.contains("head")) w.head = h["head"].get<int>();
    w.validate();
    return w;
}

}  // namespace geomlens::io
