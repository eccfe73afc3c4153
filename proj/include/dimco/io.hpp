#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dimco/dataset.hpp"
#include "dimco/encoder.hpp"
#include "dimco/quantizers.hpp"
#include "dimco/retrieval.hpp"

namespace dimco::io {

// All formats are little-endian and start with a 4-byte magic and a u32
// version (currently 1). Readers reject a bad magic or version before looking
// at the payload and report the failing byte offset in a ParseError.
//
//   DEMB  u32 N, u32 D, u32 C, N*D f32 row-major, N u32 labels
//   DCOD  u32 N, u16 k, u16 d, u8 has_labels, packed codes, [N u32 labels]
//   DMDL  encoder config, then every parameter as f64 in layer order
//   DPQ1  u32 k, u32 d, u32 input_dim, u32 padded_dim, centroids as f64
//   DSQ1  u32 k, u32 dim, levels as f64 (dim x k)

inline constexpr std::uint32_t kFormatVersion = 1;
// Bytes before the packed payload of a DCOD file.
inline constexpr std::size_t kCodeHeaderBytes = 17;

using Bytes = std::vector<std::uint8_t>;

Bytes encode_embeddings(const LabeledEmbeddings& data);
LabeledEmbeddings decode_embeddings(std::span<const std::uint8_t> bytes);

Bytes encode_codes(const CodeDatabase& db);
CodeDatabase decode_codes(std::span<const std::uint8_t> bytes);

Bytes encode_model(const EncoderParams& params);
EncoderParams decode_model(std::span<const std::uint8_t> bytes);

Bytes encode_pq(const PQCodebook& codebook);
PQCodebook decode_pq(std::span<const std::uint8_t> bytes);

Bytes encode_sq(const SQCodebook& codebook);
SQCodebook decode_sq(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

LabeledEmbeddings read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const LabeledEmbeddings& data);
CodeDatabase read_codes(const std::filesystem::path& path);
void write_codes(const std::filesystem::path& path, const CodeDatabase& db);
EncoderParams read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const EncoderParams& params);
PQCodebook read_pq(const std::filesystem::path& path);
void write_pq(const std::filesystem::path& path, const PQCodebook& codebook);
SQCodebook read_sq(const std::filesystem::path& path);
void write_sq(const std::filesystem::path& path, const SQCodebook& codebook);

}  // namespace dimco::io
