// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "patchcrypt/error.hpp"
#include "patchcrypt/keyschedule.hpp"

namespace patchcrypt {

// Container layout (the .safetensors convention):
//   u64 little-endian header length N
//   N bytes of JSON: {"__metadata__": {str: str}, name: {"dtype", "shape",
//                     "data_offsets": [begin, end]}, ...}
//   raw little-endian tensor bytes; offsets are relative to this buffer

enum class DType { kF32, kF64, kI64, kU8 };

std::size_t dtype_size(DType dtype);
std::string_view dtype_name(DType dtype);
/// nullopt for anything outside {F32, F64, I64, U8}.
std::optional<DType> parse_dtype(std::string_view name);

struct TensorRecord {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> data;

  std::uint64_t element_count() const;

  friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct TensorArchive {
  /// File order on read; the writer emits lexicographic name order.
  std::vector<TensorRecord> records;
  std::map<std::string, std::string> metadata;

  const TensorRecord* find(std::string_view name) const;
  TensorRecord* find(std::string_view name);
};

class ArchiveError : public Error {
 public:
  enum class Kind {
    kHeaderOverrun,
    kMalformedJson,
    kBadEntry,
    kUnknownDtype,
    kByteLengthMismatch,
    kOffsetLayout,
    kDuplicateName,
    kMissingTensor,
    kIncompatibleShape,
    kBadChannels,
  };

  ArchiveError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

TensorArchive read_archive(std::span<const std::uint8_t> bytes);

/// Canonical form: tensors sorted by name with contiguous offsets from 0,
/// "__metadata__" first when non-empty, no padding or whitespace. Throws
/// ArchiveError on duplicate names or inconsistent records.
std::vector<std::uint8_t> write_archive(const TensorArchive& archive);

inline constexpr std::string_view kDefaultWeightName = "patch_embed.proj.weight";
inline constexpr std::string_view kDefaultBiasName = "patch_embed.proj.bias";
inline constexpr std::string_view kAdaptedKey = "patchcrypt.adapted";
inline constexpr std::string_view kPatchSizeKey = "patchcrypt.patch_size";

struct EmbeddingTensorNames {
  std::string weight{kDefaultWeightName};
  std::string bias{kDefaultBiasName};
};

/// Patch size and dimension of the embedding weight. The weight must be F32
/// with shape [D, 3, P, P], or [D, 3*P*P] when `patch_size` is given.
struct EmbeddingShape {
  std::size_t dim = 0;
  std::size_t patch_size = 0;
};
EmbeddingShape embedding_shape(const TensorArchive& archive, std::string_view weight_name,
                               std::optional<std::size_t> patch_size = std::nullopt);

class PatchEmbedding;
struct Normalization;

/// Builds a PatchEmbedding from the archive's weight and bias tensors. A
/// missing bias tensor means zero bias.
PatchEmbedding load_embedding(const TensorArchive& archive, const EmbeddingTensorNames& names,
                              const Normalization& norm,
                              std::optional<std::size_t> patch_size = std::nullopt);

/// Rewrites only the weight tensor with the key's column permutation and
/// records the adaptation in metadata. The key itself is never stored.
TensorArchive adapt_archive(const TensorArchive& archive, const SecretKey& key,
                            const EmbeddingTensorNames& names = {},
                            std::optional<std::size_t> patch_size = std::nullopt);
TensorArchive adapt_archive(const TensorArchive& archive, const Permutation& perm,
                            const EmbeddingTensorNames& names = {},
                            std::optional<std::size_t> patch_size = std::nullopt);

}  // namespace patchcrypt
