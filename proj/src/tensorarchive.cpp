// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/tensorarchive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <set>

#include <json.hpp>

#include "patchcrypt/embedding.hpp"

namespace patchcrypt {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor buffers are copied without byte swapping");

using json = nlohmann::json;
using Kind = ArchiveError::Kind;

constexpr std::string_view kMetadataKey = "__metadata__";

std::uint64_t read_u64_le(std::span<const std::uint8_t> bytes) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (std::size_t i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Element count with overflow detection; nullopt when it does not fit.
std::optional<std::uint64_t> checked_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t count = 1;
  for (std::uint64_t extent : shape) {
    if (extent != 0 && count > std::numeric_limits<std::uint64_t>::max() / extent) {
      return std::nullopt;
    }
    count *= extent;
  }
  return count;
}

std::uint64_t expect_u64(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) {
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    throw ArchiveError(Kind::kBadEntry, where + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

struct Entry {
  TensorRecord record;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

Entry parse_entry(const std::string& name, const json& value) {
  if (!value.is_object()) {
    throw ArchiveError(Kind::kBadEntry, "tensor '" + name + "' is not a JSON object");
  }
  for (const auto& [field, _] : value.items()) {
    if (field != "dtype" && field != "shape" && field != "data_offsets") {
      throw ArchiveError(Kind::kBadEntry,
                         "tensor '" + name + "' has unexpected field '" + field + "'");
    }
  }
  if (!value.contains("dtype") || !value["dtype"].is_string()) {
    throw ArchiveError(Kind::kBadEntry, "tensor '" + name + "' lacks a string dtype");
  }
  if (!value.contains("shape") || !value["shape"].is_array()) {
    throw ArchiveError(Kind::kBadEntry, "tensor '" + name + "' lacks a shape array");
  }
  if (!value.contains("data_offsets") || !value["data_offsets"].is_array() ||
      value["data_offsets"].size() != 2) {
    throw ArchiveError(Kind::kBadEntry,
                       "tensor '" + name + "' lacks a two-element data_offsets array");
  }

  Entry e;
  e.record.name = name;
  const auto dtype_str = value["dtype"].get<std::string>();
  auto dtype = parse_dtype(dtype_str);
  if (!dtype) {
    throw ArchiveError(Kind::kUnknownDtype,
                       "tensor '" + name + "' has unsupported dtype '" + dtype_str + "'");
  }
  e.record.dtype = *dtype;
  for (const auto& extent : value["shape"]) {
    e.record.shape.push_back(expect_u64(extent, "shape extent of '" + name + "'"));
  }
  e.begin = expect_u64(value["data_offsets"][0], "data_offsets of '" + name + "'");
  e.end = expect_u64(value["data_offsets"][1], "data_offsets of '" + name + "'");
  if (e.end < e.begin) {
    throw ArchiveError(Kind::kOffsetLayout, "tensor '" + name + "' has end offset before begin");
  }
  auto count = checked_count(e.record.shape);
  const std::uint64_t elem = dtype_size(e.record.dtype);
  if (!count || *count > std::numeric_limits<std::uint64_t>::max() / elem ||
      *count * elem != e.end - e.begin) {
    throw ArchiveError(Kind::kByteLengthMismatch,
                       "tensor '" + name + "' " + std::string(dtype_name(e.record.dtype)) +
                           shape_string(e.record.shape) + " does not match its " +
                           std::to_string(e.end - e.begin) + "-byte extent");
  }
  return e;
}

std::vector<std::uint8_t> f32_bytes(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * sizeof(float));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<float> f32_values(const TensorRecord& r) {
  std::vector<float> out(r.data.size() / sizeof(float));
  std::memcpy(out.data(), r.data.data(), out.size() * sizeof(float));
  return out;
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI64: return 8;
    case DType::kU8: return 1;
  }
  return 0;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32: return "F32";
    case DType::kF64: return "F64";
    case DType::kI64: return "I64";
    case DType::kU8: return "U8";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
  if (name == "F32") return DType::kF32;
  if (name == "F64") return DType::kF64;
  if (name == "I64") return DType::kI64;
  if (name == "U8") return DType::kU8;
  return std::nullopt;
}

std::uint64_t TensorRecord::element_count() const {
  auto c = checked_count(shape);
  if (!c) throw ArchiveError(Kind::kByteLengthMismatch, "element count of '" + name + "' overflows");
  return *c;
}

const TensorRecord* TensorArchive::find(std::string_view name) const {
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const TensorRecord& r) { return r.name == name; });
  return it == records.end() ? nullptr : &*it;
}

TensorRecord* TensorArchive::find(std::string_view name) {
  return const_cast<TensorRecord*>(std::as_const(*this).find(name));
}

TensorArchive read_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw ArchiveError(Kind::kHeaderOverrun,
                       "archive is " + std::to_string(bytes.size()) +
                           " bytes, too short for the 8-byte header length");
  }
  const std::uint64_t header_len = read_u64_le(bytes);
  if (header_len > bytes.size() - 8) {
    throw ArchiveError(Kind::kHeaderOverrun,
                       "header length " + std::to_string(header_len) + " overruns the " +
                           std::to_string(bytes.size() - 8) + " bytes that follow");
  }
  auto header = bytes.subspan(8, static_cast<std::size_t>(header_len));
  auto buffer = bytes.subspan(8 + static_cast<std::size_t>(header_len));

  // nlohmann keeps the last of duplicate keys; catch them while parsing.
  std::set<std::string> top_keys;
  std::optional<std::string> duplicate;
  json::parser_callback_t on_event = [&](int depth, json::parse_event_t event, json& parsed) {
    if (depth == 1 && event == json::parse_event_t::key) {
      auto key = parsed.get<std::string>();
      if (!top_keys.insert(key).second && !duplicate) duplicate = key;
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(header.begin(), header.end(), on_event);
  } catch (const json::exception& e) {
    throw ArchiveError(Kind::kMalformedJson, std::string("malformed header JSON: ") + e.what());
  }
  if (duplicate) {
    throw ArchiveError(Kind::kDuplicateName, "tensor name '" + *duplicate + "' appears twice");
  }
  if (!doc.is_object()) {
    throw ArchiveError(Kind::kMalformedJson, "header JSON is not an object");
  }

  TensorArchive archive;
  std::vector<Entry> entries;
  for (const auto& [key, value] : doc.items()) {
    if (key == kMetadataKey) {
      if (!value.is_object()) {
        throw ArchiveError(Kind::kBadEntry, "__metadata__ must be an object");
      }
      for (const auto& [mk, mv] : value.items()) {
        if (!mv.is_string()) {
          throw ArchiveError(Kind::kBadEntry, "__metadata__ value for '" + mk + "' is not a string");
        }
        archive.metadata.emplace(mk, mv.get<std::string>());
      }
      continue;
    }
    entries.push_back(parse_entry(key, value));
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.begin, a.end, a.record.name) < std::tie(b.begin, b.end, b.record.name);
  });
  std::uint64_t cursor = 0;
  for (const Entry& e : entries) {
    if (e.begin != cursor) {
      throw ArchiveError(Kind::kOffsetLayout,
                         "tensor '" + e.record.name + "' starts at " + std::to_string(e.begin) +
                             (e.begin < cursor ? ", overlapping the previous tensor ending at "
                                               : ", leaving a gap after offset ") +
                             std::to_string(cursor));
    }
    cursor = e.end;
  }
  if (cursor != buffer.size()) {
    throw ArchiveError(Kind::kOffsetLayout,
                       "tensor data covers " + std::to_string(cursor) + " bytes but the buffer holds " +
                           std::to_string(buffer.size()));
  }

  archive.records.reserve(entries.size());
  for (Entry& e : entries) {
    auto slice = buffer.subspan(static_cast<std::size_t>(e.begin),
                                static_cast<std::size_t>(e.end - e.begin));
    e.record.data.assign(slice.begin(), slice.end());
    archive.records.push_back(std::move(e.record));
  }
  return archive;
}

std::vector<std::uint8_t> write_archive(const TensorArchive& archive) {
  std::vector<const TensorRecord*> sorted;
  sorted.reserve(archive.records.size());
  for (const auto& r : archive.records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const TensorRecord* a, const TensorRecord* b) { return a->name < b->name; });

  std::string header = "{";
  bool first = true;
  if (!archive.metadata.empty()) {
    header += "\"__metadata__\":{";
    bool first_meta = true;
    for (const auto& [k, v] : archive.metadata) {
      if (!first_meta) header += ",";
      header += json(k).dump() + ":" + json(v).dump();
      first_meta = false;
    }
    header += "}";
    first = false;
  }

  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const TensorRecord& r = *sorted[i];
    if (i > 0 && sorted[i - 1]->name == r.name) {
      throw ArchiveError(Kind::kDuplicateName, "tensor name '" + r.name + "' appears twice");
    }
    if (r.name == kMetadataKey) {
      throw ArchiveError(Kind::kBadEntry, "'__metadata__' is reserved and cannot name a tensor");
    }
    if (r.element_count() * dtype_size(r.dtype) != r.data.size()) {
      throw ArchiveError(Kind::kByteLengthMismatch,
                         "tensor '" + r.name + "' " + std::string(dtype_name(r.dtype)) +
                             shape_string(r.shape) + " holds " + std::to_string(r.data.size()) +
                             " bytes");
    }
    if (!first) header += ",";
    first = false;
    header += json(r.name).dump() + ":{\"dtype\":\"" + std::string(dtype_name(r.dtype)) +
              "\",\"shape\":" + shape_string(r.shape) + ",\"data_offsets\":[" +
              std::to_string(offset) + "," + std::to_string(offset + r.data.size()) + "]}";
    offset += r.data.size();
  }
  header += "}";

  std::vector<std::uint8_t> out;
  out.reserve(8 + header.size() + offset);
  append_u64_le(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (const TensorRecord* r : sorted) out.insert(out.end(), r->data.begin(), r->data.end());
  return out;
}

EmbeddingShape embedding_shape(const TensorArchive& archive, std::string_view weight_name,
                               std::optional<std::size_t> patch_size) {
  const TensorRecord* w = archive.find(weight_name);
  if (!w) {
    throw ArchiveError(Kind::kMissingTensor,
                       "archive has no tensor named '" + std::string(weight_name) + "'");
  }
  if (w->dtype != DType::kF32) {
    throw ArchiveError(Kind::kIncompatibleShape,
                       "embedding weight '" + w->name + "' must be F32, found " +
                           std::string(dtype_name(w->dtype)));
  }
  const auto& s = w->shape;
  EmbeddingShape out;
  if (s.size() == 4) {
    if (s[1] != 3) {
      throw ArchiveError(Kind::kBadChannels, "embedding weight '" + w->name + "' " +
                                                 shape_string(s) + " has " +
                                                 std::to_string(s[1]) + " input channels, expected 3");
    }
    if (s[2] != s[3] || s[2] == 0 || s[0] == 0) {
      throw ArchiveError(Kind::kIncompatibleShape, "embedding weight '" + w->name + "' " +
                                                       shape_string(s) +
                                                       " is not a square non-empty kernel");
    }
    if (patch_size && *patch_size != s[2]) {
      throw ArchiveError(Kind::kIncompatibleShape,
                         "patch size " + std::to_string(*patch_size) + " disagrees with kernel " +
                             shape_string(s));
    }
    out.dim = static_cast<std::size_t>(s[0]);
    out.patch_size = static_cast<std::size_t>(s[2]);
  } else if (s.size() == 2) {
    if (!patch_size) {
      throw ArchiveError(Kind::kIncompatibleShape,
                         "embedding weight '" + w->name + "' " + shape_string(s) +
                             " is a matrix; the patch size must be given explicitly");
    }
    if (*patch_size == 0 || s[0] == 0 || s[1] != 3 * *patch_size * *patch_size) {
      throw ArchiveError(Kind::kIncompatibleShape,
                         "embedding weight '" + w->name + "' " + shape_string(s) +
                             " does not have 3*P*P = " +
                             std::to_string(3 * *patch_size * *patch_size) + " columns");
    }
    out.dim = static_cast<std::size_t>(s[0]);
    out.patch_size = *patch_size;
  } else {
    throw ArchiveError(Kind::kIncompatibleShape, "embedding weight '" + w->name + "' " +
                                                     shape_string(s) +
                                                     " must be [D,3,P,P] or [D,3*P*P]");
  }
  return out;
}

PatchEmbedding load_embedding(const TensorArchive& archive, const EmbeddingTensorNames& names,
                              const Normalization& norm, std::optional<std::size_t> patch_size) {
  const EmbeddingShape shape = embedding_shape(archive, names.weight, patch_size);
  std::vector<float> bias(shape.dim, 0.0f);
  if (const TensorRecord* b = archive.find(names.bias)) {
    if (b->dtype != DType::kF32 || b->shape != std::vector<std::uint64_t>{shape.dim}) {
      throw ArchiveError(Kind::kIncompatibleShape,
                         "embedding bias '" + b->name + "' must be F32[" +
                             std::to_string(shape.dim) + "], found " +
                             std::string(dtype_name(b->dtype)) + shape_string(b->shape));
    }
    bias = f32_values(*b);
  }
  const std::vector<float> kernel = f32_values(*archive.find(names.weight));
  return PatchEmbedding::from_conv_layout(kernel, bias, shape.patch_size, shape.dim, norm);
}

TensorArchive adapt_archive(const TensorArchive& archive, const Permutation& perm,
                            const EmbeddingTensorNames& names,
                            std::optional<std::size_t> patch_size) {
  const PatchEmbedding pe = load_embedding(archive, names, Normalization{}, patch_size);
  const PatchEmbedding adapted = adapt_embedding(pe, perm);

  TensorArchive out = archive;
  out.find(names.weight)->data = f32_bytes(adapted.to_conv_layout());
  out.metadata[std::string(kAdaptedKey)] = "true";
  out.metadata[std::string(kPatchSizeKey)] = std::to_string(pe.patch_size());
  return out;
}

TensorArchive adapt_archive(const TensorArchive& archive, const SecretKey& key,
                            const EmbeddingTensorNames& names,
                            std::optional<std::size_t> patch_size) {
  const EmbeddingShape shape = embedding_shape(archive, names.weight, patch_size);
  return adapt_archive(archive,
                       generate_permutation(key, 3 * shape.patch_size * shape.patch_size), names,
                       patch_size);
}

}  // namespace patchcrypt
