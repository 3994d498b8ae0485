#pragma once

#include <filesystem>
#include <variant>

#include "litefbcn/tensor.hpp"

namespace lfb {

// Raw-tensor file format (.rtf-tensor). Little-endian on disk regardless of
// host byte order:
//
//   bytes 0..3   magic "LFBT"
//   u32          version, currently 1
//   u32          dtype code (0 = F32, 1 = F64)
//   u32          rank (at most 8)
//   u32 x rank   dims, each positive
//   payload      row-major elements, 4 or 8 bytes each
//
// Round-tripping a tensor through write/read reproduces it bit-exactly.

inline constexpr std::uint32_t kRtfVersion = 1;
inline constexpr std::uint32_t kRtfMaxRank = 8;
inline constexpr const char* kRtfExtension = ".rtf-tensor";

using TensorVariant = std::variant<Tensor<float>, Tensor<double>>;

template <typename T>
void write_rtf(const std::filesystem::path& path, const Tensor<T>& t);

TensorVariant read_rtf(const std::filesystem::path& path);

// Reads and converts to the requested element type (exact when the stored
// dtype already matches).
template <typename T>
Tensor<T> read_rtf_as(const std::filesystem::path& path);

Dtype rtf_dtype(const TensorVariant& v);

}  // namespace lfb
