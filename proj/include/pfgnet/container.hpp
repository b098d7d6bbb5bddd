#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "pfgnet/config.hpp"
#include "pfgnet/params.hpp"
#include "pfgnet/tensor.hpp"

/// Binary formats. All integers little-endian.
///
/// Tensor ("PFGT"):
///   magic[4] version:u8=1 dtype:u8 reserved:u16=0 ndim:u32 dims:u64[ndim] payload
///   dtype 0 = float32, 1 = float64, 2 = raw bytes (used for text blobs)
///
/// Checkpoint ("PFGC"):
///   magic[4] version:u8=1 count:u32 { name_len:u16 name[name_len] tensor }*
///   The first entry is "config" and holds the configuration text as bytes.
///
/// Readers check magic, version, codes and sizes against the bytes actually
/// available before allocating. Malformed input throws IoError.
namespace pfgnet::io {

constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kBytesCode = 2;
constexpr std::uint32_t kMaxRank = 16;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void write_bytes(std::ostream& out, std::string_view bytes);
std::string read_bytes(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

struct Checkpoint {
  TrainConfig config;
  ParamStore params;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Also checks that the parameters are exactly those the config defines.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pfgnet::io
