#include "pfgnet/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "pfgnet/errors.hpp"
#include "pfgnet/model.hpp"

namespace pfgnet::io {

namespace {

constexpr char kTensorMagic[4] = {'P', 'F', 'G', 'T'};
constexpr char kCheckpointMagic[4] = {'P', 'F', 'G', 'C'};

template <class U>
void put(std::ostream& out, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, sizeof(U));
}

template <class U>
U get(std::istream& in, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw IoError(std::string("truncated ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

// Bytes left in the stream, or the largest size when it cannot tell.
std::uint64_t remaining(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return std::numeric_limits<std::uint64_t>::max();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < here) return 0;
  return static_cast<std::uint64_t>(end - here);
}

struct Header {
  std::uint8_t code;
  Shape dims;
  std::uint64_t payload_bytes;
};

void write_header(std::ostream& out, std::uint8_t code, const Shape& dims) {
  out.write(kTensorMagic, 4);
  put<std::uint8_t>(out, kVersion);
  put<std::uint8_t>(out, code);
  put<std::uint16_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint64_t>(out, d);
}

Header read_header(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw IoError("truncated tensor header");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw IoError("not a PFGT tensor (bad magic)");
  const auto version = get<std::uint8_t>(in, "tensor header");
  if (version != kVersion) throw IoError("unsupported PFGT version " + std::to_string(version));
  Header h;
  h.code = get<std::uint8_t>(in, "tensor header");
  if (h.code > kBytesCode) throw IoError("unknown PFGT dtype code " + std::to_string(h.code));
  if (get<std::uint16_t>(in, "tensor header") != 0) throw IoError("PFGT reserved bytes are not zero");
  const auto ndim = get<std::uint32_t>(in, "tensor header");
  if (ndim > kMaxRank) throw IoError("PFGT rank " + std::to_string(ndim) + " exceeds " + std::to_string(kMaxRank));
  const std::uint64_t width = h.code == 0 ? 4 : h.code == 1 ? 8 : 1;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = get<std::uint64_t>(in, "tensor dims");
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / width / d) {
      throw IoError("PFGT dims overflow");
    }
    count *= d;
    h.dims.push_back(static_cast<std::size_t>(d));
  }
  h.payload_bytes = count * width;
  if (h.payload_bytes > remaining(in)) throw IoError("PFGT payload is shorter than its dims declare");
  return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  const bool single = t.dtype() == DType::float32;
  write_header(out, single ? 0 : 1, t.dims());
  for (double v : t.data()) {
    if (single) {
      put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

Tensor read_tensor(std::istream& in) {
  const auto h = read_header(in);
  if (h.code == kBytesCode) throw IoError("PFGT holds raw bytes, not a numeric tensor");
  const DType dtype = h.code == 0 ? DType::float32 : DType::float64;
  Tensor t(h.dims, dtype);
  for (auto& v : t.data()) {
    v = dtype == DType::float32 ? static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(in, "payload")))
                                : std::bit_cast<double>(get<std::uint64_t>(in, "payload"));
  }
  return t;
}

void write_bytes(std::ostream& out, std::string_view bytes) {
  write_header(out, kBytesCode, {bytes.size()});
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(std::istream& in) {
  const auto h = read_header(in);
  if (h.code != kBytesCode || h.dims.size() != 1) throw IoError("PFGT entry is not a byte string");
  std::string s(h.payload_bytes, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(s.size()))) throw IoError("truncated byte payload");
  return s;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  auto out = open_out(path);
  write_tensor(out, t);
  finish(out, path);
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kCheckpointMagic, 4);
  put<std::uint8_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size() + 1));
  auto name = [&](std::string_view n) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(n.size()));
    out.write(n.data(), static_cast<std::streamsize>(n.size()));
  };
  name("config");
  write_bytes(out, to_text(ckpt.config));
  for (const auto& [key, value] : ckpt.params.values()) {
    name(key);
    write_tensor(out, value);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw IoError("truncated checkpoint header");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw IoError("not a PFGC checkpoint (bad magic)");
  const auto version = get<std::uint8_t>(in, "checkpoint header");
  if (version != kVersion) throw IoError("unsupported PFGC version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, "checkpoint header");
  // Smallest entry: 2-byte name length, 1-byte name, 12-byte rank-0 tensor header.
  if (count == 0 || count > remaining(in) / 15) throw IoError("implausible checkpoint entry count");

  auto read_name = [&] {
    const auto len = get<std::uint16_t>(in, "entry name");
    if (len == 0 || len > remaining(in)) throw IoError("bad checkpoint entry name length");
    std::string n(len, '\0');
    in.read(n.data(), len);
    return n;
  };
  if (read_name() != "config") throw IoError("first checkpoint entry must be \"config\"");
  Checkpoint ckpt;
  try {
    ckpt.config = parse_config(read_bytes(in));
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint config: ") + e.what());
  }
  std::set<std::string> seen{"config"};
  for (std::uint32_t i = 1; i < count; ++i) {
    auto n = read_name();
    if (!seen.insert(n).second) throw IoError("duplicate checkpoint entry \"" + n + "\"");
    ckpt.params.set(std::move(n), read_tensor(in));
  }

  const auto expected = model::init_params(ckpt.config.model, 0);
  if (expected.size() != ckpt.params.size()) throw IoError("checkpoint parameters do not match its config");
  for (const auto& [key, value] : expected.values()) {
    if (!ckpt.params.contains(key) || ckpt.params.get(key).dims() != value.dims() ||
        ckpt.params.get(key).dtype() != value.dtype()) {
      throw IoError("checkpoint parameter \"" + key + "\" is missing or has the wrong shape");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto out = open_out(path);
  write_checkpoint(out, ckpt);
  finish(out, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

}  // namespace pfgnet::io
