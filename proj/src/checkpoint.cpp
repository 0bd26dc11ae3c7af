#include "debench/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace debench::nn {

namespace {

constexpr char kMagic[8] = {'D', 'B', 'E', 'N', 'C', 'H', 'C', 'K'};

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::vector<char>& buf;
  std::size_t at = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (at + n > buf.size()) throw Error("checkpoint truncated: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at++])) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(buf.data() + at, n);
    at += n;
    return s;
  }
};

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::vector<char> buf;
  buf.insert(buf.end(), kMagic, kMagic + 8);
  put_u32(buf, kCheckpointVersion);
  put_u64(buf, fnv1a64(ck.config));
  put_u32(buf, static_cast<std::uint32_t>(ck.config.size()));
  buf.insert(buf.end(), ck.config.begin(), ck.config.end());
  put_u32(buf, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<std::uint32_t>(t.rows()));
    put_u32(buf, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index c = 0; c < t.cols(); ++c)
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        put_u32(buf, std::bit_cast<std::uint32_t>(t(r, c)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open checkpoint: " + path);
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(size));
  in.read(buf.data(), size);
  if (!in) throw Error("short read: " + path);

  Reader r{buf, 0, path};
  r.need(8);
  if (std::memcmp(buf.data(), kMagic, 8) != 0)
    throw Error("bad checkpoint magic: " + path);
  r.at = 8;
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const std::uint64_t hash = r.u64();
  Checkpoint ck;
  ck.config = r.str();
  if (fnv1a64(ck.config) != hash)
    throw Error("checkpoint config hash mismatch: " + path);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Mat<float>& t = ck.tensors[name];
    t.resize(rows, cols);
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t rr = 0; rr < rows; ++rr)
        t(rr, c) = std::bit_cast<float>(r.u32());
  }
  if (r.at != buf.size()) throw Error("trailing bytes in checkpoint: " + path);
  return ck;
}

}  // namespace debench::nn
