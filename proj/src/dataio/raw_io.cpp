#include "diffmvr/dataio/raw_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace diffmvr {

namespace {

constexpr std::array<char, 5> kMagic{'V', 'T', 'E', 'N', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError("raw tensor: truncated header");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void write_raw(std::ostream& out, const Tensor& t) {
  if (t.rank() > 255) throw ContractError("raw tensor: rank above 255");
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(t.rank()));
  for (auto extent : t.shape()) {
    if (extent > 0xffffffffu) throw ContractError("raw tensor: extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(extent));
  }
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("raw tensor: write failed");
}

Tensor read_raw(std::istream& in) {
  std::array<char, 5> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError("raw tensor: missing magic");
  if (magic != kMagic) throw FormatError("raw tensor: bad magic");
  const int rank = in.get();
  if (rank == std::char_traits<char>::eof()) throw FormatError("raw tensor: missing rank");
  Shape shape;
  for (int i = 0; i < rank; ++i) {
    const auto extent = get_u32(in);
    if (extent == 0) throw FormatError("raw tensor: zero extent");
    shape.push_back(extent);
  }
  const std::size_t n = shape_numel(shape);
  std::vector<float> values(n);
  std::vector<unsigned char> payload(n * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw FormatError("raw tensor: payload shorter than header extents " + shape_str(shape));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* b = payload.data() + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    values[i] = std::bit_cast<float>(bits);
  }
  return Tensor::from(std::move(shape), std::move(values));
}

void write_raw(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_raw(out, t);
}

Tensor read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Tensor t = read_raw(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("raw tensor: trailing bytes after payload in " + path.string());
  }
  return t;
}

}  // namespace diffmvr
