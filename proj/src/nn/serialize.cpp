#include "sc2t/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "sc2t/error.hpp"

namespace sc2t::nn {

namespace {

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, bytes);
}

std::uint64_t get_le(std::istream& is, int bytes) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), bytes)) throw DataError("unexpected end of model data");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { put_le(os, v, 8); }
void write_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v), 8); }

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) write_u64(os, d);
  for (double v : t.values()) write_f64(os, v);
}

std::uint32_t read_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le(is, 4)); }
std::uint64_t read_u64(std::istream& is) { return get_le(is, 8); }
double read_f64(std::istream& is) { return std::bit_cast<double>(get_le(is, 8)); }

std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n > (1U << 20)) throw DataError("string field too long in model data");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw DataError("unexpected end of model data");
  return s;
}

Tensor read_tensor(std::istream& is) {
  const std::uint32_t rank = read_u32(is);
  if (rank > 8) throw DataError("tensor rank too large in model data");
  Shape shape(rank);
  std::uint64_t total = 1;
  for (auto& d : shape) {
    d = read_u64(is);
    total *= d;
    if (total > kMaxElements) throw DataError("tensor too large in model data");
  }
  std::vector<double> data(total);
  for (auto& v : data) v = read_f64(is);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace sc2t::nn
