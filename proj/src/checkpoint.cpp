#include "mouthtrace/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mouthtrace {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'W', '1'};

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return value;
  }

  const char* take(std::size_t n, const char* what) {
    need(n, what);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated payload while reading ") + what);
  }

  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> encode_tensors(const TensorMap& named) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    if (name.empty()) throw FormatError("tensor names must be non-empty");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (float v : tensor.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

TensorMap decode_tensors(const std::vector<char>& bytes) {
  Reader in(bytes);
  const char* magic = in.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic");
  const auto count = in.get_le<std::uint32_t>("entry count");
  TensorMap named;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = in.get_le<std::uint32_t>("name length");
    if (name_len == 0) throw FormatError("malformed header: empty tensor name");
    const char* name_ptr = in.take(name_len, "name");
    std::string name(name_ptr, name_len);
    const auto rank = in.get_le<std::uint32_t>("rank");
    if (rank > 16) throw FormatError("malformed header: rank " + std::to_string(rank) + " for " + name);
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      const auto extent = in.get_le<std::uint64_t>("extent");
      if (extent > (1ULL << 40)) throw FormatError("malformed header: extent too large for " + name);
      d = static_cast<std::int64_t>(extent);
      numel *= extent;
      if (numel > (1ULL << 40)) throw FormatError("malformed header: tensor too large: " + name);
    }
    std::vector<float> data(numel);
    for (auto& v : data) v = std::bit_cast<float>(in.get_le<std::uint32_t>("tensor payload"));
    if (!named.emplace(name, Tensor(std::move(shape), std::move(data))).second)
      throw FormatError("duplicate tensor name: " + name);
  }
  if (!in.at_end()) throw FormatError("malformed file: trailing bytes after last entry");
  return named;
}

void save_tensors(const std::filesystem::path& path, const TensorMap& named) {
  const auto bytes = encode_tensors(named);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

TensorMap load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tensors(bytes);
}

}  // namespace mouthtrace
