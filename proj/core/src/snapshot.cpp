#include "graphmu/snapshot.hpp"

#include "graphmu/error.hpp"

#include <fmt/format.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace graphmu {

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'M', 'U', 'S', 'N', 'A', 'P', '\0'};

class Writer {
 public:
  template <typename T>
  void uint(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
    }
  }

  void real(double value) { uint(std::bit_cast<std::uint64_t>(value)); }

  void str(std::string_view s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T uint() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double real() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::string str() {
    const auto len = uint<std::uint32_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw Error("snapshot truncated");
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

enum Tag : std::uint8_t { kU8 = 1, kU32 = 2, kU64 = 3, kI64 = 4, kF64 = 5, kStrings = 6 };

}  // namespace

bool Snapshot::has(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return true;
  }
  return false;
}

void Snapshot::set(std::string_view name, Payload payload) {
  for (auto& s : sections_) {
    if (s.name == name) {
      s.payload = std::move(payload);
      return;
    }
  }
  sections_.push_back({std::string(name), std::move(payload)});
}

const Snapshot::Payload& Snapshot::find(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return s.payload;
  }
  throw Error(fmt::format("{} snapshot has no section '{}'", kind_, name));
}

void Snapshot::throw_type_mismatch(std::string_view name) {
  throw Error(fmt::format("snapshot section '{}' has an unexpected type", name));
}

std::uint64_t Snapshot::get_scalar(std::string_view name) const {
  const auto& v = get<std::uint64_t>(name);
  if (v.size() != 1) throw Error(fmt::format("section '{}' is not a scalar", name));
  return v.front();
}

double Snapshot::get_real(std::string_view name) const {
  const auto& v = get<double>(name);
  if (v.size() != 1) throw Error(fmt::format("section '{}' is not a scalar", name));
  return v.front();
}

std::vector<std::uint8_t> Snapshot::encode() const {
  Writer w;
  for (char c : kMagic) w.uint(static_cast<std::uint8_t>(c));
  w.uint(kVersion);
  w.str(kind_);
  w.uint(static_cast<std::uint32_t>(sections_.size()));
  for (const auto& s : sections_) {
    w.str(s.name);
    std::visit(
        [&w](const auto& values) {
          using T = typename std::decay_t<decltype(values)>::value_type;
          if constexpr (std::is_same_v<T, std::uint8_t>) w.uint(kU8);
          if constexpr (std::is_same_v<T, std::uint32_t>) w.uint(kU32);
          if constexpr (std::is_same_v<T, std::uint64_t>) w.uint(kU64);
          if constexpr (std::is_same_v<T, std::int64_t>) w.uint(kI64);
          if constexpr (std::is_same_v<T, double>) w.uint(kF64);
          if constexpr (std::is_same_v<T, std::string>) w.uint(kStrings);
          w.uint(static_cast<std::uint64_t>(values.size()));
          for (const auto& v : values) {
            if constexpr (std::is_same_v<T, double>) {
              w.real(v);
            } else if constexpr (std::is_same_v<T, std::string>) {
              w.str(v);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
              w.uint(static_cast<std::uint64_t>(v));
            } else {
              w.uint(v);
            }
          }
        },
        s.payload);
  }
  return w.take();
}

Snapshot Snapshot::decode(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.uint<std::uint8_t>() != static_cast<std::uint8_t>(c)) throw Error("not a snapshot file");
  }
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion) throw Error(fmt::format("unsupported snapshot version {}", version));
  Snapshot snap(r.str());
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto tag = r.uint<std::uint8_t>();
    const auto n = r.uint<std::uint64_t>();
    auto read_all = [&]<typename T>(auto&& read_one) {
      std::vector<T> values;
      values.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
      for (std::uint64_t k = 0; k < n; ++k) values.push_back(read_one());
      snap.put(name, std::move(values));
    };
    switch (tag) {
      case kU8: read_all.operator()<std::uint8_t>([&] { return r.uint<std::uint8_t>(); }); break;
      case kU32: read_all.operator()<std::uint32_t>([&] { return r.uint<std::uint32_t>(); }); break;
      case kU64: read_all.operator()<std::uint64_t>([&] { return r.uint<std::uint64_t>(); }); break;
      case kI64:
        read_all.operator()<std::int64_t>([&] { return static_cast<std::int64_t>(r.uint<std::uint64_t>()); });
        break;
      case kF64: read_all.operator()<double>([&] { return r.real(); }); break;
      case kStrings: read_all.operator()<std::string>([&] { return r.str(); }); break;
      default: throw Error(fmt::format("unknown section type tag {} in '{}'", tag, name));
    }
  }
  if (!r.done()) throw Error("trailing bytes after snapshot");
  return snap;
}

void Snapshot::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

Snapshot Snapshot::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

Snapshot Snapshot::load(const std::filesystem::path& path, std::string_view expected_kind) {
  Snapshot snap = load(path);
  if (snap.kind() != expected_kind) {
    throw Error(fmt::format("{} holds a '{}' snapshot, expected '{}'", path.string(), snap.kind(),
                            expected_kind));
  }
  return snap;
}

}  // namespace graphmu
