#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace graphmu {

/// Self-describing binary container shared by every persisted artifact.
///
/// Layout (all integers little-endian):
///   magic    8 bytes  "GMUSNAP\0"
///   version  u32
///   kind     u32 length + UTF-8 bytes  (e.g. "graph", "model")
///   count    u32 number of sections
///   section  u32 name length + name bytes, u8 type tag, u64 element count,
///            payload
///
/// Type tags: 1 = u8, 2 = u32, 3 = u64, 4 = i64, 5 = f64 (IEEE-754 bits),
/// 6 = string list (each entry u32 length + bytes). See docs/snapshot_format.md.
class Snapshot {
 public:
  static constexpr std::uint32_t kVersion = 1;

  using Payload = std::variant<std::vector<std::uint8_t>, std::vector<std::uint32_t>,
                               std::vector<std::uint64_t>, std::vector<std::int64_t>,
                               std::vector<double>, std::vector<std::string>>;

  struct Section {
    std::string name;
    Payload payload;
    bool operator==(const Section&) const = default;
  };

  Snapshot() = default;
  explicit Snapshot(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }
  const std::vector<Section>& sections() const { return sections_; }

  /// Adds or replaces a section.
  template <typename T>
  void put(std::string_view name, std::vector<T> values) {
    set(name, Payload(std::move(values)));
  }

  bool has(std::string_view name) const;

  /// Typed access; throws Error if the section is missing or has another type.
  template <typename T>
  const std::vector<T>& get(std::string_view name) const {
    const Payload& p = find(name);
    if (const auto* v = std::get_if<std::vector<T>>(&p)) return *v;
    throw_type_mismatch(name);
  }

  std::uint64_t get_scalar(std::string_view name) const;
  double get_real(std::string_view name) const;

  std::vector<std::uint8_t> encode() const;
  static Snapshot decode(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Snapshot load(const std::filesystem::path& path);

  /// Loads and checks the artifact kind.
  static Snapshot load(const std::filesystem::path& path, std::string_view expected_kind);

  bool operator==(const Snapshot&) const = default;

 private:
  void set(std::string_view name, Payload payload);
  const Payload& find(std::string_view name) const;
  [[noreturn]] static void throw_type_mismatch(std::string_view name);

  std::string kind_;
  std::vector<Section> sections_;
};

}  // namespace graphmu
