#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace tripath::core {

enum class Path : std::uint8_t { A = 1, B = 2, C = 4 };

/// One of the eight open/closed shutter combinations over paths A, B, C.
/// The empty set is the background configuration (all paths closed).
class PathSet {
 public:
  constexpr PathSet() = default;

  static constexpr PathSet from_mask(unsigned mask) {
    return PathSet(static_cast<std::uint8_t>(mask & 7u));
  }
  static constexpr PathSet none() { return PathSet(0); }
  static constexpr PathSet all_open() { return PathSet(7); }

  /// Parses "A", "BC", "ABC", ... ; "0" or "" is the empty set.
  static PathSet parse(std::string_view label);

  /// All eight combinations in mask order: 0, A, B, AB, C, AC, BC, ABC.
  static constexpr std::array<PathSet, 8> all() {
    return {from_mask(0), from_mask(1), from_mask(2), from_mask(3),
            from_mask(4), from_mask(5), from_mask(6), from_mask(7)};
  }

  constexpr bool contains(Path p) const {
    return (mask_ & static_cast<std::uint8_t>(p)) != 0;
  }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr int size() const {
    return (mask_ & 1) + ((mask_ >> 1) & 1) + ((mask_ >> 2) & 1);
  }
  constexpr unsigned mask() const { return mask_; }
  constexpr std::size_t index() const { return mask_; }

  /// "0" for the empty set, otherwise the open paths in order, e.g. "AC".
  std::string label() const;

  constexpr PathSet operator|(Path p) const {
    return PathSet(static_cast<std::uint8_t>(mask_ | static_cast<std::uint8_t>(p)));
  }
  friend constexpr bool operator==(PathSet, PathSet) = default;

 private:
  constexpr explicit PathSet(std::uint8_t mask) : mask_(mask) {}
  std::uint8_t mask_ = 0;
};

constexpr PathSet operator|(Path a, Path b) { return PathSet::none() | a | b; }

}  // namespace tripath::core
