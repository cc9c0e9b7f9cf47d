#pragma once

#include <array>
#include <bitset>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace raforge {

/// Number of 26-tone resource blocks in a 20 MHz channel.
inline constexpr int kNumBasicRbs = 9;

/// Spectral footprint over the nine 26-tone positions; bit n set means the
/// RB covers 26-tone position n.
using Footprint = std::bitset<kNumBasicRbs>;

/// (level, index) address of a resource block. Level 0 holds the nine
/// 26-tone RBs, level 1 the four 52-tone, level 2 the two 106-tone and
/// level 3 the single 242-tone RB.
struct RbId {
  int level = 0;
  int index = 0;

  auto operator<=>(const RbId&) const = default;

  std::string to_string() const {
    return "RB(" + std::to_string(level) + "," + std::to_string(index) + ")";
  }
};

namespace detail {

inline constexpr std::array<int, 4> kLevelSizes = {9, 4, 2, 1};
inline constexpr std::array<int, 4> kRuSizes = {26, 52, 106, 242};
inline constexpr std::array<int, 4> kDataTones = {24, 48, 102, 234};
inline constexpr double kToneSpacingHz = 78.125e3;

// 26-tone index spans per RB, following the 20 MHz RU nesting. The center
// 26-tone RB (index 4) is covered only by the full-width RB.
inline const std::vector<std::vector<int>>& level_spans(int level) {
  static const std::array<std::vector<std::vector<int>>, 4> spans = {{
      {{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}, {8}},
      {{0, 1}, {2, 3}, {5, 6}, {7, 8}},
      {{0, 1, 2, 3}, {5, 6, 7, 8}},
      {{0, 1, 2, 3, 4, 5, 6, 7, 8}},
  }};
  return spans[static_cast<std::size_t>(level)];
}

}  // namespace detail

/// Immutable description of the 16-RB hierarchy of a 20 MHz channel.
class RbGrid {
 public:
  struct RbInfo {
    RbId id;
    int ru_size = 0;      // nominal tone count (26/52/106/242)
    int data_tones = 0;   // data-carrying tones (24/48/102/234)
    double bandwidth_hz = 0.0;
    Footprint footprint;
    std::vector<int> basic_rus;  // constituent level-0 indices
  };

  RbGrid() {
    for (int level = 0; level < 4; ++level) {
      const auto& spans = detail::level_spans(level);
      for (int index = 0; index < detail::kLevelSizes[static_cast<std::size_t>(level)]; ++index) {
        RbInfo info;
        info.id = RbId{level, index};
        info.ru_size = detail::kRuSizes[static_cast<std::size_t>(level)];
        info.data_tones = detail::kDataTones[static_cast<std::size_t>(level)];
        info.bandwidth_hz = info.data_tones * detail::kToneSpacingHz;
        info.basic_rus = spans[static_cast<std::size_t>(index)];
        for (int n : info.basic_rus) info.footprint.set(static_cast<std::size_t>(n));
        rbs_.push_back(std::move(info));
      }
    }
  }

  static int level_count() { return 4; }

  static int level_size(int level) {
    if (level < 0 || level >= 4) return 0;
    return detail::kLevelSizes[static_cast<std::size_t>(level)];
  }

  bool contains(RbId rb) const {
    return rb.level >= 0 && rb.level < 4 && rb.index >= 0 &&
           rb.index < level_size(rb.level);
  }

  const std::vector<RbInfo>& all() const { return rbs_; }

  int size() const { return static_cast<int>(rbs_.size()); }

  /// Dense ordinal in [0, 16), ordered by (level, index).
  int ordinal(RbId rb) const {
    check(rb);
    static constexpr std::array<int, 4> offsets = {0, 9, 13, 15};
    return offsets[static_cast<std::size_t>(rb.level)] + rb.index;
  }

  const RbInfo& info(RbId rb) const {
    check(rb);
    return rbs_[static_cast<std::size_t>(ordinal(rb))];
  }

  Footprint overlap_vector(RbId rb) const { return info(rb).footprint; }

  double bandwidth(RbId rb) const { return info(rb).bandwidth_hz; }

  /// Maximum co-scheduled users: MU-MIMO is available only above 52-tone.
  int capacity(RbId rb, int antennas) const {
    if (antennas < 1) throw std::invalid_argument("capacity: antennas must be >= 1");
    check(rb);
    return rb.level <= 1 ? 1 : antennas;
  }

 private:
  void check(RbId rb) const {
    if (!contains(rb)) throw std::invalid_argument("unknown " + rb.to_string());
  }

  std::vector<RbInfo> rbs_;
};

inline RbGrid build_grid() { return RbGrid{}; }

/// Footprint bits rendered position 0 first, e.g. "110000000" for RB(1,0).
inline std::string footprint_string(const Footprint& fp) {
  std::string s(kNumBasicRbs, '0');
  for (int n = 0; n < kNumBasicRbs; ++n)
    if (fp.test(static_cast<std::size_t>(n))) s[static_cast<std::size_t>(n)] = '1';
  return s;
}

}  // namespace raforge
