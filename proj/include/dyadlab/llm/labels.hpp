#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "dyadlab/game.hpp"

namespace dyadlab::llm {

enum class Label : std::uint8_t { A, B };

inline constexpr char to_char(Label l) { return l == Label::A ? 'A' : 'B'; }
inline constexpr Label other(Label l) { return l == Label::A ? Label::B : Label::A; }

// Which letter stands for cooperation in one play. The other letter is defection.
struct LabelMapping {
  Label cooperate = Label::A;

  static constexpr LabelMapping identity() { return {Label::A}; }

  constexpr Label encode(Choice c) const { return c == Choice::Cooperate ? cooperate : llm::other(cooperate); }
  constexpr Choice decode(Label l) const { return l == cooperate ? Choice::Cooperate : Choice::Defect; }
  constexpr Label defect() const { return llm::other(cooperate); }

  friend constexpr bool operator==(LabelMapping, LabelMapping) = default;
};

inline LabelMapping randomize_labels(std::uint64_t seed, bool force_identity = false) {
  if (force_identity) return LabelMapping::identity();
  std::mt19937_64 rng(seed);
  return LabelMapping{(rng() >> 63) == 0 ? Label::A : Label::B};
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "A" || s == "a") return Label::A;
  if (s == "B" || s == "b") return Label::B;
  return std::nullopt;
}

}  // namespace dyadlab::llm
