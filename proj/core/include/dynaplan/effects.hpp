#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dynaplan {

// Abstract state-change atoms. An action's observable consequence is a set of
// these; the learned transition heads score each atom independently.
enum class EffectAtom : uint8_t {
    created_arg1 = 0,
    created_arg2,
    removed_arg1,
    removed_arg2,
    cwd_set_arg1,
    content_set_arg1,
    output_listing,
    output_error,
    output_empty,
    no_change,
};

constexpr int kNumEffectAtoms = 10;

constexpr std::array<std::string_view, kNumEffectAtoms> kEffectAtomNames = {
    "created1", "created2", "removed1", "removed2", "cwdset1",
    "contentset1", "out_listing", "out_error", "out_empty", "nochange",
};

// Bitmask over the ten atoms. Value type; equality is set equality.
class EffectSet {
public:
    constexpr EffectSet() = default;
    constexpr explicit EffectSet(uint16_t bits) : bits_(bits) {}

    constexpr void add(EffectAtom a) { bits_ |= mask(a); }
    constexpr void remove(EffectAtom a) { bits_ &= static_cast<uint16_t>(~mask(a)); }
    constexpr bool has(EffectAtom a) const { return (bits_ & mask(a)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr uint16_t bits() const { return bits_; }

    constexpr EffectSet operator|(EffectSet o) const { return EffectSet(static_cast<uint16_t>(bits_ | o.bits_)); }
    constexpr EffectSet operator&(EffectSet o) const { return EffectSet(static_cast<uint16_t>(bits_ & o.bits_)); }
    // Set difference: atoms in *this that are not in o.
    constexpr EffectSet operator-(EffectSet o) const { return EffectSet(static_cast<uint16_t>(bits_ & ~o.bits_)); }

    constexpr bool operator==(const EffectSet&) const = default;

    int count() const {
        int n = 0;
        for (int i = 0; i < kNumEffectAtoms; ++i) {
            if (bits_ & (1u << i)) { ++n; }
        }
        return n;
    }

    std::vector<EffectAtom> atoms() const {
        std::vector<EffectAtom> out;
        for (int i = 0; i < kNumEffectAtoms; ++i) {
            if (bits_ & (1u << i)) { out.push_back(static_cast<EffectAtom>(i)); }
        }
        return out;
    }

    static constexpr uint16_t mask(EffectAtom a) { return static_cast<uint16_t>(1u << static_cast<int>(a)); }

private:
    uint16_t bits_ = 0;
};

inline EffectSet make_effects(std::initializer_list<EffectAtom> atoms) {
    EffectSet s;
    for (EffectAtom a : atoms) { s.add(a); }
    return s;
}

std::string effect_set_to_string(EffectSet s);

// Parses the "created1+out_empty" rendering; throws std::invalid_argument on
// unknown atom names.
EffectSet effect_set_from_string(std::string_view text);

constexpr EffectSet kMutationAtoms = EffectSet(
    EffectSet::mask(EffectAtom::created_arg1) | EffectSet::mask(EffectAtom::created_arg2) |
    EffectSet::mask(EffectAtom::removed_arg1) | EffectSet::mask(EffectAtom::removed_arg2) |
    EffectSet::mask(EffectAtom::cwd_set_arg1) | EffectSet::mask(EffectAtom::content_set_arg1));

constexpr EffectSet kOutputAtoms = EffectSet(
    EffectSet::mask(EffectAtom::output_listing) | EffectSet::mask(EffectAtom::output_error) |
    EffectSet::mask(EffectAtom::output_empty));

}  // namespace dynaplan
