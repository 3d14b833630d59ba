#pragma once

#include <cstdint>
#include <initializer_list>

namespace shuttle {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a master seed and a path of tags,
/// e.g. derive_seed(master, {generation, realization}).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = mix64(master);
    for (auto t : tags)
        s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
    return s;
}

} // namespace shuttle
