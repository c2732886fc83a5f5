#include "aec/common.hpp"

#include <vector>

namespace aec {

const char* to_string(Scale s) {
  switch (s) {
    case Scale::fine: return "fine";
    case Scale::medium: return "medium";
    case Scale::coarse: return "coarse";
  }
  return "?";
}

namespace {

std::vector<std::uint32_t> seed_words(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  return words;
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  auto words = seed_words(seed, path);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  auto words = seed_words(seed, path);
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace aec
