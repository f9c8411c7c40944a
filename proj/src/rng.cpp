#include "specshare/rng.hpp"

namespace specshare {

uint64_t mix64(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t substream_seed(uint64_t master, std::string_view name, uint64_t index) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the stream name
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(master ^ mix64(h ^ mix64(index)));
}

Rng substream(uint64_t master, std::string_view name, uint64_t index) {
  return Rng(substream_seed(master, name, index));
}

}  // namespace specshare
