#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace specshare {

// All randomness in a run flows from one master seed. Components draw from
// named substreams (scenario / learner / policy_mc / engine / online) so a
// stage can be re-run in isolation without disturbing the draws of another.
using Rng = std::mt19937_64;

uint64_t mix64(uint64_t x);

uint64_t substream_seed(uint64_t master, std::string_view name, uint64_t index = 0);

Rng substream(uint64_t master, std::string_view name, uint64_t index = 0);

}  // namespace specshare
