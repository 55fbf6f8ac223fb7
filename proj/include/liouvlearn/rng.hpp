// Copyright 2026 The liouvlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace liouvlearn {

using Rng = std::mt19937_64;

/// Independent stream for a (seed, key...) tuple. Streams depend only on the
/// key, so results do not depend on the order work is scheduled in.
template <typename... Keys>
Rng make_stream(std::uint64_t seed, Keys... keys) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sizeof...(Keys)),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(keys))...};
  return Rng(seq);
}

}  // namespace liouvlearn
