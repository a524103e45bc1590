/*
   Copyright 2026 The vfpkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace vfp {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Philox4x32-10 counter-based block cipher (Salmon et al., Random123).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// Reproducible Gaussian noise addressed by (particle, step, component).
///
/// Every variate is a pure function of the stream key and its address, so
/// results do not depend on evaluation order or on how work is split across
/// threads. Independent streams (replicas, initial conditions, reference
/// ensembles) are derived with `substream`.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : key_(splitmix64(seed)) {}

    NoiseStream substream(std::uint64_t id) const {
        NoiseStream child(*this);
        child.key_ = splitmix64(key_ ^ splitmix64(id + 0x632be59bd9b4e019ull));
        return child;
    }

    std::uint64_t key() const { return key_; }

    /// Two uniforms in the open interval (0, 1) for one address block.
    std::pair<double, double> uniform_pair(std::uint64_t particle, std::uint64_t step,
                                           std::uint64_t block) const {
        const auto out = Philox4x32::generate(
            {static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(block),
             static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)},
            {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
        const std::uint64_t a = (std::uint64_t{out[0]} << 32 | out[1]) >> 11;
        const std::uint64_t b = (std::uint64_t{out[2]} << 32 | out[3]) >> 11;
        constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
        return {(static_cast<double>(a) + 0.5) * scale, (static_cast<double>(b) + 0.5) * scale};
    }

    /// Box-Muller pair; components 2k and 2k+1 share block k.
    std::pair<double, double> normal_pair(std::uint64_t particle, std::uint64_t step,
                                          std::uint64_t block) const {
        const auto [u1, u2] = uniform_pair(particle, step, block);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    double normal(std::uint64_t particle, std::uint64_t step, std::uint64_t component) const {
        const auto [z0, z1] = normal_pair(particle, step, component / 2);
        return component % 2 == 0 ? z0 : z1;
    }

    double uniform(std::uint64_t particle, std::uint64_t step, std::uint64_t component) const {
        const auto [u0, u1] = uniform_pair(particle, step, component / 2);
        return component % 2 == 0 ? u0 : u1;
    }

    /// out[p * components + c] = normal(first + p, step, c) for p < count.
    void fill_normals(std::uint64_t step, std::uint64_t first, std::size_t count,
                      std::size_t components, std::span<double> out) const {
        for (std::size_t p = 0; p < count; ++p) {
            double* row = out.data() + p * components;
            for (std::size_t c = 0; c < components; c += 2) {
                const auto [z0, z1] = normal_pair(first + p, step, c / 2);
                row[c] = z0;
                if (c + 1 < components) row[c + 1] = z1;
            }
        }
    }

private:
    std::uint64_t key_;
};

/// Substream tags; combined with the replica index so that no two purposes
/// ever share an address space.
enum class StreamPurpose : std::uint64_t {
    Dynamics = 0,
    InitialCondition = 1,
    EnsembleDynamics = 2,
    EnsembleInitialCondition = 3,
    EquilibriumSample = 4,
    Probe = 5,
};

inline NoiseStream replica_stream(const NoiseStream& root, std::uint64_t replica, StreamPurpose purpose) {
    return root.substream((replica << 8) | static_cast<std::uint64_t>(purpose));
}

} // namespace vfp
