#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>

namespace mpim {

/// Generator pinned into every report so runs replay bit-for-bit.
inline constexpr std::string_view kRngName = "mt19937_64+splitmix64-substream/v1";

/// Soft-error probabilities. Direct errors corrupt operations (gate outputs,
/// writes); indirect errors corrupt stored bits when they are accessed.
struct FaultConfig {
    double p_gate = 0.0;
    double p_write = 0.0;
    double p_input = 0.0;
    std::uint64_t seed = 0;
    bool inject_direct = true;
    bool inject_indirect = false;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Sub-seed for stream `stream` (a trial or batch index) of a run seeded with
/// `seed`: splitmix64(seed ^ splitmix64(stream + 1)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Per-simulation fault stream.
///
/// Each channel is an independent Bernoulli process over its draws. Instead of
/// one uniform per draw it samples the geometric gap to the next fault, which
/// has the same distribution and makes p ~ 1e-4 campaigns cheap.
class FaultInjector {
public:
    enum class Channel : std::uint8_t { Gate, Write, Input };

    FaultInjector(const FaultConfig& cfg, std::uint64_t stream = 0);

    const FaultConfig& config() const { return cfg_; }
    bool direct() const { return cfg_.inject_direct; }
    bool indirect() const { return cfg_.inject_indirect; }

    /// One Bernoulli draw on a channel (false when the channel is disabled).
    bool draw(Channel ch);

    /// Invokes `on_fault(i)` for each faulty draw among `count` consecutive
    /// draws on `ch`, in increasing i.
    template <class F>
    void for_each_fault(Channel ch, std::size_t count, F&& on_fault) {
        if (!enabled(ch)) return;
        auto& gap = gap_[idx(ch)];
        std::size_t pos = 0;
        while (count - pos > gap) {
            pos += static_cast<std::size_t>(gap);
            ++faults_[idx(ch)];
            on_fault(pos);
            ++pos;
            gap = sample_gap(ch);
        }
        gap -= count - pos;
    }

    /// Returns the correct bit with probability 1 - p_gate, else its complement.
    std::uint8_t maybe_corrupt_gate(std::uint8_t correct) {
        return static_cast<std::uint8_t>(correct ^ static_cast<std::uint8_t>(draw(Channel::Gate)));
    }

    /// Flips each bit independently with probability p_input.
    void corrupt_on_access(std::span<std::uint8_t> bits);

    std::uint64_t fault_count(Channel ch) const { return faults_[idx(ch)]; }

private:
    static constexpr std::size_t idx(Channel ch) { return static_cast<std::size_t>(ch); }
    bool enabled(Channel ch) const;
    double probability(Channel ch) const;
    std::uint64_t sample_gap(Channel ch);

    static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

    FaultConfig cfg_;
    std::mt19937_64 eng_;
    std::uint64_t gap_[3] = {kNever, kNever, kNever};
    std::uint64_t faults_[3] = {0, 0, 0};
};

}  // namespace mpim
