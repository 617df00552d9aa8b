#include "mpim/fault.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mpim {

namespace {

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(std::string(name) + " must be in [0, 1], got " +
                                    std::to_string(p));
    }
}

}  // namespace

void FaultConfig::validate() const {
    check_probability(p_gate, "p_gate");
    check_probability(p_write, "p_write");
    check_probability(p_input, "p_input");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 1));
}

FaultInjector::FaultInjector(const FaultConfig& cfg, std::uint64_t stream)
    : cfg_(cfg), eng_(derive_seed(cfg.seed, stream)) {
    cfg_.validate();
    for (auto ch : {Channel::Gate, Channel::Write, Channel::Input}) {
        if (enabled(ch)) gap_[idx(ch)] = sample_gap(ch);
    }
}

bool FaultInjector::enabled(Channel ch) const {
    switch (ch) {
        case Channel::Gate: return cfg_.inject_direct && cfg_.p_gate > 0.0;
        case Channel::Write: return cfg_.inject_direct && cfg_.p_write > 0.0;
        case Channel::Input: return cfg_.inject_indirect && cfg_.p_input > 0.0;
    }
    return false;
}

double FaultInjector::probability(Channel ch) const {
    switch (ch) {
        case Channel::Gate: return cfg_.p_gate;
        case Channel::Write: return cfg_.p_write;
        case Channel::Input: return cfg_.p_input;
    }
    return 0.0;
}

std::uint64_t FaultInjector::sample_gap(Channel ch) {
    const double p = probability(ch);
    if (p >= 1.0) return 0;
    // u in (0, 1] so log(u) is finite
    const double u = 1.0 - uniform01(eng_);
    const double g = std::floor(std::log(u) / std::log1p(-p));
    if (!(g < 1.8e19)) return kNever - 1;
    return static_cast<std::uint64_t>(g);
}

bool FaultInjector::draw(Channel ch) {
    bool hit = false;
    for_each_fault(ch, 1, [&](std::size_t) { hit = true; });
    return hit;
}

void FaultInjector::corrupt_on_access(std::span<std::uint8_t> bits) {
    for_each_fault(Channel::Input, bits.size(), [&](std::size_t i) { bits[i] ^= 1u; });
}

}  // namespace mpim
