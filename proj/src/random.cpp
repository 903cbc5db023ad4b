#include "mvmc/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mvmc {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kPhiloxW0;
            k[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t stream_tag(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x6A09E667F3BCC908ull;
    for (std::uint64_t w : words) h = mix64(h ^ mix64(w));
    return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t tag)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, tag_(tag) {}

void RandomStream::refill() {
    const auto out = philox4x32({static_cast<std::uint32_t>(block_),
                                 static_cast<std::uint32_t>(block_ >> 32),
                                 static_cast<std::uint32_t>(tag_),
                                 static_cast<std::uint32_t>(tag_ >> 32)},
                                key_);
    ++block_;
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
}

std::uint64_t RandomStream::next_u64() {
    if (buffered_ == 0) refill();
    return buffer_[2 - buffered_--];
}

double RandomStream::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_normal_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

RandomBlock::RandomBlock(std::uint64_t seed, std::uint64_t tag, std::size_t size,
                         std::size_t base_steps)
    : seed_(seed), tag_(tag), size_(size), base_steps_(base_steps) {
    if (base_steps == 0) throw std::invalid_argument("RandomBlock: base_steps must be positive");
}

RandomBlock RandomBlock::subrange(std::size_t first, std::size_t count) const {
    if (first + count > size_) throw std::out_of_range("RandomBlock::subrange: range exceeds block");
    RandomBlock sub = *this;
    sub.size_ = count;
    if (order_) {
        sub.order_ = std::make_shared<const std::vector<std::size_t>>(
            order_->begin() + static_cast<std::ptrdiff_t>(offset_ + first),
            order_->begin() + static_cast<std::ptrdiff_t>(offset_ + first + count));
        sub.offset_ = 0;
    } else {
        sub.offset_ = offset_ + first;
    }
    return sub;
}

RandomBlock RandomBlock::permuted(const std::vector<std::size_t>& order) const {
    if (order.size() != size_) throw std::invalid_argument("RandomBlock::permuted: size mismatch");
    std::vector<std::size_t> global(order.size());
    for (std::size_t p = 0; p < order.size(); ++p) {
        if (order[p] >= size_) throw std::out_of_range("RandomBlock::permuted: index out of range");
        global[p] = global_index(order[p]);
    }
    RandomBlock out = *this;
    out.order_ = std::make_shared<const std::vector<std::size_t>>(std::move(global));
    out.offset_ = 0;
    return out;
}

std::size_t RandomBlock::global_index(std::size_t p) const {
    return order_ ? (*order_)[offset_ + p] : offset_ + p;
}

RandomStream RandomBlock::stream(std::size_t p, StreamRole role) const {
    if (p >= size_) throw std::out_of_range("RandomBlock::stream: sub-stream index out of range");
    return RandomStream(seed_, stream_tag({tag_, global_index(p), static_cast<std::uint64_t>(role)}));
}

}  // namespace mvmc
