#include "l2lab/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace l2lab {

void PriceModel::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("price.theta must lie in [0, 1]");
    if (!(sigma >= 0.0)) throw std::invalid_argument("price.sigma must be >= 0");
    if (!(iid_std >= 0.0)) throw std::invalid_argument("price.iid_std must be >= 0");
    if (!(floor > 0.0)) throw std::invalid_argument("price.floor must be > 0");
    if (!(mu > floor)) throw std::invalid_argument("price.mu must exceed price.floor");
}

void DemandModel::validate() const {
    if (!(lambda0 > 0.0)) throw std::invalid_argument("demand.lambda0 must be > 0");
    if (!(k > 0.0)) throw std::invalid_argument("demand.k must be > 0");
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    // Substream derivation: mix the stream id through splitmix64 once, xor it
    // into the seed, then expand with splitmix64 into the 256-bit state.
    std::uint64_t id_mix = stream_id;
    std::uint64_t x = seed ^ splitmix64(id_mix);
    for (auto& word : s_) word = splitmix64(x);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() {
    // (k + 0.5) / 2^53 never hits 0 or 1.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

RngStream make_stream(std::uint64_t seed, std::uint64_t replica, StreamRole role) {
    return RngStream(seed, replica * kStreamsPerReplica + static_cast<std::uint64_t>(role));
}

PriceState step_price_ar1(PriceState state, const PriceModel& model, double omega) {
    if (model.mode != PriceMode::ar1) throw std::invalid_argument("step_price_ar1 requires ar1 price mode");
    const double next = model.theta * model.mu + (1.0 - model.theta) * state.p + model.sigma * omega;
    return PriceState{std::max(model.floor, next)};
}

PriceState sample_price_iid(const PriceModel& model, RngStream& rng) {
    if (model.mode != PriceMode::iid) throw std::invalid_argument("sample_price_iid requires iid price mode");
    return PriceState{std::max(model.floor, model.mu + model.iid_std * rng.normal())};
}

PriceState step_price(PriceState state, const PriceModel& model, RngStream& rng) {
    if (model.mode == PriceMode::ar1) return step_price_ar1(state, model, rng.normal());
    return sample_price_iid(model, rng);
}

double stationary_std(const PriceModel& model) {
    if (model.mode != PriceMode::ar1) throw std::invalid_argument("stationary_std requires ar1 price mode");
    if (!(model.theta > 0.0)) throw std::invalid_argument("stationary_std: theta = 0 has no stationary distribution");
    return model.sigma / std::sqrt(model.theta * (2.0 - model.theta));
}

double arrival_rate(const DemandModel& model, double g) {
    if (!(g >= 0.0)) throw std::invalid_argument("arrival_rate: fee must be >= 0, got " + std::to_string(g));
    return std::max(0.0, model.lambda0 - model.k * g);
}

std::vector<double> poisson_pmf(double rate, std::size_t n_max) {
    std::vector<double> pmf(n_max + 1, 0.0);
    if (rate <= 0.0) {
        pmf[0] = 1.0;
        return pmf;
    }
    const double log_rate = std::log(rate);
    for (std::size_t k = 0; k <= n_max; ++k) {
        const double kd = static_cast<double>(k);
        pmf[k] = std::exp(-rate + kd * log_rate - std::lgamma(kd + 1.0));
    }
    return pmf;
}

PoissonSampler::PoissonSampler(double rate) : rate_(rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("PoissonSampler: rate must be finite and >= 0");
    const auto n_max = static_cast<std::size_t>(std::ceil(rate + 14.0 * std::sqrt(rate) + 40.0));
    const auto pmf = poisson_pmf(rate, n_max);
    cdf_.resize(pmf.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        acc += pmf[k];
        cdf_[k] = acc;
    }
}

std::int64_t PoissonSampler::quantile(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it != cdf_.end()) return static_cast<std::int64_t>(it - cdf_.begin());
    // Beyond the table (probability below 1e-40 for any rate used here): walk the
    // pmf recursion until the cumulative mass reaches u.
    auto k = static_cast<std::int64_t>(cdf_.size()) - 1;
    double acc = cdf_.back();
    double p = acc - (cdf_.size() > 1 ? cdf_[cdf_.size() - 2] : 0.0);
    while (acc < u && p > 0.0) {
        ++k;
        p *= rate_ / static_cast<double>(k);
        acc += p;
    }
    return k;
}

std::int64_t sample_arrivals(const DemandModel& model, double g, RngStream& rng) {
    return PoissonSampler(arrival_rate(model, g))(rng);
}

}  // namespace l2lab
