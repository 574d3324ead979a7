// L1 gas-price processes, fee-elastic Poisson demand and seeded random streams.
#pragma once

#include <cstdint>
#include <vector>

namespace l2lab {

enum class PriceMode { ar1, iid };

/// Gas-price process parameters. All prices are in ETH per gas unit.
///
/// In ar1 mode the price follows
///   P' = max(floor, theta*mu + (1 - theta)*P + sigma*omega),  omega ~ N(0,1).
/// In iid mode each block draws max(floor, N(mu, iid_std^2)) independently.
struct PriceModel {
    PriceMode mode = PriceMode::ar1;
    double mu = 3.86e-8;
    double theta = 0.1;
    double sigma = 8.41e-9;
    double iid_std = 1.93e-8;
    double floor = 3.86e-10;

    /// Throws std::invalid_argument if any invariant fails.
    void validate() const;
};

struct PriceState {
    double p = 0.0;
};

/// Linear fee-elastic demand: lambda(g) = max(0, lambda0 - k*g) tx per L1 block.
struct DemandModel {
    double lambda0 = 180.0;
    double k = 1.67e6;

    void validate() const;
    /// Fee at which demand is extinguished.
    [[nodiscard]] double fee_cap() const { return lambda0 / k; }
};

/// Deterministic pseudo-random stream (xoshiro256** seeded through splitmix64).
///
/// Identical (seed, stream_id) pairs produce identical sequences on every
/// platform: the generator uses only integer arithmetic, uniforms are built
/// from the top 53 bits, and normals use the polar method (sqrt and log).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stream roles inside one replica. A replica's streams are
/// stream_id = replica * kStreamsPerReplica + role.
enum class StreamRole : std::uint64_t { price = 0, arrivals = 1, aux = 2 };
inline constexpr std::uint64_t kStreamsPerReplica = 16;

[[nodiscard]] RngStream make_stream(std::uint64_t seed, std::uint64_t replica, StreamRole role);

PriceState step_price_ar1(PriceState state, const PriceModel& model, double omega);
PriceState sample_price_iid(const PriceModel& model, RngStream& rng);
/// Advances the price one block under whichever mode the model selects.
PriceState step_price(PriceState state, const PriceModel& model, RngStream& rng);
/// sigma / sqrt(theta * (2 - theta)); requires ar1 mode and theta > 0.
double stationary_std(const PriceModel& model);

double arrival_rate(const DemandModel& model, double g);

/// Exact Poisson sampler by inverse transform over a cached CDF table.
///
/// Each draw consumes exactly one uniform, so two samplers with different
/// rates fed by the same stream are monotonically coupled: a higher rate
/// never yields fewer arrivals.
class PoissonSampler {
public:
    explicit PoissonSampler(double rate);

    [[nodiscard]] double rate() const { return rate_; }
    [[nodiscard]] std::int64_t quantile(double u) const;
    std::int64_t operator()(RngStream& rng) const { return quantile(rng.uniform()); }

private:
    double rate_;
    std::vector<double> cdf_;
};

/// Poisson pmf for 0..n_max computed in log space (stable for large rates).
std::vector<double> poisson_pmf(double rate, std::size_t n_max);

std::int64_t sample_arrivals(const DemandModel& model, double g, RngStream& rng);

}  // namespace l2lab
