// Thread-safe memo of solved posting policies keyed by fee.
#pragma once

#include <cstddef>
#include <future>
#include <map>
#include <memory>
#include <mutex>

#include "l2lab/dynamics.hpp"
#include "l2lab/mdp.hpp"

namespace l2lab {

/// Each fee is solved at most once; concurrent requests for the same fee wait
/// on the first solve. Returned references stay valid for the cache lifetime.
class PolicyCache {
public:
    /// lattice_size points span [0, lattice_hi] for quantized lookups.
    PolicyCache(const SystemModel& model, const MdpConfig& config, std::size_t lattice_size, double lattice_hi);

    /// Solution at exactly this fee.
    const MdpSolution& exact(double fee);
    /// Solution at the lattice point nearest to fee.
    const MdpSolution& lattice(double fee);

    [[nodiscard]] std::size_t lattice_index(double fee) const;
    [[nodiscard]] double lattice_fee(std::size_t index) const;
    [[nodiscard]] std::size_t lattice_size() const { return lattice_size_; }
    [[nodiscard]] const PriceGrid& grid() const { return grid_; }
    [[nodiscard]] const SystemModel& model() const { return model_; }
    [[nodiscard]] const MdpConfig& config() const { return config_; }
    /// Number of distinct fees solved so far.
    [[nodiscard]] std::size_t solved() const;

private:
    using Entry = std::shared_future<std::shared_ptr<const MdpSolution>>;

    SystemModel model_;
    MdpConfig config_;
    PriceGrid grid_;
    std::size_t lattice_size_;
    double lattice_hi_;
    mutable std::mutex mutex_;
    std::map<double, Entry> entries_;
};

}  // namespace l2lab
