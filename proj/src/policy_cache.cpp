#include "l2lab/policy_cache.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace l2lab {

PolicyCache::PolicyCache(const SystemModel& model, const MdpConfig& config, std::size_t lattice_size,
                         double lattice_hi)
    : model_(model),
      config_(config),
      grid_(build_price_grid(model.price, config)),
      lattice_size_(lattice_size),
      lattice_hi_(lattice_hi) {
    model_.validate();
    if (lattice_size_ < 2) throw std::invalid_argument("PolicyCache: lattice needs at least 2 points");
    if (!(lattice_hi_ > 0.0)) throw std::invalid_argument("PolicyCache: lattice upper bound must be > 0");
}

const MdpSolution& PolicyCache::exact(double fee) {
    if (!(fee >= 0.0)) throw std::invalid_argument("PolicyCache: fee must be >= 0");
    std::promise<std::shared_ptr<const MdpSolution>> promise;
    Entry entry;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        const auto it = entries_.find(fee);
        if (it != entries_.end()) {
            entry = it->second;
        } else {
            entry = promise.get_future().share();
            entries_.emplace(fee, entry);
            owner = true;
        }
    }
    if (owner) {
        try {
            promise.set_value(
                std::make_shared<const MdpSolution>(solve(grid_, model_.demand, fee, model_.cost, config_)));
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    }
    return *entry.get();
}

std::size_t PolicyCache::lattice_index(double fee) const {
    const double scaled = std::clamp(fee / lattice_hi_, 0.0, 1.0) * static_cast<double>(lattice_size_ - 1);
    return static_cast<std::size_t>(std::lround(scaled));
}

double PolicyCache::lattice_fee(std::size_t index) const {
    if (index >= lattice_size_) throw std::out_of_range("PolicyCache: lattice index out of range");
    return lattice_hi_ * static_cast<double>(index) / static_cast<double>(lattice_size_ - 1);
}

const MdpSolution& PolicyCache::lattice(double fee) { return exact(lattice_fee(lattice_index(fee))); }

std::size_t PolicyCache::solved() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace l2lab
