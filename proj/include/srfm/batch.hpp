#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "srfm/record.hpp"

namespace srfm {

// A minibatch over an interleaved multi-domain pool. Indices refer into the
// dataset vector the batch was cut from; partitions are per domain id.
struct DomainBatch {
    std::vector<int> indices;
    std::map<int, std::vector<int>> by_domain;

    static DomainBatch from_indices(const std::vector<InteractionRecord>& dataset,
                                    std::vector<int> idx) {
        DomainBatch b;
        b.indices = std::move(idx);
        for (int i : b.indices) b.by_domain[dataset[i].domain_id].push_back(i);
        return b;
    }
};

// Global shuffle by epoch seed, then contiguous slicing. Every record
// appears exactly once per epoch.
inline std::vector<DomainBatch> make_batches(const std::vector<InteractionRecord>& dataset,
                                             int batch_size, std::uint64_t epoch_seed) {
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<DomainBatch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::size_t end = std::min(order.size(), start + batch_size);
        out.push_back(DomainBatch::from_indices(
            dataset, std::vector<int>(order.begin() + start, order.begin() + end)));
    }
    return out;
}

}  // namespace srfm
