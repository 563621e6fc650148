#pragma once

#include <cstdint>
#include <vector>

namespace modest {

// Flat parameter vector. Accounting charges bytes_per_param per entry
// (default 4, approximating single-precision transfers) regardless of the
// double-precision arithmetic used internally.
struct Model {
    std::vector<double> params;

    std::int64_t byte_size(int bytes_per_param) const {
        return static_cast<std::int64_t>(params.size()) * bytes_per_param;
    }

    friend bool operator==(const Model&, const Model&) = default;
};

// Unweighted elementwise mean. Dimension mismatch is a configuration error.
Model aggregate_models(const std::vector<const Model*>& models);

// Model transfers in one failure-free round: every trainer pushes to every
// aggregator, every completed aggregator pushes back to the whole sample.
inline std::int64_t round_transfer_count(std::int64_t s, std::int64_t a, std::int64_t completed_aggregators) {
    return s * a + completed_aggregators * s;
}

}  // namespace modest
