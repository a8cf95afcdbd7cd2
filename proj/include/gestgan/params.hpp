#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gestgan/tensor.hpp"

namespace gestgan {

// Ordered, named parameter set. Order is the canonical identity used by the
// optimizers, EMA shadows, and checkpoints, so lookups return stable indices.
struct TensorDict {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    std::size_t add(std::string name, Tensor value);
    std::size_t index_of(std::string_view name) const;  // throws if absent
    bool contains(std::string_view name) const;

    Tensor& operator[](std::string_view name) { return values[index_of(name)]; }
    const Tensor& operator[](std::string_view name) const { return values[index_of(name)]; }

    std::size_t size() const { return values.size(); }

    std::vector<Tensor*> pointers();
    std::vector<const Tensor*> pointers() const;

    // FNV over the raw bit patterns; used by update-isolation assertions.
    std::uint64_t checksum() const;
};

}  // namespace gestgan
