#include "gestgan/params.hpp"

#include <cstring>

#include "gestgan/common.hpp"

namespace gestgan {

std::size_t TensorDict::add(std::string name, Tensor value) {
    require(!contains(name), "TensorDict: duplicate name: " + name);
    names.push_back(std::move(name));
    values.push_back(std::move(value));
    return values.size() - 1;
}

std::size_t TensorDict::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    throw std::invalid_argument("TensorDict: no such tensor: " + std::string(name));
}

bool TensorDict::contains(std::string_view name) const {
    for (const std::string& n : names) {
        if (n == name) return true;
    }
    return false;
}

std::vector<Tensor*> TensorDict::pointers() {
    std::vector<Tensor*> out;
    out.reserve(values.size());
    for (Tensor& t : values) out.push_back(&t);
    return out;
}

std::vector<const Tensor*> TensorDict::pointers() const {
    std::vector<const Tensor*> out;
    out.reserve(values.size());
    for (const Tensor& t : values) out.push_back(&t);
    return out;
}

std::uint64_t TensorDict::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    };
    for (std::size_t i = 0; i < values.size(); ++i) {
        mix(names[i].data(), names[i].size());
        const Tensor& t = values[i];
        for (std::size_t k = 0; k < t.size(); ++k) {
            double v = t[k];
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            mix(&bits, sizeof(bits));
        }
    }
    return h;
}

}  // namespace gestgan
