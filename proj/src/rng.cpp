#include "gestgan/rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include "gestgan/common.hpp"

namespace gestgan {

void Rng::save(std::ostream& os) const {
    os << engine_ << "\n" << (has_cached_ ? 1 : 0) << "\n";
    // Hexfloat keeps the cached Box-Muller value bit-exact across round-trips.
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", cached_);
    os << buf << "\n";
    if (!os) throw IoError("Rng::save: stream write failed");
}

void Rng::load(std::istream& is) {
    int cached_flag = 0;
    std::string cached_hex;
    if (!(is >> engine_ >> cached_flag >> cached_hex)) {
        throw IoError("Rng::load: malformed rng state");
    }
    has_cached_ = cached_flag != 0;
    cached_ = std::strtod(cached_hex.c_str(), nullptr);
}

}  // namespace gestgan
