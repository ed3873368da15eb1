#include "posenorm/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace posenorm {

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

Rng Rng::deserialize(const std::string& text) {
    Rng rng(0);
    std::istringstream is(text);
    is >> rng.engine_;
    if (!is) throw std::runtime_error("Rng::deserialize: malformed state string");
    return rng;
}

uint64_t Rng::state_hash() const {
    std::ostringstream os;
    os << engine_;
    return fnv1a(os.str());
}

}  // namespace posenorm
