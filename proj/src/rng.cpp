#include "ganlab/rng.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace ganlab {

void Rng::save(std::ostream& os) const {
    os << engine_;
    if (!os) throw std::runtime_error("rng: failed to write engine state");
}

void Rng::load(std::istream& is) {
    is >> engine_;
    if (!is) throw std::runtime_error("rng: failed to read engine state");
}

}  // namespace ganlab
