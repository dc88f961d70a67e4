#include "plsinet/family.hpp"

#include "plsinet/errors.hpp"

namespace plsinet {

std::string_view to_string(Family f) noexcept {
    switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::binomial: return "binomial";
    case Family::poisson: return "poisson";
    case Family::cox: return "cox";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    if (name == "gaussian" || name == "continuous") return Family::gaussian;
    if (name == "binomial" || name == "binary") return Family::binomial;
    if (name == "poisson" || name == "count") return Family::poisson;
    if (name == "cox" || name == "survival") return Family::cox;
    throw DomainError("unknown outcome family '" + std::string(name) + "'");
}

} // namespace plsinet
