#pragma once

#include <string>
#include <string_view>

namespace plsinet {

enum class Family { gaussian, binomial, poisson, cox };

std::string_view to_string(Family f) noexcept;
/// Accepts the canonical names plus "binary", "count" and "survival".
Family parse_family(std::string_view name);

} // namespace plsinet
