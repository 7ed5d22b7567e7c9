#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace hetplan {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a requested makespan target cannot be met at all (distinct from
// bad input, which raises plain Error).
class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& what) : Error(what) {}
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void cat_into(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    cat_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
    std::ostringstream os;
    detail::cat_into(os, args...);
    return os.str();
}

inline constexpr const char* kToolVersion = "hetplan 0.1.0";

// Memory figures use GB = 1e9 bytes throughout.
inline constexpr double kBytesPerGb = 1e9;

}  // namespace hetplan
