#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace assocnet {

// All recoverable failures in the library throw this; the CLI maps it to exit 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void append_to_stream(std::ostringstream&) {}

template <typename T, typename... Rest>
void append_to_stream(std::ostringstream& oss, const T& value, Rest&&... rest) {
    oss << value;
    append_to_stream(oss, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
    std::ostringstream oss;
    detail::append_to_stream(oss, std::forward<Args>(args)...);
    throw Error(oss.str());
}

template <typename... Args>
void require(bool cond, Args&&... args) {
    if (!cond) fail(std::forward<Args>(args)...);
}

}  // namespace assocnet
