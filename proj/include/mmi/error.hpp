#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mmi {

// Every failure raised by the library carries a short machine-readable code
// (e.g. "outside-support") so callers can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail)
        : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline void require(bool condition, const char* code, const std::string& detail) {
    if (!condition) throw Error(code, detail);
}

}  // namespace mmi
