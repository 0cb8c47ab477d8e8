#ifndef E2E_ERROR_HPP
#define E2E_ERROR_HPP

#include <stdexcept>
#include <string>

namespace e2e {

// Error categories map onto CLI exit codes (config=2, numeric=3, io=4).
enum class ErrorKind { config, numeric, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { throw Error(ErrorKind::io, msg); }

} // namespace e2e

#endif
