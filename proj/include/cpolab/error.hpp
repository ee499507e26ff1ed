#ifndef CPOLAB_ERROR_HPP
#define CPOLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cpolab {

// Error categories map onto CLI exit codes:
//   usage -> 1, config/shape/domain/contract/parse/io -> 2,
//   numeric -> 3, verification -> 4.
enum class ErrorKind {
    usage,
    config,
    shape,
    domain,
    contract,
    parse,
    io,
    numeric,
    verification,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    int exit_code() const noexcept {
        switch (kind_) {
            case ErrorKind::usage: return 1;
            case ErrorKind::numeric: return 3;
            case ErrorKind::verification: return 4;
            default: return 2;
        }
    }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace cpolab

#endif
