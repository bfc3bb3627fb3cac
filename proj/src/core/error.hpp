#ifndef ASL_CORE_ERROR_HPP
#define ASL_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace asl {

// Error categories map 1:1 onto the C API status codes and CLI exit codes.
enum class ErrorKind {
  kInvalidArg,  // bad parameters or configuration
  kIo,          // file missing, truncated, unwritable
  kFormat,      // recognizable file but malformed content
  kNumeric,     // singular configuration, non-finite values
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace asl

#endif
