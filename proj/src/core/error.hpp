#pragma once

#include <stdexcept>
#include <string>

namespace bfln {

enum class ErrorKind {
  validation,
  configuration,
  shape,
  training,
  divergence,
  load,
  chain,
  io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the core carries a kind so the C API can map it to
// a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace bfln
