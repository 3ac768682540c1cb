#pragma once

#include <stdexcept>
#include <string>

namespace dfrlab {

// Error categories; mirrored one-to-one by the dfrlab_status codes of the
// public C API.
enum class Errc {
  InvalidArgument = 1,
  InvalidSpec = 2,
  ShapeMismatch = 3,
  Io = 4,
  Format = 5,
  Diverged = 6,
  GroupBalance = 7,
  Labels = 8,
  Metric = 9,
  Probe = 10,
  Pipeline = 11,
  Internal = 12,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace dfrlab
