#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace hbt {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad input values / schema violations (CLI exit 2)
struct ValidationError : Error {
  using Error::Error;
};

// malformed file; `where` is a line number (csv) or byte offset (binary)
struct ParseError : ValidationError {
  ParseError(const std::string& msg, std::size_t where)
      : ValidationError(msg + " (at " + std::to_string(where) + ")"), where(where) {}
  std::size_t where;
};

// soft warnings (first-order validity etc.). Default sink prints to stderr.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& msg);

// Runs fn(i) for i in [0, n). Each index must write only its own slot, so the
// result does not depend on the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

int default_threads();

}  // namespace hbt
