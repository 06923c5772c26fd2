#pragma once

#include <stdexcept>
#include <string>

namespace pmq {

/// Raised when a computation would exceed its configured work budget.
class resource_limit_error : public std::runtime_error {
 public:
  explicit resource_limit_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pmq
