#pragma once

#include <stdexcept>
#include <string>

namespace pflab {

// Base for all domain errors; `code()` is the stable machine-readable name.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct MalformedCase : Error {
  explicit MalformedCase(const std::string& m) : Error("MalformedCase", m) {}
};
struct DisconnectedGraph : Error {
  explicit DisconnectedGraph(const std::string& m) : Error("DisconnectedGraph", m) {}
};
struct NoSlackBus : Error {
  explicit NoSlackBus(const std::string& m) : Error("NoSlackBus", m) {}
};
struct DuplicateSlack : Error {
  explicit DuplicateSlack(const std::string& m) : Error("DuplicateSlack", m) {}
};
struct ZeroImpedanceBranch : Error {
  explicit ZeroImpedanceBranch(const std::string& m) : Error("ZeroImpedanceBranch", m) {}
};
struct SingularJacobian : Error {
  explicit SingularJacobian(const std::string& m) : Error("SingularJacobian", m) {}
};
struct SingularBprime : Error {
  explicit SingularBprime(const std::string& m) : Error("SingularBprime", m) {}
};
struct TooManyDivergent : Error {
  explicit TooManyDivergent(const std::string& m) : Error("TooManyDivergent", m) {}
};
struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& m) : Error("ShapeMismatch", m) {}
};
struct NotScalar : Error {
  explicit NotScalar(const std::string& m) : Error("NotScalar", m) {}
};
struct NonFiniteLoss : Error {
  explicit NonFiniteLoss(const std::string& m) : Error("NonFiniteLoss", m) {}
};
struct DegenerateTargets : Error {
  explicit DegenerateTargets(const std::string& m) : Error("DegenerateTargets", m) {}
};
struct NearCancellation : Error {
  explicit NearCancellation(const std::string& m) : Error("NearCancellation", m) {}
};
struct EmptyAfterExclusion : Error {
  explicit EmptyAfterExclusion(const std::string& m) : Error("EmptyAfterExclusion", m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("IoError", m) {}
};

}  // namespace pflab
