#ifndef MATCHGAN_COMMON_HPP_
#define MATCHGAN_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace matchgan {

/// Error categories surfaced by the library. Tests match on the kind, the
/// message carries context for humans.
enum class ErrorKind {
  EmptyPool,
  DegenerateLabelSpace,
  InsufficientData,
  ClassUnderflow,
  DegenerateBatch,
  EmptyTripletSet,
  UnlabelledBatch,
  ShapeMismatch,
  InvalidSize,
  InvalidArgument,
  MissingFile,
  MalformedAttributeLine,
  UnknownAttributeName,
  ImageTooSmall,
  DimensionMismatch,
  NonPSD,
  IoError,
};

class MgError : public std::runtime_error {
 public:
  MgError(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw MgError(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace matchgan

#endif  // MATCHGAN_COMMON_HPP_
