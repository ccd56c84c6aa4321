#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mast {

enum class ErrorKind {
  LineCountMismatch,
  EmptyFile,
  FileNotFound,
  InsufficientData,
  InvalidId,
  ShapeMismatch,
  IndexOutOfRange,
  NonScalarLoss,
  EmptyTrainingSet,
  EmptyClass,
  RowTooSmall,
  KTooLarge,
  VocabMismatch,
  DigestMismatch,
  LengthMismatch,
  EmptyReference,
  InvalidConfig,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind.
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

}  // namespace mast
