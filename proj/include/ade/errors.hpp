#pragma once

#include <stdexcept>

namespace ade {

// Root of all pipeline errors. Specific conditions get their own type so
// callers can catch precisely; the CLI maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed external input (corpus records, vocab/lexicon/bundle files).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// A documented internal invariant failed to hold; exit code 3 at the CLI.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace ade
