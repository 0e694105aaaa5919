#pragma once

#include <stdexcept>
#include <string>

namespace ihmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite() : Error("matrix is not positive definite") {}
  explicit NotPositiveDefinite(const std::string& what) : Error(what) {}
};

class DowndateBreaksPositivity : public Error {
 public:
  DowndateBreaksPositivity() : Error("rank-one downdate breaks positive definiteness") {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ZeroVector : public Error {
 public:
  ZeroVector() : Error("density undefined at the origin (zero observation vector)") {}
};

class InconsistentChain : public Error {
 public:
  using Error::Error;
};

class EmptySamples : public Error {
 public:
  EmptySamples() : Error("no posterior samples supplied") {}
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class LabelLengthMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace ihmm
