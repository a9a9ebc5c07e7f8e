#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wada {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class ZeroMassGroup : public Error {
public:
  explicit ZeroMassGroup(std::size_t group)
      : Error("attack group " + std::to_string(group) + " has non-positive mass"), group_(group) {}
  std::size_t group() const noexcept { return group_; }

private:
  std::size_t group_;
};

class LogisticDomain : public Error {
public:
  using Error::Error;
};

class NonFinite : public Error {
public:
  using Error::Error;
};

class InvalidMeasure : public Error {
public:
  using Error::Error;
};

class InvalidConfig : public Error {
public:
  using Error::Error;
};

class CapacityZero : public Error {
public:
  CapacityZero() : Error("rsr_capped averager needs a capacity of at least 1") {}
};

class EmptyAverage : public Error {
public:
  EmptyAverage() : Error("finalize called before any snapshot was absorbed") {}
};

class MassMismatch : public Error {
public:
  using Error::Error;
};

class SupportTooLarge : public Error {
public:
  using Error::Error;
};

class CheckpointMismatch : public Error {
public:
  using Error::Error;
};

class OddCount : public Error {
public:
  explicit OddCount(std::size_t n) : Error("two-moons needs an even sample count, got " + std::to_string(n)) {}
};

class EmptyDataset : public Error {
public:
  EmptyDataset() : Error("dataset is empty") {}
};

class ParseError : public Error {
public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : Error("parse error at row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
        row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

class OutOfBox : public Error {
public:
  explicit OutOfBox(std::size_t row) : Error("row " + std::to_string(row) + " lies outside the data box"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

class IoError : public Error {
public:
  using Error::Error;
};

class MissingModel : public Error {
public:
  using Error::Error;
};

}  // namespace wada
