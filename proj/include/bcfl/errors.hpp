#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bcfl {

/// Input violated a documented precondition (wrong dimension, bad config value).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Byte or text payload could not be decoded.
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV input rejected; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& source = {})
      : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) +
                           ": " + detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t epoch, std::uint64_t round = 0)
      : std::runtime_error(message(epoch, round)), epoch_(epoch), round_(round) {}

  std::uint64_t epoch() const noexcept { return epoch_; }
  /// 0 when the failure happened outside a coordinated round.
  std::uint64_t round() const noexcept { return round_; }

 private:
  static std::string message(std::uint64_t epoch, std::uint64_t round) {
    std::string m = "non-finite loss in epoch " + std::to_string(epoch);
    if (round != 0) m += " of round " + std::to_string(round);
    return m;
  }

  std::uint64_t epoch_;
  std::uint64_t round_;
};

/// A dataset lacks one of the two classes.
class MissingClassError : public std::runtime_error {
 public:
  explicit MissingClassError(int label)
      : std::runtime_error(std::string("dataset has no ") +
                           (label == 1 ? "positive (label 1)" : "negative (label 0)") + " records"),
        label_(label) {}
  int label() const noexcept { return label_; }

 private:
  int label_;
};

class DegenerateDistanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The ledger refused a transaction (unregistered sender, duplicate, contract guard).
class LedgerRejection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated client dropped out during local training.
class ClientFailure : public std::runtime_error {
 public:
  explicit ClientFailure(const std::string& client_id)
      : std::runtime_error("client " + client_id + " failed during local training"),
        client_id_(client_id) {}
  const std::string& client_id() const noexcept { return client_id_; }

 private:
  std::string client_id_;
};

}  // namespace bcfl
