#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arbsvrg {

/// Bad user input: malformed config, invalid parameters, missing files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed LIBSVM text; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An iterative routine ran out of budget before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver produced a non-finite or exploding iterate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double step_size,
                  std::size_t iteration)
      : std::runtime_error(what + " (step size " + std::to_string(step_size) +
                           ", iteration " + std::to_string(iteration) + ")"),
        step_size_(step_size),
        iteration_(iteration) {}

  double step_size() const noexcept { return step_size_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  double step_size_;
  std::size_t iteration_;
};

}  // namespace arbsvrg
