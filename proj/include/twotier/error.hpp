#pragma once

#include <stdexcept>
#include <string>

namespace twotier {

enum class ErrorKind {
  invalid_argument,
  infeasible,
  numerical,
  budget,
  no_equilibrium,
  io,
};

// Exit code used by the command-line front end for each error kind.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return 3;
    case ErrorKind::infeasible: return 4;
    case ErrorKind::numerical: return 5;
    case ErrorKind::budget: return 6;
    case ErrorKind::no_equilibrium: return 7;
    case ErrorKind::io: return 8;
  }
  return 1;
}

inline const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::budget: return "budget";
    case ErrorKind::no_equilibrium: return "no-equilibrium";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::invalid_argument, what);
}

}  // namespace twotier
