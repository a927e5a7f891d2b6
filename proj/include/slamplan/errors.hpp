#pragma once

#include <stdexcept>
#include <string>

namespace slamplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON syntax or schema).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A graph violates a structural invariant (connectivity, duplicates, SPD covariances).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Factorization hit a pivot below tolerance; the pose graph is disconnected.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Input exceeds the size an exact/brute-force routine accepts.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Pose-graph optimization diverged or its inputs are inconsistent.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Pruned and unpruned selection disagree; the pruning rule dropped a winner.
class SoundnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace slamplan
