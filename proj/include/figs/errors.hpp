#pragma once

#include <stdexcept>
#include <string>

namespace figs {

// Common base so callers can catch any library failure in one clause.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A state vector picked up a NaN/Inf entry (integrator blow-up, bad input).
struct NonFiniteState : Error {
  using Error::Error;
};

// |roll| or |pitch| at or beyond pi/2: the Euler chart (and the flatness
// inversion built on it) is invalid there.
struct AttitudeSingular : Error {
  using Error::Error;
};

// Total thrust mg + T_dev has hit zero or gone negative.
struct ThrustSingular : Error {
  using Error::Error;
};

// A linear solve was requested on a matrix whose condition number exceeds
// the configured bound.
struct IllConditioned : Error {
  using Error::Error;
};

// A gain failed the stability check (or a Lyapunov solve was ill-posed).
struct NotHurwitz : Error {
  using Error::Error;
};

// Two independent computations of the same quantity disagreed. This is a
// bug trap, not a recoverable condition.
struct InternalDisagreement : Error {
  using Error::Error;
};

// Gain-table construction certified zero candidates.
struct EmptyTable : Error {
  using Error::Error;
};

// step() was called on an environment whose episode already ended.
struct EpisodeFinished : Error {
  using Error::Error;
};

// Tensor/layer shape mismatch when loading or syncing network parameters.
struct ShapeMismatch : Error {
  using Error::Error;
};

// Bad or inconsistent configuration input.
struct ConfigError : Error {
  using Error::Error;
};

// A checkpoint references a different gain table than the one supplied.
struct HashMismatch : Error {
  using Error::Error;
};

// File read/write/parse failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace figs
