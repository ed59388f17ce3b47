#pragma once

#include <stdexcept>
#include <string>

namespace tidysim {

// Base for every error this library throws on its own behalf.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File is syntactically fine but names something that does not exist or
// violates a documented schema rule. Message names the offending entry.
struct SchemaError : Error {
  using Error::Error;
};

// Parsed value violates a domain invariant (message lists all failures).
struct ValidationError : Error {
  using Error::Error;
};

// Lookup by a name/id that is not known.
struct LookupError : Error {
  using Error::Error;
};

// Operation outside the agent's action space I^(i).
struct CapabilityError : Error {
  using Error::Error;
};

// Requested cell/target cannot be reached.
struct PathError : Error {
  using Error::Error;
};

// Task/demonstration generation failed (unsolvable draw, exhausted retries).
struct GenerationError : Error {
  using Error::Error;
};

// Non-finite loss or incompatible shapes during training.
struct TrainingError : Error {
  using Error::Error;
};

// Trajectory log does not match the scene or is corrupt.
struct ReplayError : Error {
  using Error::Error;
};

}  // namespace tidysim
