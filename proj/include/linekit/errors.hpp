#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linekit {

/// Malformed input data (PGM streams, trajectory files, experiment specs).
/// Carries the byte offset at which parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Geometric configuration outside an operation's domain: parallel planes,
/// zero-length line directions, lines projecting through the optical center.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace linekit
