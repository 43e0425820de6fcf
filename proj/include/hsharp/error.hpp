#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace hsharp {

/// Failure category. The CLI maps these onto process exit codes 1, 2 and 3.
enum class ErrorKind { validation, io, numerical };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::io: return "io";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

/// Library-wide exception. Carries an optional pipeline stage and tile index
/// so errors raised deep inside a tiled run stay attributable.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }
  const std::string& stage() const noexcept { return stage_; }
  std::optional<std::size_t> tile() const noexcept { return tile_; }

  /// Returns a copy annotated with stage/tile context; existing context wins.
  Error with_context(std::string stage, std::optional<std::size_t> tile = std::nullopt) const {
    Error e = *this;
    if (e.stage_.empty()) e.stage_ = std::move(stage);
    if (!e.tile_) e.tile_ = tile;
    return e;
  }

  std::string describe() const {
    std::string out = std::string(to_string(kind_)) + " error";
    if (!stage_.empty()) out += " in stage '" + stage_ + "'";
    if (tile_) out += " (tile " + std::to_string(*tile_) + ")";
    out += ": " + message_;
    return out;
  }

 private:
  ErrorKind kind_;
  std::string message_;
  std::string stage_;
  std::optional<std::size_t> tile_;
};

[[noreturn]] inline void fail_validation(const std::string& message) {
  throw Error(ErrorKind::validation, message);
}

[[noreturn]] inline void fail_io(const std::string& message) {
  throw Error(ErrorKind::io, message);
}

[[noreturn]] inline void fail_numerical(const std::string& message) {
  throw Error(ErrorKind::numerical, message);
}

}  // namespace hsharp
