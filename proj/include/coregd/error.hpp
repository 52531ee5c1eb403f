#pragma once

#include <stdexcept>
#include <string>

namespace coregd {

/// Malformed or out-of-range input (bad indices, bad config values, bad files).
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// The operation requires a connected graph.
class DisconnectedGraphError : public std::runtime_error {
public:
    explicit DisconnectedGraphError(const std::string& what) : std::runtime_error(what) {}
};

/// All layout points coincide, so no optimal scale exists.
class DegenerateLayoutError : public std::runtime_error {
public:
    explicit DegenerateLayoutError(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes do not line up.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace coregd
