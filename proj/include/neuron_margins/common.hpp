#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuron_margins {

// Input files that cannot be parsed at all (bad header, wrong column
// count, unreadable cells) raise ParseError with the offending path and
// 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
          path_(std::move(path)),
          line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

// Structurally valid input that violates a domain invariant (negative
// activation, duplicate image id, rank gap, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Rate computation over an empty image partition; carries the concept so
// callers can report which label ran dry.
class EmptyPartitionError : public ValidationError {
public:
    explicit EmptyPartitionError(std::string concept_tag)
        : ValidationError("empty partition for concept \"" + concept_tag + "\""),
          concept_(std::move(concept_tag)) {}

    const std::string& concept_tag() const noexcept { return concept_; }

private:
    std::string concept_;
};

// Stderr logger. Level comes from NEURON_MARGINS_LOG (error|warn|info|debug),
// default warn.
namespace log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level level();
void set_level(Level lv);
void write(Level lv, const std::string& msg);

inline void error(const std::string& msg) { write(Level::error, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void debug(const std::string& msg) { write(Level::debug, msg); }

}  // namespace log

// Appends to the sink (when given) and mirrors to the warn log.
void emit_warning(std::vector<std::string>* sink, const std::string& msg);

}  // namespace neuron_margins
