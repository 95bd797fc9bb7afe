#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cobench {

// Bad parameters, shapes or configuration supplied by the caller.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed file contents. offset() is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(int epoch, long step)
        : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step)),
          epoch_(epoch), step_(step) {}

    int epoch() const noexcept { return epoch_; }
    long step() const noexcept { return step_; }

private:
    int epoch_;
    long step_;
};

class CacheCorruption : public std::runtime_error {
public:
    CacheCorruption(const std::string& key, const std::string& why)
        : std::runtime_error("cache entry " + key + " is corrupt: " + why), key_(key) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace cobench
