#pragma once

#include <stdexcept>
#include <string>

namespace vtrace {

/// Base error for everything the library throws. The category decides the
/// process exit code in the command-line tool.
class Error : public std::runtime_error {
public:
    enum class Category { usage, data, compute };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

/// Invalid parameters or arguments (exit code 2).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(Category::usage, what) {}
};

/// Malformed or inconsistent input data, I/O failures (exit code 3).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

/// The computation itself could not produce a result (exit code 4).
class ComputeError : public Error {
public:
    explicit ComputeError(const std::string& what) : Error(Category::compute, what) {}
};

}  // namespace vtrace
