#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace patchscan {

// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The repository or the git executable could not be used at all.
class GitIoError : public Error {
public:
    using Error::Error;
};

// A revision, object or path does not exist.
class NotFound : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyFragment : public Error {
public:
    EmptyFragment() : Error("fragment similarity needs non-empty fragments") {}
};

class InvalidHunk : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Severity { Info, Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Warning;
    std::string code;     // stable machine-readable tag, e.g. "ContextUnavailable"
    std::string message;
};

// Thread-safe collector for non-fatal findings. Passing nullptr wherever a
// Diagnostics* is accepted discards them.
class Diagnostics {
public:
    void add(Severity sev, std::string code, std::string message) {
        std::lock_guard lock(mu_);
        items_.push_back({sev, std::move(code), std::move(message)});
    }
    void warn(std::string code, std::string message) {
        add(Severity::Warning, std::move(code), std::move(message));
    }

    std::vector<Diagnostic> snapshot() const {
        std::lock_guard lock(mu_);
        return items_;
    }

    bool has(const std::string& code) const {
        std::lock_guard lock(mu_);
        for (const auto& d : items_)
            if (d.code == code) return true;
        return false;
    }

private:
    mutable std::mutex mu_;
    std::vector<Diagnostic> items_;
};

inline void diag(Diagnostics* sink, std::string code, std::string message) {
    if (sink) sink->warn(std::move(code), std::move(message));
}

} // namespace patchscan
