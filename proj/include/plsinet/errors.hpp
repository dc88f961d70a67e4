#pragma once

#include <stdexcept>
#include <string>

namespace plsinet {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map a category to an exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyDataError : public Error {
public:
    using Error::Error;
};

class FactorizationError : public Error {
public:
    FactorizationError(const std::string& what, std::size_t pivot)
        : Error(what), pivot_(pivot) {}
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

// Non-finite value inside a network forward pass.
class NumericError : public Error {
public:
    using Error::Error;
};

class DegenerateDirectionError : public Error {
public:
    using Error::Error;
};

class UnsupportedFamilyError : public Error {
public:
    using Error::Error;
};

class NoEventsError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite objective.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t epoch)
        : Error(what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

// Too many bootstrap replicates failed.
class InferenceError : public Error {
public:
    using Error::Error;
};

} // namespace plsinet
