#pragma once

#include <stdexcept>
#include <string>

namespace heatlens {

// Base of every error raised by the library. CLI maps subclasses to exit codes.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_parameter : public error {
public:
    using error::error;
};

class ingestion_error : public error {
public:
    using error::error;
};

class format_error : public error {
public:
    using error::error;
};

class shape_error : public error {
public:
    using error::error;
};

class capability_error : public error {
public:
    using error::error;
};

class usage_error : public error {
public:
    using error::error;
};

class truncation_error : public error {
public:
    truncation_error(const std::string& what, double bound, double tolerance)
        : error(what), bound_(bound), tolerance_(tolerance) {}
    double bound() const { return bound_; }
    double tolerance() const { return tolerance_; }

private:
    double bound_;
    double tolerance_;
};

class solver_error : public error {
public:
    solver_error(const std::string& what, double residual)
        : error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

}  // namespace heatlens
