#ifndef EHNET_ERRORS_HPP
#define EHNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ehnet {

/// Invalid scenario or solver parameters. Carries the offending key path when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::string path = {})
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// The exact solver declined a problem that is too large to enumerate.
class SolverRefusal : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An observation had zero probability under the current belief and action.
class BeliefInconsistency : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical integration failed to reach the requested accuracy.
class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Policy file does not belong to the model it is loaded against.
class ModelMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ehnet

#endif // EHNET_ERRORS_HPP
