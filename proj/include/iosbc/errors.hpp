#pragma once

#include <stdexcept>
#include <string>

namespace iosbc {

/// Invalid scenario or option values. The CLI maps this to exit code 2.
///
/// `key()` names the offending configuration key (dotted path) when there is one,
/// so loaders can anchor the message to a source line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
    /// Message reads "location: key: what".
    ConfigError(std::string key, const std::string& location, const std::string& what)
        : std::runtime_error(location + ": " + key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// A precondition on a numerical argument was not met (non-PSD covariance, wrong shape).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Argument outside the domain where a quantity is defined (e.g. rho at a singular endpoint).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A factorization failed or produced non-finite output.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace iosbc
