#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nleq {

/// Bound applied to every LLR and BP message.
inline constexpr double kLlrMax = 30.0;

/// Stand-in for "no noise" / "no nonlinearity" in dB- and amplitude-valued settings.
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind { invalid_input, config, numerical, range };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error invalid_input(const std::string& what) { return {ErrorKind::invalid_input, what}; }
inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error numerical_error(const std::string& what) { return {ErrorKind::numerical, what}; }
inline Error range_error(const std::string& what) { return {ErrorKind::range, what}; }

inline double clamp_llr(double v) noexcept
{
    return v > kLlrMax ? kLlrMax : (v < -kLlrMax ? -kLlrMax : v);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace nleq
