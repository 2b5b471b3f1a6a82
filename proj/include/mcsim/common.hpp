#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace mcsim {

using u64 = std::uint64_t;
using i64 = std::int64_t;

// Error taxonomy mirrors the CLI exit codes: configuration problems (bad
// documents, bad flags, bad topology requests) exit 1, simulation failures
// (infeasible plans, deadlocks) exit 2.
enum class ErrorKind { config, simulation };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& message) {
    throw Error(ErrorKind::config, message);
}

[[noreturn]] inline void fail_simulation(const std::string& message) {
    throw Error(ErrorKind::simulation, message);
}

// printf-style formatting into std::string (toolchain has no <format>).
inline std::string format(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    std::va_list args2;
    va_copy(args2, args);
    int n = std::vsnprintf(nullptr, 0, fmt, args);
    va_end(args);
    std::string out(static_cast<size_t>(n), '\0');
    std::vsnprintf(out.data(), out.size() + 1, fmt, args2);
    va_end(args2);
    return out;
}

// Byte counters multiply large dims; overflow must surface, never wrap.
inline u64 checked_mul(u64 a, u64 b, const char* what) {
    u64 r = 0;
    if (__builtin_mul_overflow(a, b, &r))
        fail_config(format("%s: byte/MAC counter overflow (%llu * %llu)", what,
                           static_cast<unsigned long long>(a),
                           static_cast<unsigned long long>(b)));
    return r;
}

inline u64 checked_add(u64 a, u64 b, const char* what) {
    u64 r = 0;
    if (__builtin_add_overflow(a, b, &r))
        fail_config(format("%s: byte/MAC counter overflow (add)", what));
    return r;
}

// Stable scientific formatting used for every floating-point value that
// lands in a CSV/JSON artifact, so identical runs are byte-identical.
inline std::string format_double(double v) { return format("%.9e", v); }

inline bool approx_rel(double a, double b, double tol) {
    double scale = std::abs(a) > std::abs(b) ? std::abs(a) : std::abs(b);
    if (scale == 0.0) return true;
    return std::abs(a - b) <= tol * scale;
}

}  // namespace mcsim
