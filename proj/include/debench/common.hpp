#ifndef DEBENCH_COMMON_HPP_
#define DEBENCH_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace debench {

using Real = float;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsatisfiableTask : Error { using Error::Error; };
struct UnknownObject : Error { using Error::Error; };
struct NoTarget : Error { using Error::Error; };
struct ArityMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteGradient : Error { using Error::Error; };
struct TeacherFailure : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };

// Parse failures carry the byte offset of the offending token.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

// ---------------------------------------------------------------------------
// Seed derivation
//
// All stochastic streams in the project are derived from a single run seed
// through splitmix64 so that worker scheduling can never change which seed a
// given episode sees.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class SeedStream : std::uint64_t {
  Rollout = 1,
  Eval = 2,
  Init = 3,
  Demo = 4,
  Scene = 5,
};

constexpr std::uint64_t derive_seed(std::uint64_t run_seed, SeedStream stream,
                                    std::uint64_t index) {
  return splitmix64(splitmix64(run_seed ^ splitmix64(static_cast<std::uint64_t>(stream))) ^
                    splitmix64(index));
}

// ---------------------------------------------------------------------------
// Rng
//
// mt19937_64 with hand-rolled distributions; std:: distributions are
// implementation-defined and would tie reproducibility to the libstdc++
// version.

class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  std::uint64_t bits() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

  // standard normal via Box-Muller (no cached spare, keeps draws stateless)
  double normal() {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  bool operator==(const Rng& o) const { return eng_ == o.eng_; }
  bool operator!=(const Rng& o) const { return !(*this == o); }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Palette

enum class Color : int { Red = 0, Green, Blue, Yellow, Magenta, Cyan };

constexpr int kPaletteSize = 6;

inline Eigen::Vector3f color_rgb(Color c) {
  switch (c) {
    case Color::Red: return {1.f, 0.f, 0.f};
    case Color::Green: return {0.f, 1.f, 0.f};
    case Color::Blue: return {0.f, 0.f, 1.f};
    case Color::Yellow: return {1.f, 1.f, 0.f};
    case Color::Magenta: return {1.f, 0.f, 1.f};
    case Color::Cyan: return {0.f, 1.f, 1.f};
  }
  return {0.f, 0.f, 0.f};
}

inline std::string_view color_name(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Green: return "green";
    case Color::Blue: return "blue";
    case Color::Yellow: return "yellow";
    case Color::Magenta: return "magenta";
    case Color::Cyan: return "cyan";
  }
  return "?";
}

inline std::optional<Color> color_from_name(std::string_view s) {
  for (int i = 0; i < kPaletteSize; ++i) {
    const Color c = static_cast<Color>(i);
    if (s == color_name(c)) return c;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel : int { Debug = 0, Info, Warn, Quiet };

LogLevel& log_level();

template <typename... Args>
void log_at(LogLevel lvl, const char* tag, const char* fmt, Args... args) {
  if (lvl < log_level()) return;
  std::fprintf(stderr, "[%s] ", tag);
  std::fprintf(stderr, fmt, args...);
  std::fprintf(stderr, "\n");
}

#define DEBENCH_LOG_DEBUG(...) ::debench::log_at(::debench::LogLevel::Debug, "debug", __VA_ARGS__)
#define DEBENCH_LOG_INFO(...) ::debench::log_at(::debench::LogLevel::Info, "info", __VA_ARGS__)
#define DEBENCH_LOG_WARN(...) ::debench::log_at(::debench::LogLevel::Warn, "warn", __VA_ARGS__)

}  // namespace debench

#endif  // DEBENCH_COMMON_HPP_
