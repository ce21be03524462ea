#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spdc {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kLn2 = std::numbers::ln2;

// Conversions from SI base units to the units used in reports.
inline constexpr double kNm = 1e-9;
inline constexpr double kUm = 1e-6;
inline constexpr double kMm = 1e-3;
inline constexpr double kPs = 1e-12;
inline constexpr double kNs = 1e-9;
inline constexpr double kPs2 = 1e-24;
inline constexpr double kTHz = 1e12;

inline double wavelength_to_frequency(double wavelength) { return kSpeedOfLight / wavelength; }
inline double frequency_to_wavelength(double frequency) { return kSpeedOfLight / frequency; }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Raised when an operation's precondition or numerical validation fails.
/// The CLI maps it to exit status 3.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or incomplete configuration. The CLI maps it to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Worker count for internally parallel operations. Results never depend on it.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) across the configured worker count.
/// Each index is handled exactly once; callers write to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Seed for an independent RNG stream identified by (seed, stream, block).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t block);

/// FWHM of a sampled, single-peaked profile using linear interpolation at half maximum.
/// x must be strictly monotone. Throws if the profile does not fall below half maximum
/// on both sides.
double fwhm_linear(const double* x, const double* y, std::size_t n);

}  // namespace spdc
