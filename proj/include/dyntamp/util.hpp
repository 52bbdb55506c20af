#pragma once

#include <cstdarg>
#include <cstdint>
#include <string>
#include <vector>

namespace dyntamp {

// printf-style formatting into a std::string
std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Resolved once from the DYNTAMP_LOG environment variable
// (quiet|warn|info|debug, default warn).
LogLevel log_level();
bool log_enabled(LogLevel level);
void log_msg(LogLevel level, const std::string& msg);

inline void log_warn(const std::string& m) { log_msg(LogLevel::kWarn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::kInfo, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::kDebug, m); }

// Deterministic seeded RNG (splitmix64). All randomness in the project goes
// through this so that runs are reproducible across compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next() % span);
  }

  // index sampled from unnormalized non-negative weights
  int categorical(const std::vector<double>& w) {
    double total = 0;
    for (double x : w) total += x;
    double u = uniform01() * total;
    double acc = 0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

double wrap_angle(double a);  // to (-pi, pi]

std::string read_file(const std::string& path);  // throws on failure
void write_file(const std::string& path, const std::string& content);
std::string dirname_of(const std::string& path);
std::string join_path(const std::string& dir, const std::string& rel);

}  // namespace dyntamp
