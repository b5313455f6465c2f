#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wikicite {

// Errors caused by bad input or configuration. The CLI maps these to exit code 1;
// anything else escaping a stage is treated as an internal error (exit code 2).
class UserError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public UserError {
public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

private:
  std::vector<std::string> violations_;
};

class DependencyError : public UserError {
public:
  using UserError::UserError;
};

// Byte span [begin, end) inside some text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

namespace text {

std::string_view trim(std::string_view s);
std::string lower(std::string_view s);
std::string upper(std::string_view s);
// Lowercase, trim and collapse runs of whitespace to a single space.
std::string fold(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool is_space(char c);

}  // namespace text

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// Streams a file line by line; lines are passed without the trailing newline.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view line, std::size_t line_no)>& fn);

// Deterministic fixed-precision rendering used wherever output must be byte-stable.
std::string format_double(double value, int precision = 6);

// Unbiased integer in [0, bound) from a 64-bit engine; the standard distributions are
// implementation-defined, this one is stable across standard libraries.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound);
// Uniform double in [0, 1) built from the top 53 bits.
inline double unit_rand(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void stable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded_rand(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace wikicite
