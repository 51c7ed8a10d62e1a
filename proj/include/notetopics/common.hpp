#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace notetopics {

inline constexpr const char* kToolName = "notetopics";
inline constexpr const char* kToolVersion = "0.1.0";

// Bad or inconsistent input data. The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A broken internal invariant. The CLI maps this to exit code 3.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

// ---- string helpers ----

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Collapses every whitespace run to a single space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Number of Unicode scalar values in a UTF-8 string (continuation bytes
// are not counted; malformed bytes count as one scalar each).
std::size_t utf8_length(std::string_view s);

// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Shortest-round-trip style formatting used by all text exports:
// "%.(digits)g", digits = significant digits.
std::string format_double(double value, int significant_digits);

// ---- hashing (FNV-1a 64, used for file hashes, vocab hashes, seeds) ----

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

std::uint64_t hash_file(const std::filesystem::path& path);
std::string hash_file_hex(const std::filesystem::path& path);
std::string to_hex(std::uint64_t value);

// splitmix64 step (Steele, Lea, Flood). Used to derive per-K sweep seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t base_seed, std::uint64_t salt) {
    return splitmix64(base_seed ^ splitmix64(salt));
}

// ---- file helpers ----

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace notetopics
