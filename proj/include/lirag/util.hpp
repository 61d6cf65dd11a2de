#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lirag {

uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ULL);

/// Mixes an extra value into an fnv state; used to derive per-item RNG streams.
uint64_t mix64(uint64_t a, uint64_t b);

std::string to_hex(uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

uint64_t hash_file(const std::string& path);

/// Shortest decimal form that round-trips a double; used for stable text output.
std::string format_double(double v);

namespace binio {

void put_u32(std::ostream& os, uint32_t v);
void put_u64(std::ostream& os, uint64_t v);
void put_f32(std::ostream& os, float v);
void put_f64(std::ostream& os, double v);
void put_string(std::ostream& os, std::string_view s);

uint32_t get_u32(std::istream& is);
uint64_t get_u64(std::istream& is);
float get_f32(std::istream& is);
double get_f64(std::istream& is);
std::string get_string(std::istream& is);

}  // namespace binio

}  // namespace lirag
