#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace distill {

/// Shortest decimal form that round-trips a double (%.17g trimmed).
std::string format_double(double v);

/// Split a comma-separated line; no quoting (none of our fields need it).
std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);
bool parse_bool(const std::string& s, const std::string& what);

/// Read a whole file; IoError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const std::string& body);

// Little-endian scalar IO for the versioned parameter file.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace distill
