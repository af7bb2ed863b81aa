#pragma once

#include <string>

namespace fscil {

// Writes content to path via a temporary file in the same directory plus an
// atomic rename, so readers never observe a partial file. Throws
// std::runtime_error on I/O failure.
void atomic_write_file(const std::string& path, const std::string& content);

// Reads a whole file; throws std::runtime_error if it cannot be opened.
std::string read_file(const std::string& path);

// %.17g rendering: shortest text that parses back to the same double.
std::string format_double(double value);

// %a rendering: hex float, bit-exact through strtod.
std::string format_double_hex(double value);

// strtod that consumes the entire token; throws std::runtime_error otherwise.
double parse_double(const std::string& token);

}  // namespace fscil
