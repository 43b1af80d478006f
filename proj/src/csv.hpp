#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace windfield::csv {

// Splits a line on commas, trimming surrounding whitespace from each field.
std::vector<std::string> split(const std::string &line);

// Non-empty lines of a text file, '#' comment lines dropped.
std::vector<std::string> read_lines(const std::filesystem::path &file);

double to_double(const std::string &field, const std::string &context);
long long to_integer(const std::string &field, const std::string &context);

}  // namespace windfield::csv
