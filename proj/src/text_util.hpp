#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dgmm::detail {

std::string trim(const std::string& s);

/// key=value lines; blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

/// Comma- or whitespace-separated list of reals.
std::vector<double> parse_doubles(const std::string& text);

std::string read_text_file(const std::string& path);

}  // namespace dgmm::detail
