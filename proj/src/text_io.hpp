#pragma once

#include <filesystem>
#include <string>

namespace tsexplain::detail {

std::string read_text_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never see a
// half-written artifact.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Shortest decimal form that parses back to the same float.
std::string format_float(float value);
std::string format_number(double value);

}  // namespace tsexplain::detail
