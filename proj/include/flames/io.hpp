#pragma once

#include <filesystem>
#include <fstream>
#include <string>

namespace flames::io {

// Both throw Error{Io} naming the path.
std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

// Reads a whole file; throws Error{Io}.
std::string read_file(const std::filesystem::path& path);

}  // namespace flames::io
