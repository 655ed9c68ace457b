#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace protofsm {

// Whole-file binary read/write. Failures throw IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace protofsm
