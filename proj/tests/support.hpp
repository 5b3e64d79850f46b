#pragma once

#include "alad/results.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace support {

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("alad_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Validate each document against schema definition `def` with the Python jsonschema package.
inline int schema_validate(const std::string& def, const std::vector<nlohmann::json>& docs, const std::string& tag) {
    const auto dir = temp_dir("schema_" + tag);
    {
        std::ofstream s(dir / "schema.json");
        s << alad::schema_document().dump();
        std::ofstream d(dir / "docs.jsonl");
        for (const auto& j : docs) d << j.dump() << '\n';
    }
    const std::string cmd = "python3 " + std::string(ALAD_SOURCE_DIR) + "/tests/tools/validate_schema.py " +
                            (dir / "schema.json").string() + " " + def + " " + (dir / "docs.jsonl").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace support
