#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notefuse/core/errors.hpp"

namespace notefuse::core {

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw io_error("short write on " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

// Atomic replace: write to a sibling temp file, then rename over the target.
inline void write_text_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    write_text_file(tmp, content);
    std::filesystem::rename(tmp, path);
}

inline void for_each_jsonl(const std::string& path,
                           const std::function<void(const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw io_error(path + ":" + std::to_string(lineno) + ": invalid JSON line");
        fn(j);
    }
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw io_error("cannot write " + path);
    }

    void write(const nlohmann::json& j) {
        out_ << j.dump() << '\n';
        if (!out_) throw io_error("short write on " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace notefuse::core
