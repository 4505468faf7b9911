// Copyright 2026 The kdcot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kdcot/io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "kdcot/text.hpp"

namespace kdcot::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "." +
           std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    std::vector<json> out;
    int line_no = 0;
    for (const auto& line : text::split(content, "\n")) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<json>& records) {
    std::string content;
    for (const auto& r : records) {
        content += r.dump();
        content.push_back('\n');
    }
    write_file_atomic(path, content);
}

std::vector<std::string> string_list(const json& j, const char* field) {
    std::vector<std::string> out;
    if (!j.contains(field) || j.at(field).is_null()) return out;
    const auto& v = j.at(field);
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
        return out;
    }
    if (!v.is_array()) throw FormatError(std::string("field '") + field + "' must be a string list");
    for (const auto& x : v) out.push_back(x.get<std::string>());
    return out;
}

}  // namespace kdcot::io
