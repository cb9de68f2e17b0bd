#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "json.hpp"

namespace eaco {

using json = nlohmann::json;

// Calls fn(line_number, line) for every non-blank line. Line numbers are
// 1-based. Throws IoError when the file cannot be opened.
void for_each_line(const std::filesystem::path& file,
                   const std::function<void(std::size_t, const std::string&)>& fn);
void for_each_line(std::istream& in,
                   const std::function<void(std::size_t, const std::string&)>& fn);

// Parses one JSONL line; throws SchemaError with the line number on bad JSON
// or when the line is not a JSON object.
json parse_object_line(std::size_t line_no, const std::string& line);

json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const json& value, int indent = 2);

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& file);
  explicit JsonlWriter(std::ostream& out) : out_(&out) {}
  void write(const json& value);
  std::size_t count() const { return count_; }

 private:
  std::ofstream owned_;
  std::ostream* out_ = nullptr;
  std::size_t count_ = 0;
};

// Rejects JSON objects carrying keys outside `allowed`; used for strict
// config and record schemas.
void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where);

std::uint64_t json_fingerprint(const json& value);

}  // namespace eaco
