#include "eaco/jsonl.hpp"

#include <algorithm>

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

void for_each_line(const std::filesystem::path& file,
                   const std::function<void(std::size_t, const std::string&)>& fn) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  for_each_line(in, fn);
}

void for_each_line(std::istream& in,
                   const std::function<void(std::size_t, const std::string&)>& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    fn(line_no, line);
  }
}

json parse_object_line(std::size_t line_no, const std::string& line) {
  json value = json::parse(line, nullptr, false);
  if (value.is_discarded())
    throw SchemaError("line " + std::to_string(line_no) + ": invalid JSON");
  if (!value.is_object())
    throw SchemaError("line " + std::to_string(line_no) + ": expected a JSON object");
  return value;
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  json value = json::parse(in, nullptr, false);
  if (value.is_discarded()) throw SchemaError("invalid JSON in " + file.string());
  return value;
}

void write_json_file(const std::filesystem::path& file, const json& value, int indent) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << value.dump(indent) << '\n';
}

JsonlWriter::JsonlWriter(const std::filesystem::path& file) : owned_(file) {
  if (!owned_) throw IoError("cannot write " + file.string());
  out_ = &owned_;
}

void JsonlWriter::write(const json& value) {
  *out_ << value.dump() << '\n';
  ++count_;
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    bool ok = std::any_of(allowed.begin(), allowed.end(),
                          [&](const char* a) { return key == a; });
    if (!ok) throw SchemaError(where + ": unknown key \"" + key + "\"");
  }
}

std::uint64_t json_fingerprint(const json& value) { return fnv1a64(value.dump()); }

}  // namespace eaco
