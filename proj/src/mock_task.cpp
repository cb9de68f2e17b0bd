#include "eaco/mock_task.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "eaco/errors.hpp"
#include "eaco/model_gateway.hpp"
#include "eaco/text.hpp"

namespace eaco {

void MockTaskEntry::validate() const {
  if (image.empty()) throw SchemaError("mock task entry needs an image locator");
  if (reference.empty()) throw SchemaError("mock task entry needs a reference text");
  if (split != "pref" && split != "sft")
    throw SchemaError("mock task split must be \"pref\" or \"sft\", got \"" + split + "\"");
  if (candidates.size() < 2)
    throw SchemaError("mock task entry \"" + image + "\" needs at least 2 candidates");
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (c.empty())
      throw SchemaError("mock task entry \"" + image + "\" has an empty candidate");
    if (!seen.insert(c).second)
      throw SchemaError("mock task entry \"" + image + "\" has duplicate candidates");
  }
}

MockTaskEntry MockTaskEntry::from_json(const json& j) {
  require_keys(j, {"image", "reference", "split", "candidates"}, "mock task entry");
  MockTaskEntry e;
  e.image = j.at("image").get<std::string>();
  e.reference = j.at("reference").get<std::string>();
  e.split = j.at("split").get<std::string>();
  for (const auto& c : j.at("candidates")) e.candidates.push_back(c.get<std::string>());
  e.validate();
  return e;
}

json MockTaskEntry::to_json() const {
  return json{{"image", image},
              {"reference", reference},
              {"split", split},
              {"candidates", candidates}};
}

const MockTaskEntry* MockTask::find(std::string_view image) const {
  for (const auto& e : entries)
    if (e.image == image) return &e;
  return nullptr;
}

const MockTaskEntry& MockTask::require(std::string_view image) const {
  const MockTaskEntry* e = find(image);
  if (!e) throw LookupError("mock task has no entry for image \"" + std::string(image) + "\"");
  return *e;
}

std::vector<std::string> MockTask::images(std::string_view split) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (split.empty() || e.split == split) out.push_back(e.image);
  return out;
}

MockTask load_mock_task(const std::filesystem::path& path) {
  MockTask task;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    try {
      task.entries.push_back(MockTaskEntry::from_json(parse_object_line(line_no, line)));
    } catch (const SchemaError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) != 0) msg = "line " + std::to_string(line_no) + ": " + msg;
      throw SchemaError(path.string() + " " + msg);
    }
  });
  std::set<std::string> ids;
  for (const auto& e : task.entries)
    if (!ids.insert(e.image).second)
      throw SchemaError(path.string() + ": duplicate image \"" + e.image + "\"");
  return task;
}

void save_mock_task(const std::filesystem::path& path, const MockTask& task) {
  JsonlWriter out(path);
  for (const auto& e : task.entries) {
    e.validate();
    out.write(e.to_json());
  }
}

namespace {

constexpr std::size_t kReferenceTokens = 12;
// Candidate j keeps the first kPrefix[j] reference tokens; the rest is
// digit-bearing filler that shares no token with any reference.
constexpr std::size_t kPrefix[] = {12, 8, 5, 1};

std::string random_alpha_token(std::mt19937_64& rng, std::size_t length) {
  std::string t;
  for (std::size_t i = 0; i < length; ++i)
    t += static_cast<char>('a' + static_cast<std::size_t>(rng() % 26));
  return t;
}

MockTaskEntry make_entry(const std::string& image, const std::string& split,
                         std::mt19937_64& rng) {
  // Token lengths cycle 3/5/7 so the length-based rubric subsets always
  // contain the same positions regardless of the drawn letters.
  std::vector<std::string> tokens;
  std::set<std::string> seen;
  while (tokens.size() < kReferenceTokens) {
    std::size_t len = 3 + 2 * (tokens.size() % 3);
    std::string t = random_alpha_token(rng, len);
    if (seen.insert(t).second) tokens.push_back(t);
  }

  MockTaskEntry entry;
  entry.image = image;
  entry.split = split;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) entry.reference += ' ';
    entry.reference += tokens[i];
  }

  for (std::size_t j = 0; j < std::size(kPrefix); ++j) {
    std::string text;
    for (std::size_t i = 0; i < kPrefix[j]; ++i) {
      if (i) text += ' ';
      text += tokens[i];
    }
    for (std::size_t i = kPrefix[j]; i < kReferenceTokens; ++i) {
      if (!text.empty()) text += ' ';
      text += "pad" + std::to_string(j) + std::to_string(i) + random_alpha_token(rng, 3);
    }
    entry.candidates.push_back(text);
  }
  entry.validate();

  // Planted ordering guard: rubric totals must strictly decrease.
  int prev = 26;
  for (const auto& c : entry.candidates) {
    int total = rubric_mock_score(entry.reference, c).total;
    if (total >= prev)
      throw Error("mock task construction broke the quality ordering for " + image);
    prev = total;
  }
  return entry;
}

}  // namespace

MockTask generate_mock_task(std::size_t pref_images, std::size_t sft_images,
                            std::uint64_t seed) {
  MockTask task;
  std::size_t index = 0;
  char name[64];
  for (std::size_t i = 0; i < pref_images; ++i, ++index) {
    std::snprintf(name, sizeof name, "images/pref_%04zu.png", i);
    std::mt19937_64 rng(mix64(seed, index));
    task.entries.push_back(make_entry(name, "pref", rng));
  }
  for (std::size_t i = 0; i < sft_images; ++i, ++index) {
    std::snprintf(name, sizeof name, "images/sft_%04zu.png", i);
    std::mt19937_64 rng(mix64(seed, index));
    task.entries.push_back(make_entry(name, "sft", rng));
  }
  return task;
}

TabularPolicy uniform_policy(const MockTask& task, LengthUnit unit) {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> cands;
  for (const auto& e : task.entries) {
    ids.push_back(e.image);
    cands.push_back(e.candidates);
  }
  return TabularPolicy::uniform(std::move(ids), std::move(cands), unit);
}

}  // namespace eaco
