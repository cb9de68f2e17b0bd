#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eaco/jsonl.hpp"
#include "eaco/tabular_policy.hpp"

namespace eaco {

// One synthetic image task: a reference description plus candidate responses
// ordered best to worst. The image locator doubles as the policy context id.
struct MockTaskEntry {
  std::string image;
  std::string reference;
  std::string split;  // "pref" or "sft"
  std::vector<std::string> candidates;

  void validate() const;
  static MockTaskEntry from_json(const json& j);
  json to_json() const;
  bool operator==(const MockTaskEntry&) const = default;
};

struct MockTask {
  std::vector<MockTaskEntry> entries;

  const MockTaskEntry* find(std::string_view image) const;
  const MockTaskEntry& require(std::string_view image) const;  // throws LookupError
  std::vector<std::string> images(std::string_view split = {}) const;
  bool operator==(const MockTask&) const = default;
};

MockTask load_mock_task(const std::filesystem::path& path);
void save_mock_task(const std::filesystem::path& path, const MockTask& task);

// Synthesizes a task whose candidate quality is known by construction: each
// entry's candidates keep a shrinking prefix of the reference tokens (plus
// digit-bearing filler the reference never contains), so rubric totals are
// strictly decreasing across candidates. Verified by assertion during
// generation.
MockTask generate_mock_task(std::size_t pref_images, std::size_t sft_images,
                            std::uint64_t seed);

// A uniform policy whose contexts are the task's images and whose candidate
// lists are the task's candidates.
TabularPolicy uniform_policy(const MockTask& task, LengthUnit unit);

}  // namespace eaco
