#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "eaco/jsonl.hpp"
#include "eaco/mock_task.hpp"
#include "eaco/prompt_kit.hpp"
#include "eaco/tabular_policy.hpp"

namespace eaco {

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;

  void validate() const;  // temperature >= 0, max_tokens >= 1
};

struct GenerationRequest {
  std::string image;
  std::string prompt;
  GenerationParams params;
};

enum class BackendKind { http, scripted_mock, rubric_mock, self };
std::string to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view s);

// How the HTTP client ships the image: pass the locator through as a URL, or
// read the local file and embed it base64-encoded.
enum class ImagePayloadMode { url, base64 };
std::string to_string(ImagePayloadMode m);
ImagePayloadMode image_payload_mode_from_string(std::string_view s);

struct BackendDescriptor {
  BackendKind kind = BackendKind::scripted_mock;
  std::string endpoint;    // required for http
  std::string model_name = "mock";
  std::string auth_env;    // name of the env var holding the token; never the token
  double timeout_seconds = 30.0;
  int max_retries = 2;
  ImagePayloadMode image_mode = ImagePayloadMode::url;
  int max_concurrency = 4;
  std::string task_file;   // mock task for scripted/rubric kinds

  void validate() const;
  static BackendDescriptor from_json(const json& j);
  json to_json() const;
};

// Uniform surface over generators and judges. Implementations are safe for
// concurrent calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  // Returns response text. Deterministic backends reproduce outputs for a
  // fixed seed.
  virtual std::string generate(const GenerationRequest& req) = 0;
  // Returns raw verdict text; parsing is the caller's job.
  virtual std::string judge(const std::string& image, const std::string& critic_prompt) = 0;
};

// Deterministic judge stand-in: five 1-to-5 criterion scores from token
// overlap between candidate and criterion-specific reference token subsets
// (all tokens / length>=4 / first half / second half / length>=6; an empty
// subset falls back to all tokens). Overlap fraction f maps to
// 1 + floor(4*min(f,1) + 0.5). Set-based, so candidate token order and
// repetition never matter; monotone in overlap.
CriticVerdict rubric_mock_score(const std::string& reference, const std::string& candidate);

// Uninformative but deterministic verdict used where a backend must judge
// without a rubric: five scores hashed from (image, critic prompt).
std::string hashed_verdict_text(std::string_view image, std::string_view critic_prompt);

// Table-driven mock. generate() answers from the exact (image, prompt) table
// first, then from the planted task (candidate index = seed mod candidate
// count); judge() answers from the verdict table, else hashed_verdict_text.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::string name) : name_(std::move(name)) {}
  ScriptedBackend(std::string name, MockTask task)
      : name_(std::move(name)), task_(std::move(task)) {}

  void add_response(std::string image, std::string prompt, std::string text);
  void add_verdict(std::string image, std::string critic_prompt, std::string verdict);

  std::string id() const override { return "scripted:" + name_; }
  std::string generate(const GenerationRequest& req) override;
  std::string judge(const std::string& image, const std::string& critic_prompt) override;

 private:
  std::string name_;
  MockTask task_;
  std::map<std::pair<std::string, std::string>, std::string> responses_;
  std::map<std::pair<std::string, std::string>, std::string> verdicts_;
};

// Task-backed mock: generates planted candidates and judges against the
// entry's reference with rubric_mock_score.
class RubricBackend : public Backend {
 public:
  RubricBackend(std::string name, MockTask task)
      : name_(std::move(name)), task_(std::move(task)) {}

  std::string id() const override { return "rubric:" + name_; }
  std::string generate(const GenerationRequest& req) override;
  std::string judge(const std::string& image, const std::string& critic_prompt) override;

 private:
  std::string name_;
  MockTask task_;
};

// The policy itself as a generator: samples a candidate from the context row
// matching the image, seeded by the request. Judges with hashed verdicts
// (it has no rubric), which is what judging yourself without a critic buys.
class PolicyBackend : public Backend {
 public:
  PolicyBackend(std::string name, std::shared_ptr<const TabularPolicy> policy)
      : name_(std::move(name)), policy_(std::move(policy)) {}

  std::string id() const override { return "self:" + name_; }
  std::string generate(const GenerationRequest& req) override;
  std::string judge(const std::string& image, const std::string& critic_prompt) override;

 private:
  std::string name_;
  std::shared_ptr<const TabularPolicy> policy_;
};

// Chat-completions-shaped HTTP client. Retries connect errors, timeouts, and
// 408/429/5xx up to 1 + max_retries attempts with an unchanged body; other
// non-success statuses fail immediately.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor desc);

  std::string id() const override;
  std::string generate(const GenerationRequest& req) override;
  std::string judge(const std::string& image, const std::string& critic_prompt) override;

  // The exact request body that generate() would POST; exposed so tests can
  // pin the wire format.
  json request_body(const GenerationRequest& req) const;

 private:
  std::string post_chat(const json& body);

  BackendDescriptor desc_;
  std::string base_;   // scheme://host:port
  std::string path_;   // /v1/...
  std::string token_;  // resolved from auth_env at construction
};

// Extracts the candidate response embedded in a rendered critic prompt
// (the text after the response marker, before the closing instruction).
std::string extract_response_from_critic_prompt(const std::string& critic_prompt);

// Builds a backend from its descriptor. The self kind needs the live policy.
std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc);
std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc,
                                      std::shared_ptr<const TabularPolicy> policy);

}  // namespace eaco
