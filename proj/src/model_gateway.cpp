#include "eaco/model_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "httplib.h"

#include "eaco/errors.hpp"
#include "eaco/text.hpp"

namespace eaco {

void GenerationParams::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw ValidationError("temperature must be finite and >= 0");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
}

std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::http: return "http";
    case BackendKind::scripted_mock: return "scripted_mock";
    case BackendKind::rubric_mock: return "rubric_mock";
    case BackendKind::self: return "self";
  }
  return "scripted_mock";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "http") return BackendKind::http;
  if (s == "scripted_mock") return BackendKind::scripted_mock;
  if (s == "rubric_mock") return BackendKind::rubric_mock;
  if (s == "self") return BackendKind::self;
  throw SchemaError("unknown backend kind \"" + std::string(s) +
                    "\" (expected http, scripted_mock, rubric_mock, or self)");
}

std::string to_string(ImagePayloadMode m) {
  return m == ImagePayloadMode::url ? "url" : "base64";
}

ImagePayloadMode image_payload_mode_from_string(std::string_view s) {
  if (s == "url") return ImagePayloadMode::url;
  if (s == "base64") return ImagePayloadMode::base64;
  throw SchemaError("unknown image mode \"" + std::string(s) +
                    "\" (expected url or base64)");
}

void BackendDescriptor::validate() const {
  if (kind == BackendKind::http && endpoint.empty())
    throw SchemaError("http backend requires an endpoint");
  if (max_retries < 0) throw SchemaError("max_retries must be >= 0");
  if (!(timeout_seconds > 0.0)) throw SchemaError("timeout_seconds must be > 0");
  if (max_concurrency < 1) throw SchemaError("max_concurrency must be >= 1");
  if (model_name.empty()) throw SchemaError("model_name must be nonempty");
}

BackendDescriptor BackendDescriptor::from_json(const json& j) {
  require_keys(j,
               {"kind", "endpoint", "model_name", "auth_env", "timeout_seconds",
                "max_retries", "image_mode", "max_concurrency", "task_file"},
               "backend");
  BackendDescriptor d;
  if (!j.contains("kind")) throw SchemaError("backend: missing required field \"kind\"");
  d.kind = backend_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("endpoint")) d.endpoint = j.at("endpoint").get<std::string>();
  if (j.contains("model_name")) d.model_name = j.at("model_name").get<std::string>();
  if (j.contains("auth_env")) d.auth_env = j.at("auth_env").get<std::string>();
  if (j.contains("timeout_seconds")) d.timeout_seconds = j.at("timeout_seconds").get<double>();
  if (j.contains("max_retries")) d.max_retries = j.at("max_retries").get<int>();
  if (j.contains("image_mode"))
    d.image_mode = image_payload_mode_from_string(j.at("image_mode").get<std::string>());
  if (j.contains("max_concurrency")) d.max_concurrency = j.at("max_concurrency").get<int>();
  if (j.contains("task_file")) d.task_file = j.at("task_file").get<std::string>();
  d.validate();
  return d;
}

json BackendDescriptor::to_json() const {
  json j{{"kind", to_string(kind)},
         {"model_name", model_name},
         {"timeout_seconds", timeout_seconds},
         {"max_retries", max_retries},
         {"image_mode", to_string(image_mode)},
         {"max_concurrency", max_concurrency}};
  if (!endpoint.empty()) j["endpoint"] = endpoint;
  if (!auth_env.empty()) j["auth_env"] = auth_env;
  if (!task_file.empty()) j["task_file"] = task_file;
  return j;
}

namespace {

// Unique tokens in first-appearance order.
std::vector<std::string> unique_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& t : tokenize_words(text))
    if (seen.insert(t).second) out.push_back(std::move(t));
  return out;
}

int overlap_score(const std::vector<std::string>& subset,
                  const std::set<std::string>& candidate) {
  if (subset.empty()) return 1;
  std::size_t hit = 0;
  for (const auto& t : subset)
    if (candidate.count(t)) ++hit;
  double f = static_cast<double>(hit) / static_cast<double>(subset.size());
  return 1 + static_cast<int>(std::floor(4.0 * std::min(f, 1.0) + 0.5));
}

}  // namespace

CriticVerdict rubric_mock_score(const std::string& reference, const std::string& candidate) {
  if (trim(reference).empty())
    throw ValidationError("rubric_mock_score needs a nonempty reference");
  std::vector<std::string> ref = unique_tokens(reference);
  auto cand_list = tokenize_words(candidate);
  std::set<std::string> cand(cand_list.begin(), cand_list.end());

  auto by_length = [&](std::size_t min_len) {
    std::vector<std::string> out;
    for (const auto& t : ref)
      if (t.size() >= min_len) out.push_back(t);
    return out.empty() ? ref : out;
  };
  std::vector<std::string> first_half(ref.begin(), ref.begin() + (ref.size() + 1) / 2);
  std::vector<std::string> second_half(ref.begin() + (ref.size() + 1) / 2, ref.end());
  if (second_half.empty()) second_half = ref;

  std::array<int, 5> scores{};
  scores[0] = overlap_score(ref, cand);
  scores[1] = overlap_score(by_length(4), cand);
  scores[2] = overlap_score(first_half, cand);
  scores[3] = overlap_score(second_half, cand);
  scores[4] = overlap_score(by_length(6), cand);

  CriticVerdict v;
  v.rubric = VerdictRubric::rating_five;
  static const char* kKeys[] = {"relevance", "substantial_coverage", "basic_elements",
                                "clarity_organization", "high_quality"};
  int total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    v.criterion_scores.emplace_back(kKeys[i], scores[i]);
    total += scores[i];
  }
  v.total = v.reported_total = total;
  v.raw_text = render_rating_verdict(scores);
  return v;
}

std::string hashed_verdict_text(std::string_view image, std::string_view critic_prompt) {
  std::uint64_t h = fnv1a64(critic_prompt, fnv1a64(image));
  std::array<int, 5> scores{};
  for (std::size_t i = 0; i < 5; ++i)
    scores[i] = 1 + static_cast<int>((h >> (8 * i)) % 5);
  return render_rating_verdict(scores);
}

namespace {

std::string planted_candidate(const MockTask& task, const GenerationRequest& req) {
  const MockTaskEntry& entry = task.require(req.image);
  std::uint64_t seed =
      req.params.seed ? static_cast<std::uint64_t>(*req.params.seed) : 0ull;
  return entry.candidates[seed % entry.candidates.size()];
}

}  // namespace

void ScriptedBackend::add_response(std::string image, std::string prompt, std::string text) {
  responses_[{std::move(image), std::move(prompt)}] = std::move(text);
}

void ScriptedBackend::add_verdict(std::string image, std::string critic_prompt,
                                  std::string verdict) {
  verdicts_[{std::move(image), std::move(critic_prompt)}] = std::move(verdict);
}

std::string ScriptedBackend::generate(const GenerationRequest& req) {
  req.params.validate();
  auto it = responses_.find({req.image, req.prompt});
  if (it != responses_.end()) return it->second;
  if (!task_.entries.empty()) return planted_candidate(task_, req);
  throw LookupError("scripted backend \"" + name_ + "\" has no response for (" + req.image +
                    ", " + req.prompt + ")");
}

std::string ScriptedBackend::judge(const std::string& image, const std::string& critic_prompt) {
  auto it = verdicts_.find({image, critic_prompt});
  if (it != verdicts_.end()) return it->second;
  return hashed_verdict_text(image, critic_prompt);
}

std::string RubricBackend::generate(const GenerationRequest& req) {
  req.params.validate();
  return planted_candidate(task_, req);
}

std::string RubricBackend::judge(const std::string& image, const std::string& critic_prompt) {
  const MockTaskEntry& entry = task_.require(image);
  std::string candidate = extract_response_from_critic_prompt(critic_prompt);
  return rubric_mock_score(entry.reference, candidate).raw_text;
}

std::string PolicyBackend::generate(const GenerationRequest& req) {
  req.params.validate();
  std::size_t ctx = policy_->require_context(req.image);
  std::uint64_t seed =
      req.params.seed ? static_cast<std::uint64_t>(*req.params.seed) : 0ull;
  std::mt19937_64 rng(seed);
  return policy_->candidate(ctx, policy_->sample(ctx, rng)).text;
}

std::string PolicyBackend::judge(const std::string& image, const std::string& critic_prompt) {
  return hashed_verdict_text(image, critic_prompt);
}

namespace {

// Splits scheme://host[:port]/path into base and path.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw SchemaError("endpoint \"" + endpoint + "\" must start with http:// or https://");
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || (status >= 500 && status < 600);
}

}  // namespace

std::string extract_response_from_critic_prompt(const std::string& critic_prompt) {
  // The response sits between the response marker and the closing
  // instruction paragraph of the template.
  static const std::string kMarker = "Response: ";
  static const std::string kClose = "\nProvide a concise assessment";
  auto begin = critic_prompt.rfind("s Response: ");
  if (begin == std::string::npos) {
    begin = critic_prompt.find(kMarker);
    if (begin == std::string::npos) return trim(critic_prompt);
    begin += kMarker.size();
  } else {
    begin += std::string("s Response: ").size();
  }
  auto end = critic_prompt.find(kClose, begin);
  if (end == std::string::npos) end = critic_prompt.size();
  return trim(std::string_view(critic_prompt).substr(begin, end - begin));
}

HttpBackend::HttpBackend(BackendDescriptor desc) : desc_(std::move(desc)) {
  desc_.validate();
  auto [base, path] = split_endpoint(desc_.endpoint);
  base_ = base;
  path_ = path;
  if (!desc_.auth_env.empty()) {
    const char* value = std::getenv(desc_.auth_env.c_str());
    if (!value || !*value)
      throw SchemaError("auth environment variable \"" + desc_.auth_env + "\" is not set");
    token_ = value;
  }
}

std::string HttpBackend::id() const { return "http:" + desc_.model_name + "@" + base_; }

json HttpBackend::request_body(const GenerationRequest& req) const {
  req.params.validate();
  json image_part{{"type", "image_ref"}};
  if (desc_.image_mode == ImagePayloadMode::url) {
    image_part["url"] = req.image;
  } else {
    std::ifstream in(req.image, std::ios::binary);
    if (!in) throw IoError("cannot open image file " + req.image);
    std::ostringstream buf;
    buf << in.rdbuf();
    image_part["data"] = base64_encode(buf.str());
  }
  json body{{"model", desc_.model_name},
            {"messages", json::array({json{
                             {"role", "user"},
                             {"content", json::array({json{{"type", "text"},
                                                           {"text", req.prompt}},
                                                      std::move(image_part)})}}})},
            {"temperature", req.params.temperature},
            {"max_tokens", req.params.max_tokens}};
  if (req.params.seed) body["seed"] = *req.params.seed;
  return body;
}

std::string HttpBackend::post_chat(const json& body) {
  // The body is serialized once; every retry sends the identical payload.
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  const int attempts_allowed = 1 + desc_.max_retries;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    httplib::Client client(base_);
    client.set_connection_timeout(std::chrono::duration<double>(desc_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(desc_.timeout_seconds));
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "connection error (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      if (retryable_status(res->status)) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      throw BackendError("backend " + id() + " returned status " +
                             std::to_string(res->status),
                         res->status, false);
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content"))
      throw BackendError("backend " + id() + " returned an unparseable body", res->status,
                         false);
    return reply["choices"][0]["message"]["content"].get<std::string>();
  }
  throw TerminalBackendError("backend " + id() + " failed after " +
                                 std::to_string(attempts_allowed) + " attempts: " + last_error,
                             0, attempts_allowed);
}

std::string HttpBackend::generate(const GenerationRequest& req) {
  return post_chat(request_body(req));
}

std::string HttpBackend::judge(const std::string& image, const std::string& critic_prompt) {
  GenerationRequest req;
  req.image = image;
  req.prompt = critic_prompt;
  req.params.temperature = 0.0;
  req.params.max_tokens = 1024;
  return post_chat(request_body(req));
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  return make_backend(desc, nullptr);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc,
                                      std::shared_ptr<const TabularPolicy> policy) {
  desc.validate();
  switch (desc.kind) {
    case BackendKind::http:
      return std::make_unique<HttpBackend>(desc);
    case BackendKind::scripted_mock: {
      if (desc.task_file.empty())
        return std::make_unique<ScriptedBackend>(desc.model_name);
      return std::make_unique<ScriptedBackend>(desc.model_name,
                                               load_mock_task(desc.task_file));
    }
    case BackendKind::rubric_mock: {
      if (desc.task_file.empty())
        throw SchemaError("rubric_mock backend requires task_file");
      return std::make_unique<RubricBackend>(desc.model_name,
                                             load_mock_task(desc.task_file));
    }
    case BackendKind::self: {
      if (!policy) throw SchemaError("self backend requires a policy");
      return std::make_unique<PolicyBackend>(desc.model_name, std::move(policy));
    }
  }
  throw SchemaError("unhandled backend kind");
}

}  // namespace eaco
