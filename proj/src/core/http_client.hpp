#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace protofsm::http {

struct RetryPolicy {
  int attempts = 5;
  double base_delay_s = 1.0;  // delay before retry k (1-based) is base * 2^(k-1)
};

struct PostRequest {
  std::string endpoint;  // e.g. "https://api.openai.com/v1"
  std::string path;      // appended to the endpoint path, e.g. "/embeddings"
  nlohmann::json body;
  std::vector<std::pair<std::string, std::string>> headers;
  double timeout_s = 60.0;
};

struct PostResult {
  nlohmann::json body;
  int attempts = 0;
};

// POSTs JSON and parses a JSON reply. Transport failures, 408, 429 and 5xx
// are retried with exponential backoff; other non-2xx statuses fail at once.
// Throws BackendError, or TimeoutError when the last attempt timed out.
PostResult post_json(const PostRequest& request, const RetryPolicy& retry);

// Reads the named environment variable; throws BackendError if unset/empty.
std::string require_credential(const std::string& env_var);

}  // namespace protofsm::http
