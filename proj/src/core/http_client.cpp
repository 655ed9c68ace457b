#include <httplib.h>

#include "http_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "errors.hpp"

namespace protofsm::http {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read;
}

}  // namespace

PostResult post_json(const PostRequest& request, const RetryPolicy& retry) {
  const auto url = split_url(request.endpoint);
  const std::string path = url.path + request.path;
  const std::string payload = request.body.dump();

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  const int attempts = std::max(1, retry.attempts);
  std::string last_error;
  int last_status = 0;
  bool last_timed_out = false;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1 && retry.base_delay_s > 0) {
      const double delay = retry.base_delay_s * std::pow(2.0, attempt - 2);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(request.timeout_s);
    const auto usecs = static_cast<time_t>((request.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_timed_out = is_timeout(res.error());
      last_error = httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    last_timed_out = false;
    last_status = res->status;
    if (res->status >= 200 && res->status < 300) {
      try {
        return {nlohmann::json::parse(res->body), attempt};
      } catch (const nlohmann::json::parse_error&) {
        throw BackendError("backend returned malformed JSON from " + path, attempt, res->status);
      }
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable_status(res->status)) {
      throw BackendError("request to " + path + " failed: " + last_error, attempt, res->status);
    }
  }
  if (last_timed_out) throw TimeoutError("request to " + path + " timed out after " + std::to_string(attempts) + " attempts");
  throw BackendError("request to " + path + " failed after " + std::to_string(attempts) + " attempts: " + last_error,
                     attempts, last_status);
}

std::string require_credential(const std::string& env_var) {
  const char* value = std::getenv(env_var.c_str());
  if (value == nullptr || *value == '\0') {
    throw BackendError("credential environment variable " + env_var + " is not set");
  }
  return value;
}

}  // namespace protofsm::http
