#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace protrl::http {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Response {
  int status = 0;  // 0: no HTTP response (connect/read failure)
  std::string body;
  std::string error;

  bool ok() const noexcept { return status >= 200 && status < 300; }
};

Response get(const std::string& url, const Headers& headers = {}, double timeout_s = 30);
Response post(const std::string& url, const std::string& body, const std::string& content_type,
              const Headers& headers = {}, double timeout_s = 30);

std::string url_encode(std::string_view s);

/// "https://host:8080/a/b?x=1" -> {"https://host:8080", "/a/b?x=1"}
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace protrl::http
