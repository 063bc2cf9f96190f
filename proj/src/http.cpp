#include "protrl/http.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>

#ifdef PROTRL_WITH_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace protrl::http {

namespace {

void configure(httplib::Client& cli, double timeout_s) {
  const auto usec = static_cast<long>(timeout_s * 1e6);
  const auto sec = static_cast<time_t>(usec / 1000000);
  const auto rem = static_cast<time_t>(usec % 1000000);
  cli.set_connection_timeout(sec, rem);
  cli.set_read_timeout(sec, rem);
  cli.set_write_timeout(sec, rem);
  cli.set_follow_location(true);
}

httplib::Headers to_headers(const Headers& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  return out;
}

Response convert(const httplib::Result& res) {
  Response out;
  if (!res) {
    out.error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

}  // namespace

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

Response get(const std::string& url, const Headers& headers, double timeout_s) {
  auto [base, path] = split_url(url);
  try {
    httplib::Client cli(base);
    configure(cli, timeout_s);
    return convert(cli.Get(path, to_headers(headers)));
  } catch (const std::exception& e) {
    return Response{0, {}, e.what()};
  }
}

Response post(const std::string& url, const std::string& body, const std::string& content_type,
              const Headers& headers, double timeout_s) {
  auto [base, path] = split_url(url);
  try {
    httplib::Client cli(base);
    configure(cli, timeout_s);
    return convert(cli.Post(path, to_headers(headers), body, content_type));
  } catch (const std::exception& e) {
    return Response{0, {}, e.what()};
  }
}

std::string url_encode(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

}  // namespace protrl::http
