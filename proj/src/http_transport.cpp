#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "matchbench/llm.hpp"

namespace matchbench {

HttpTransport make_http_transport(std::chrono::seconds timeout) {
  return [timeout](const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) -> HttpResponse {
    // Split "scheme://host[:port]/path" into the client origin and the path.
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers hdrs;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type")
        content_type = v;
      else
        hdrs.emplace(k, v);
    }
    auto res = client.Post(path, hdrs, body, content_type);
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  };
}

}  // namespace matchbench
