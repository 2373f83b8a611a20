#include <httplib.h>

#include "nfkit/error.hpp"
#include "nfkit/inference.hpp"

namespace nfkit {

namespace {

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const ModelEndpoint& endpoint) {
    // Split "scheme://host[:port]/prefix" into the client origin and a path
    // prefix such as "/v1".
    const auto scheme_end = endpoint.base_url.find("://");
    const auto path_start = endpoint.base_url.find('/', scheme_end + 3);
    origin_ = endpoint.base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = endpoint.base_url.substr(path_start);
    client_ = std::make_unique<httplib::Client>(origin_);
    const auto secs = static_cast<time_t>(endpoint.timeout_s);
    const auto usecs =
        static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
    client_->set_connection_timeout(secs, usecs);
    client_->set_read_timeout(secs, usecs);
    client_->set_write_timeout(secs, usecs);
    client_->set_keep_alive(true);
  }

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override {
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    auto res = client_->Post(prefix_ + path, h, body, content_type);
    if (!res) {
      throw TransportError(origin_ + ": " + httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const ModelEndpoint& endpoint) {
  endpoint.validate();
  return std::make_unique<HttpTransport>(endpoint);
}

}  // namespace nfkit
