#include "http_util.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"

#include "chapterkit/errors.hpp"

namespace chapterkit::detail {

ParsedUrl parse_url(const std::string& url) {
    std::string rest = url;
    std::string scheme = "http://";
    if (rest.rfind("http://", 0) == 0) {
        rest = rest.substr(7);
    } else if (rest.rfind("https://", 0) == 0) {
        scheme = "https://";
        rest = rest.substr(8);
    } else {
        throw ConfigError("endpoint \"" + url + "\" must start with http:// or https://");
    }
    std::size_t slash = rest.find('/');
    ParsedUrl out;
    out.base = scheme + (slash == std::string::npos ? rest : rest.substr(0, slash));
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    if (out.base == scheme) throw ConfigError("endpoint \"" + url + "\" has no host");
    return out;
}

nlohmann::json post_json(const EndpointConfig& endpoint, const nlohmann::json& body) {
    ParsedUrl url = parse_url(endpoint.url);
    std::string payload = body.dump();

    httplib::Client client(url.base);
    client.set_connection_timeout(0, endpoint.timeout_ms * 1000LL);
    client.set_read_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!endpoint.bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + endpoint.bearer_token);
    }

    int attempts = std::max(1, endpoint.max_retries);
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error (" + httplib::to_string(res.error()) + ")";
        } else if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
        } else if (res->status >= 400) {
            throw ContractError("endpoint " + endpoint.url + " returned status " +
                                std::to_string(res->status));
        } else {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ContractError("endpoint " + endpoint.url + " returned non-JSON body: " +
                                    e.what());
            }
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(10 * attempt));
        }
    }
    throw TransportError("endpoint " + endpoint.url + " failed after " +
                         std::to_string(attempts) + " attempt(s): " + last_error);
}

}  // namespace chapterkit::detail
