#pragma once

// Internal helper shared by the HTTP-backed scorer, generation and embedding
// clients. Not installed.

#include <string>

#include "json.hpp"

#include "chapterkit/classifier.hpp"

namespace chapterkit::detail {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // leading '/'
};

ParsedUrl parse_url(const std::string& url);

// POST with bounded retries on transport failure and 5xx. Throws
// TransportError when retries are exhausted, ContractError on 4xx or a
// non-JSON body.
nlohmann::json post_json(const EndpointConfig& endpoint, const nlohmann::json& body);

}  // namespace chapterkit::detail
