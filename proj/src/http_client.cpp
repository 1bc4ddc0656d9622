#include "httplib.h"

#include "lmr/agents.hpp"

namespace lmr::agents {

json post_json(const std::string& url, const json& body, double timeout_seconds, ErrorCode on_failure) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(on_failure, "bad url " + url);
    auto path_start = url.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client cli(base);
    auto secs = static_cast<time_t>(timeout_seconds);
    auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) throw Error(on_failure, url + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(on_failure, url + ": HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw Error(on_failure, url + ": malformed reply: " + e.what());
    }
}

}  // namespace lmr::agents
