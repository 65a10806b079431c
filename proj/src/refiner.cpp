#include "ctscene/refiner.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

// Eigen must come in ahead of httplib's system headers
#include "ctscene/layout.hpp"

#include <httplib.h>

namespace ctscene {

nlohmann::json RefinerRequest::to_json() const {
    return {
        {"v", 1},
        {"round", round},
        {"instructions", instructions},
        {"program", program},
        {"violations", violations},
    };
}

RefinerRequest RefinerRequest::from_json(const nlohmann::json& j) {
    RefinerRequest req;
    req.program = j.at("program").get<std::string>();
    req.violations = j.value("violations", nlohmann::json::array());
    req.round = j.value("round", 1);
    req.instructions = j.value("instructions", std::string());
    if (req.round < 1) {
        throw std::invalid_argument("refiner request: round must be >= 1");
    }
    return req;
}

nlohmann::json RefinerResponse::to_json() const {
    return {{"v", 1}, {"program", program}, {"rationale", rationale}};
}

RefinerResponse RefinerResponse::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("program") || !j["program"].is_string()) {
        throw RefinerBadOutput("refiner response: missing program field");
    }
    RefinerResponse resp;
    resp.program = j["program"].get<std::string>();
    resp.rationale = j.value("rationale", std::string());
    return resp;
}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host:port
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("refiner endpoint: url must carry a scheme");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

RefinerResponse refine_remote(const RefinerRequest& req, const RefinerEndpoint& endpoint) {
    if (endpoint.url.empty()) {
        throw std::invalid_argument("refiner endpoint: url not configured");
    }
    if (!(endpoint.timeout_s > 0.0)) {
        throw std::invalid_argument("refiner endpoint: timeout must be positive");
    }
    SplitUrl url = split_url(endpoint.url);

    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    httplib::Headers headers;
    if (!endpoint.token_env.empty()) {
        if (const char* token = std::getenv(endpoint.token_env.c_str()); token && *token) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    std::string body = req.to_json().dump();
    double backoff = endpoint.backoff_s;
    std::string last_error;
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
        auto res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded()) {
            throw RefinerBadOutput("refiner response: body is not JSON");
        }
        RefinerResponse resp = RefinerResponse::from_json(j);
        // syntactic validation before the caller ever sees the program
        try {
            parse_layout(resp.program);
        } catch (const ParseError& e) {
            throw RefinerBadOutput(std::string("refiner response: program rejected: ") + e.what());
        }
        return resp;
    }
    throw RefinerUnavailable("refiner endpoint unreachable after " +
                             std::to_string(endpoint.max_retries + 1) + " attempts: " + last_error);
}

RefinerResponse refine_local(const RefinerRequest& req) {
    HouseLayout h = parse_layout(req.program);
    HouseLayout refined = deterministic_refine_step(h);
    RefinerResponse resp;
    resp.program = serialize_layout(refined).dump();
    resp.rationale = "minimal-translation separation of the worst violating pair";
    return resp;
}

}  // namespace ctscene
