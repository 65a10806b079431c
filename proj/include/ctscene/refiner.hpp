#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace ctscene {

// One round of the program-refinement dialogue: the serialized layout program
// plus the violations found in it, answered by a corrected program.
struct RefinerRequest {
    std::string program;        // layout document, JSON text
    nlohmann::json violations;  // ViolationReport::to_json()
    int round = 1;
    std::string instructions;

    nlohmann::json to_json() const;
    static RefinerRequest from_json(const nlohmann::json& j);
};

struct RefinerResponse {
    std::string program;
    std::string rationale;  // free text, ignored by the machine path

    nlohmann::json to_json() const;
    static RefinerResponse from_json(const nlohmann::json& j);
};

inline constexpr const char* kDefaultInstructions =
    "You are given a JSON room-layout program and a list of violations "
    "(overlapping boxes, boxes outside their room). Return a corrected program "
    "with the same schema that removes the violations while moving boxes as "
    "little as possible.";

class Refiner {
  public:
    virtual ~Refiner() = default;
    virtual RefinerResponse refine(const RefinerRequest& req) = 0;
};

struct RefinerUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RefinerBadOutput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RefinerEndpoint {
    std::string url;        // e.g. http://127.0.0.1:8080/refine
    std::string token_env;  // env var holding the bearer token, optional
    double timeout_s = 30.0;
    int max_retries = 3;
    double backoff_s = 0.5;  // doubles per retry
};

// Single request/response exchange; the response program is syntactically
// validated before being returned.
RefinerResponse refine_remote(const RefinerRequest& req, const RefinerEndpoint& endpoint);

// Deterministic fallback: minimal-translation separation of the worst
// violating pair, computed locally.  Pure function of the request.
RefinerResponse refine_local(const RefinerRequest& req);

class HttpRefiner : public Refiner {
  public:
    explicit HttpRefiner(RefinerEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    RefinerResponse refine(const RefinerRequest& req) override {
        return refine_remote(req, endpoint_);
    }

  private:
    RefinerEndpoint endpoint_;
};

class LocalRefiner : public Refiner {
  public:
    RefinerResponse refine(const RefinerRequest& req) override { return refine_local(req); }
};

}  // namespace ctscene
