#include <doctest.h>

#include <thread>

#include "ctscene/layout.hpp"
#include "ctscene/refiner.hpp"
#include "test_helpers.hpp"

#include <httplib.h>

using namespace ctscene;
using namespace ctscene::testing;

namespace {

struct TestServer {
    httplib::Server svr;
    std::thread worker;
    int port = 0;

    explicit TestServer(httplib::Server::Handler handler) {
        svr.Post("/refine", std::move(handler));
        port = svr.bind_to_any_port("127.0.0.1");
        worker = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }

    ~TestServer() {
        svr.stop();
        worker.join();
    }

    RefinerEndpoint endpoint() const {
        RefinerEndpoint ep;
        ep.url = "http://127.0.0.1:" + std::to_string(port) + "/refine";
        ep.timeout_s = 5.0;
        ep.max_retries = 1;
        ep.backoff_s = 0.001;
        return ep;
    }
};

RefinerRequest request_for(const HouseLayout& h, int round = 1) {
    RefinerRequest req;
    req.program = serialize_layout(h).dump();
    req.violations = validate(h).to_json();
    req.round = round;
    req.instructions = kDefaultInstructions;
    return req;
}

}  // namespace

TEST_CASE("refine_local") {
    SUBCASE("clean program is returned unchanged") {
        auto h = random_layout(3, 4, 4, 0);
        while (!validate(h).empty()) h = deterministic_refine_step(h);
        auto resp = refine_local(request_for(h));
        CHECK(parse_layout(resp.program) == h);
    }

    SUBCASE("one overlapping pair: exactly one box moves") {
        auto h = random_layout(11, 6, 6, 0);
        while (!validate(h).empty()) h = deterministic_refine_step(h);
        // collide box00 into box01
        auto& boxes = h.rooms[0].boxes;
        boxes[0].p.x() = boxes[1].p.x();
        boxes[0].p.y() = boxes[1].p.y();
        REQUIRE_FALSE(validate(h).empty());

        auto resp = refine_local(request_for(h));
        auto refined = parse_layout(resp.program);
        int moved = 0;
        for (size_t i = 0; i < boxes.size(); ++i) {
            if (!(refined.rooms[0].boxes[i].p == boxes[i].p)) ++moved;
        }
        CHECK(moved == 1);
    }

    SUBCASE("deterministic across calls") {
        auto h = random_layout(17);
        auto a = refine_local(request_for(h));
        auto b = refine_local(request_for(h));
        CHECK(a.program == b.program);
    }

    SUBCASE("100 seeded layouts all converge within 20 rounds") {
        for (uint64_t seed = 100; seed < 200; ++seed) {
            auto h = random_layout(seed);
            LocalRefiner local;
            auto out = refine_loop(h, local, 20);
            CHECK(out.report.empty());
        }
    }
}

TEST_CASE("refine_remote") {
    auto layout = random_layout(23);

    SUBCASE("echo endpoint returns the request program") {
        TestServer server([](const httplib::Request& req, httplib::Response& res) {
            auto j = nlohmann::json::parse(req.body);
            nlohmann::json out{{"v", 1}, {"program", j.at("program")}, {"rationale", "echo"}};
            res.set_content(out.dump(), "application/json");
        });
        auto req = request_for(layout);
        auto resp = refine_remote(req, server.endpoint());
        CHECK(resp.program == req.program);
    }

    SUBCASE("endpoint down raises RefinerUnavailable after the retry budget") {
        RefinerEndpoint ep;
        ep.url = "http://127.0.0.1:9/refine";  // discard port, nothing listens
        ep.timeout_s = 0.2;
        ep.max_retries = 2;
        ep.backoff_s = 0.001;
        CHECK_THROWS_AS(refine_remote(request_for(layout), ep), RefinerUnavailable);
    }

    SUBCASE("unparsable program raises RefinerBadOutput") {
        TestServer server([](const httplib::Request&, httplib::Response& res) {
            nlohmann::json out{{"v", 1}, {"program", "{broken"}, {"rationale", ""}};
            res.set_content(out.dump(), "application/json");
        });
        CHECK_THROWS_AS(refine_remote(request_for(layout), server.endpoint()), RefinerBadOutput);
    }

    SUBCASE("missing program field raises RefinerBadOutput") {
        TestServer server([](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"v\":1}", "application/json");
        });
        CHECK_THROWS_AS(refine_remote(request_for(layout), server.endpoint()), RefinerBadOutput);
    }

    SUBCASE("bearer token attached from the environment") {
        std::string seen;
        TestServer server([&seen](const httplib::Request& req, httplib::Response& res) {
            if (req.has_header("Authorization")) seen = req.get_header_value("Authorization");
            auto j = nlohmann::json::parse(req.body);
            nlohmann::json out{{"v", 1}, {"program", j.at("program")}, {"rationale", ""}};
            res.set_content(out.dump(), "application/json");
        });
        setenv("CTSCENE_TEST_TOKEN", "sesame", 1);
        auto ep = server.endpoint();
        ep.token_env = "CTSCENE_TEST_TOKEN";
        refine_remote(request_for(layout), ep);
        CHECK(seen == "Bearer sesame");
        unsetenv("CTSCENE_TEST_TOKEN");
    }

    SUBCASE("remote endpoint running the local rule matches the local loop") {
        TestServer server([](const httplib::Request& req, httplib::Response& res) {
            auto request = RefinerRequest::from_json(nlohmann::json::parse(req.body));
            res.set_content(refine_local(request).to_json().dump(), "application/json");
        });
        HttpRefiner remote(server.endpoint());
        LocalRefiner local;
        auto via_remote = refine_loop(layout, remote, 20);
        auto via_local = refine_loop(layout, local, 20);
        CHECK(via_remote.layout == via_local.layout);
        CHECK(via_remote.iterations == via_local.iterations);
        CHECK(via_remote.report.empty() == via_local.report.empty());
    }
}
