#include <atomic>
#include <memory>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "chapterkit/classifier.hpp"
#include "chapterkit/errors.hpp"
#include "chapterkit/llm.hpp"

using namespace chapterkit;

namespace {

// In-process HTTP double; each test registers handlers then calls start().
class TestServer {
public:
    ~TestServer() { stop(); }

    httplib::Server& server() { return server_; }

    std::string start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return "http://127.0.0.1:" + std::to_string(port_);
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

class TableScorer : public ScorerBackend {
public:
    explicit TableScorer(std::vector<double> scores, std::string calibration = "sigmoid")
        : scores_(std::move(scores)), calibration_(std::move(calibration)) {}
    ScorerResponse score(const std::string&, const std::vector<std::string>&) override {
        return {scores_, calibration_};
    }

private:
    std::vector<double> scores_;
    std::string calibration_;
};

}  // namespace

TEST_CASE("remote_scores: uniform test double yields a valid score vector") {
    LabelSet ls({"a", "b", "c", "d"});
    TableScorer backend(std::vector<double>(4, 0.25), "sigmoid");
    auto sv = remote_scores(backend, "text", ls);
    CHECK(sv.scores.size() == 4);
    CHECK(sv.calibration == Calibration::kSigmoid);
}

TEST_CASE("remote_scores: wrong score count is a contract violation") {
    std::vector<std::string> names;
    for (int i = 0; i < 47; ++i) names.push_back("l" + std::to_string(i));
    LabelSet ls(names);
    TableScorer backend(std::vector<double>(46, 0.5));
    CHECK_THROWS_AS(remote_scores(backend, "text", ls), ContractError);
}

TEST_CASE("remote_scores: invalid calibration values are contract violations") {
    LabelSet ls({"a", "b"});
    TableScorer outside(std::vector<double>{1.5, 0.5}, "sigmoid");
    CHECK_THROWS_AS(remote_scores(outside, "t", ls), ContractError);
    TableScorer unknown(std::vector<double>{0.5, 0.5}, "bogus");
    CHECK_THROWS_AS(remote_scores(unknown, "t", ls), ContractError);
    TableScorer bad_softmax(std::vector<double>{0.9, 0.9}, "softmax");
    CHECK_THROWS_AS(remote_scores(bad_softmax, "t", ls), ContractError);
}

TEST_CASE("remote_scores: fixed-table backend drives argmax predictions") {
    LabelSet ls({"x", "y", "z"});
    TableScorer backend(std::vector<double>{0.2, 0.9, 0.4});
    auto pred = to_single(remote_scores(backend, "whatever", ls));
    CHECK(pred.label == "y");
    CHECK(pred.score == doctest::Approx(0.9));
}

TEST_CASE("HTTP scorer: wire contract over a live socket") {
    TestServer ts;
    ts.server().Post("/score", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.contains("text"));
        REQUIRE(body.contains("labels"));
        std::size_t n = body["labels"].size();
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = (i + 1.0) / (n + 1.0);
        }
        nlohmann::json out = {{"scores", scores}, {"calibration", "sigmoid"}};
        res.set_content(out.dump(), "application/json");
    });
    std::string base = ts.start();

    HttpScorerBackend backend({base + "/score", 5000, 2, ""});
    LabelSet ls({"a", "b", "c"});
    auto sv = remote_scores(backend, "hello", ls);
    REQUIRE(sv.scores.size() == 3);
    CHECK(sv.scores[2] == doctest::Approx(0.75));
    CHECK(to_single(sv).label == "c");
}

TEST_CASE("HTTP scorer: unreachable endpoint raises a retryable transport error") {
    HttpScorerBackend backend({"http://127.0.0.1:1/score", 200, 2, ""});
    LabelSet ls({"a"});
    CHECK_THROWS_AS(remote_scores(backend, "x", ls), TransportError);
}

TEST_CASE("HTTP generation: round trip, retry on 500, empty completion") {
    TestServer ts;
    std::atomic<int> calls{0};
    ts.server().Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.contains("prompt"));
        REQUIRE(body.contains("temperature"));
        REQUIRE(body.contains("max_new_tokens"));
        int n = ++calls;
        if (n == 1) {
            res.status = 500;  // first call fails, the client retries
            return;
        }
        nlohmann::json out = {{"text", "response #" + std::to_string(n)}};
        res.set_content(out.dump(), "application/json");
    });
    std::string base = ts.start();

    HttpGenerationBackend backend({base + "/generate", 5000, 3, ""});
    GenerationConfig cfg;
    cfg.repeats = 2;
    GenerationLog log;
    auto responses = generate(backend, "prompt text", cfg, &log);
    REQUIRE(responses.size() == 2);
    CHECK(responses[0] == "response #2");  // call 1 was the retried 500
    CHECK(responses[1] == "response #3");
    CHECK(log.size() == 2);
    CHECK(!log[0].timestamp.empty());
}

TEST_CASE("HTTP generation: 4xx is a contract error, not retried") {
    TestServer ts;
    std::atomic<int> calls{0};
    ts.server().Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 404;
    });
    std::string base = ts.start();
    HttpGenerationBackend backend({base + "/generate", 5000, 3, ""});
    CHECK_THROWS_AS(generate(backend, "p", GenerationConfig{}), ContractError);
    CHECK(calls.load() == 1);
}

TEST_CASE("HTTP embedding: single-text batch contract") {
    TestServer ts;
    ts.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.at("texts").size() == 1);
        nlohmann::json out = {{"vectors", {{0.6, 0.8, 0.0}}}};
        res.set_content(out.dump(), "application/json");
    });
    std::string base = ts.start();

    HttpEmbeddingProvider provider({base + "/embed", 5000, 2, ""});
    auto v = provider.embed("some text");
    CHECK(v.values == std::vector<double>{0.6, 0.8, 0.0});
    CHECK(v.provider_id.find("http:") == 0);
}

TEST_CASE("HTTP embedding: malformed payload is a contract error") {
    TestServer ts;
    ts.server().Post("/embed", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"wrong\": true}", "application/json");
    });
    std::string base = ts.start();
    HttpEmbeddingProvider provider({base + "/embed", 5000, 1, ""});
    CHECK_THROWS_AS(provider.embed("x"), ContractError);
}
