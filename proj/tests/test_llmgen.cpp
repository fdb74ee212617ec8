#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include "assocnet/cli.hpp"
#include "assocnet/llmgen.hpp"
#include "helpers.hpp"

#include <httplib.h>

using namespace assocnet;
using namespace assocnet::llm;
using testutil::TempDir;

namespace {

// Virtual time; sleeping just advances it.
struct FakeClock final : Clock {
    std::chrono::steady_clock::time_point t =
        std::chrono::steady_clock::time_point{} + std::chrono::hours(1);
    std::mutex mu;
    std::chrono::steady_clock::time_point now() override {
        std::lock_guard<std::mutex> lock(mu);
        return t;
    }
    void sleep_until(std::chrono::steady_clock::time_point tp) override {
        std::lock_guard<std::mutex> lock(mu);
        if (tp > t) t = tp;
    }
};

class MockServer {
public:
    explicit MockServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

std::string completion_body(const std::string& content) {
    nlohmann::json j = {{"choices", {{{"message", {{"content", content}}}}}}};
    return j.dump();
}

GenConfig test_config(const std::string& endpoint, int repetitions) {
    GenConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model = "test-model";
    cfg.prompt_template = "CUE={cue}";
    cfg.repetitions = repetitions;
    cfg.retry.max_attempts = 3;
    cfg.retry.initial_backoff = std::chrono::milliseconds(1);
    cfg.max_in_flight = 2;
    return cfg;
}

std::string cue_from_request(const httplib::Request& req) {
    auto body = nlohmann::json::parse(req.body);
    const std::string content = body.at("messages").at(0).at("content");
    REQUIRE(content.rfind("CUE=", 0) == 0);
    return content.substr(4);
}

}  // namespace

TEST_CASE("parse_association_response handles real-world shapes") {
    using V = std::vector<std::string>;
    CHECK(parse_association_response("banana, fruit, orange") ==
          V{"banana", "fruit", "orange"});
    CHECK(parse_association_response("banana\nfruit\norange") ==
          V{"banana", "fruit", "orange"});
    CHECK(parse_association_response("1. banana\n2. fruit\n3. orange") ==
          V{"banana", "fruit", "orange"});
    CHECK(parse_association_response("1) red, 2) green, 3) blue") ==
          V{"red", "green", "blue"});
    CHECK(parse_association_response("- dog\n- cat") == V{"dog", "cat"});
    CHECK(parse_association_response("\"quoted\", 'single', plain") ==
          V{"quoted", "single", "plain"});
    CHECK(parse_association_response("a, b, c, d, e") == V{"a", "b", "c"});  // first 3 kept
    CHECK(parse_association_response("") == V{});
    CHECK(parse_association_response("  ,  ,\n") == V{});
    CHECK(parse_association_response("ice cream, hot dog") == V{"ice cream", "hot dog"});
}

TEST_CASE("GenConfig validation") {
    GenConfig cfg = test_config("http://x/v1/chat/completions", 100);
    CHECK_NOTHROW(cfg.validate());

    SECTION("template must contain {cue} exactly once") {
        cfg.prompt_template = "no placeholder";
        CHECK_THROWS_AS(cfg.validate(), Error);
        cfg.prompt_template = "{cue} and {cue}";
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
    SECTION("repetitions >= 1") {
        cfg.repetitions = 0;
        CHECK_THROWS_AS(cfg.validate(), Error);
    }
    SECTION("from_json round trip") {
        nlohmann::json j = {{"endpoint", "http://h/v1/chat/completions"},
                            {"model", "m"},
                            {"repetitions", 7},
                            {"temperature", 0.4},
                            {"rate_limit", 12.5}};
        GenConfig parsed = GenConfig::from_json(j);
        CHECK(parsed.repetitions == 7);
        CHECK(parsed.temperature == 0.4);
        CHECK(parsed.rate_limit == 12.5);
    }
}

TEST_CASE("generate produces a rectangular table from parsed completions") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        res.set_content(completion_body(cue_from_request(req) + "-a, b, c"), "application/json");
    });
    TempDir dir;
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 3);
    GenerationResult result = generate({"apple", "tree"}, cfg, dir / "log.jsonl", &clock);

    CHECK(hits == 6);
    CHECK(result.requests_issued == 6);
    CHECK(result.failed_slots == 0);
    REQUIRE(result.table.rows.size() == 6);  // 2 cues x 3 reps, sorted by cue
    CHECK(result.table.rows[0].cue == "apple");
    CHECK(result.table.rows[0].responses ==
          std::array<std::string, 3>{"apple-a", "b", "c"});
    CHECK(result.table.rows[3].cue == "tree");
    CHECK(result.table.balanced() == false);  // 3 reps, not the canonical 100
    for (const auto& [cue, rows] : result.table.cue_index) CHECK(rows.size() == 3);
}

TEST_CASE("fewer than three parsed responses leave blanks") {
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content(completion_body("lonely"), "application/json");
    });
    TempDir dir;
    FakeClock clock;
    GenerationResult result = generate({"cue"}, test_config(server.endpoint(), 1),
                                       dir / "log.jsonl", &clock);
    CHECK(result.table.rows[0].responses == std::array<std::string, 3>{"lonely", "", ""});
}

TEST_CASE("transient failures retry with backoff and then succeed") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        if (hits.fetch_add(1) < 2) {
            res.status = 500;
            return;
        }
        res.set_content(completion_body(cue_from_request(req) + ", x, y"), "application/json");
    });
    TempDir dir;
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 1);
    cfg.max_in_flight = 1;
    GenerationResult result = generate({"apple"}, cfg, dir / "log.jsonl", &clock);
    CHECK(hits == 3);  // two failures, one success
    CHECK(result.failed_slots == 0);
    CHECK(result.table.rows[0].responses[0] == "apple");
}

TEST_CASE("exhausted retries yield an all-blank row and a failed log entry") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    TempDir dir;
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 2);
    GenerationResult result = generate({"apple"}, cfg, dir / "log.jsonl", &clock);
    CHECK(hits == 6);  // 2 slots x 3 attempts
    CHECK(result.failed_slots == 2);
    for (const auto& row : result.table.rows)
        CHECK(row.responses == std::array<std::string, 3>{"", "", ""});

    // log records ok=false with attempts=3
    std::istringstream log(testutil::read_file(dir / "log.jsonl"));
    std::string line;
    std::getline(log, line);  // header
    while (std::getline(log, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.at("ok") == false);
        CHECK(j.at("attempts") == 3);
    }
}

TEST_CASE("authentication failure aborts the run") {
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
    });
    TempDir dir;
    FakeClock clock;
    CHECK_THROWS_AS(generate({"apple"}, test_config(server.endpoint(), 1),
                             dir / "log.jsonl", &clock),
                    Error);
}

TEST_CASE("api key is sent as a bearer token when the env var is set") {
    std::string seen_auth;
    std::mutex mu;
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard<std::mutex> lock(mu);
            seen_auth = req.get_header_value("Authorization");
        }
        res.set_content(completion_body("a, b, c"), "application/json");
    });
    TempDir dir;
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 1);
    cfg.api_key_env = "ASSOCNET_TEST_KEY";
    ::setenv("ASSOCNET_TEST_KEY", "sk-test-123", 1);
    generate({"apple"}, cfg, dir / "log.jsonl", &clock);
    ::unsetenv("ASSOCNET_TEST_KEY");
    CHECK(seen_auth == "Bearer sk-test-123");
}

TEST_CASE("resume on a complete log issues no requests") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        res.set_content(completion_body(cue_from_request(req) + ", x, y"), "application/json");
    });
    TempDir dir;
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 3);
    GenerationResult first = generate({"apple", "tree"}, cfg, dir / "log.jsonl", &clock);
    const int after_generate = hits.load();

    GenerationResult resumed = resume(dir / "log.jsonl", cfg, &clock);
    CHECK(hits == after_generate);  // nothing re-issued
    CHECK(resumed.requests_issued == 0);
    REQUIRE(resumed.table.rows.size() == first.table.rows.size());
    for (std::size_t i = 0; i < first.table.rows.size(); ++i)
        CHECK(resumed.table.rows[i].responses == first.table.rows[i].responses);
}

TEST_CASE("resume re-requests exactly the missing and failed slots") {
    TempDir dir;
    // hand-written log: 2 cues x 3 reps; one slot missing, one failed
    {
        std::ofstream log(dir / "log.jsonl");
        nlohmann::json header = {{"type", "config"},
                                 {"endpoint", "ignored"},
                                 {"model", "test-model"},
                                 {"repetitions", 3},
                                 {"prompt_template", "CUE={cue}"}};
        log << header.dump() << '\n';
        auto entry = [&](const std::string& cue, int rep, bool ok) {
            nlohmann::json j = {{"type", "gen"},       {"cue", cue},
                                {"rep", rep},          {"ok", ok},
                                {"attempts", 1},
                                {"responses", ok ? nlohmann::json::array({"old", "x", "y"})
                                                 : nlohmann::json::array()}};
            log << j.dump() << '\n';
        };
        entry("apple", 0, true);
        entry("apple", 1, true);
        entry("apple", 2, false);  // failed -> will be retried
        entry("tree", 0, true);
        entry("tree", 1, true);
        // tree rep 2 missing entirely
    }
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        res.set_content(completion_body(cue_from_request(req) + "-new, b, c"),
                        "application/json");
    });
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 3);
    GenerationResult result = resume(dir / "log.jsonl", cfg, &clock);
    CHECK(hits == 2);
    CHECK(result.requests_issued == 2);
    REQUIRE(result.table.rows.size() == 6);
    // completed slots keep their original responses
    CHECK(result.table.rows[0].responses == std::array<std::string, 3>{"old", "x", "y"});
    // retried and filled slots carry fresh content
    CHECK(result.table.rows[2].responses ==
          std::array<std::string, 3>{"apple-new", "b", "c"});
    CHECK(result.table.rows[5].responses ==
          std::array<std::string, 3>{"tree-new", "b", "c"});
}

TEST_CASE("resume guards") {
    TempDir dir;
    SECTION("model mismatch") {
        std::ofstream(dir / "log.jsonl")
            << R"({"type":"config","endpoint":"e","model":"other-model","repetitions":3,"prompt_template":"CUE={cue}"})"
            << '\n';
        GenConfig cfg = test_config("http://localhost:1/v1/chat/completions", 3);
        CHECK_THROWS_AS(resume(dir / "log.jsonl", cfg, nullptr), Error);
    }
    SECTION("corrupt line") {
        std::ofstream(dir / "log.jsonl")
            << R"({"type":"config","endpoint":"e","model":"test-model","repetitions":3,"prompt_template":"CUE={cue}"})"
            << "\nthis is not json\n";
        GenConfig cfg = test_config("http://localhost:1/v1/chat/completions", 3);
        CHECK_THROWS_AS(resume(dir / "log.jsonl", cfg, nullptr), Error);
    }
    SECTION("missing header") {
        std::ofstream(dir / "log.jsonl")
            << R"({"type":"gen","cue":"a","rep":0,"ok":true,"attempts":1,"responses":[]})"
            << '\n';
        GenConfig cfg = test_config("http://localhost:1/v1/chat/completions", 3);
        CHECK_THROWS_AS(resume(dir / "log.jsonl", cfg, nullptr), Error);
    }
}

TEST_CASE("rate limiter spaces request starts by at least the interval") {
    FakeClock clock;
    RateLimiter limiter(100.0, clock);  // 10 ms between starts
    std::vector<std::chrono::steady_clock::time_point> starts;
    for (int i = 0; i < 5; ++i) {
        limiter.acquire();
        starts.push_back(clock.now());
    }
    for (std::size_t i = 1; i < starts.size(); ++i)
        CHECK(starts[i] - starts[i - 1] >= std::chrono::milliseconds(10));
}

TEST_CASE("unlimited rate limiter never sleeps") {
    FakeClock clock;
    RateLimiter limiter(0.0, clock);
    const auto before = clock.now();
    for (int i = 0; i < 100; ++i) limiter.acquire();
    CHECK(clock.now() == before);
}

TEST_CASE("generate subcommand wires config, output csv and log together") {
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        res.set_content(completion_body(cue_from_request(req) + ", second, third"),
                        "application/json");
    });
    TempDir dir;
    nlohmann::json cfg = {{"endpoint", server.endpoint()},
                          {"model", "test-model"},
                          {"prompt_template", "CUE={cue}"},
                          {"repetitions", 2}};
    testutil::write_file(dir / "cfg.json", cfg.dump());
    testutil::write_file(dir / "cues.txt", "apple\ntree\n");

    std::vector<const char*> argv{"assocnet", "generate", "--cues", "", "--config", "",
                                  "--output", "", "--log", ""};
    const std::string cues = (dir / "cues.txt").string(), conf = (dir / "cfg.json").string(),
                      out = (dir / "out.csv").string(), log = (dir / "log.jsonl").string();
    argv[3] = cues.c_str();
    argv[5] = conf.c_str();
    argv[7] = out.c_str();
    argv[9] = log.c_str();
    CHECK(assocnet::cli::run(static_cast<int>(argv.size()), argv.data()) == 0);

    NormsTable table = parse_norms_csv(dir / "out.csv");
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0].cue == "apple");
    CHECK(table.rows[0].responses == std::array<std::string, 3>{"apple", "second", "third"});
    CHECK(std::filesystem::exists(dir / "log.jsonl"));
    CHECK(std::filesystem::exists(dir / "out.csv.meta.json"));

    // resume over the same log issues nothing further
    std::vector<const char*> argv2{"assocnet", "generate", "--resume", "--config", "",
                                   "--output", "", "--log", ""};
    argv2[4] = conf.c_str();
    argv2[6] = out.c_str();
    argv2[8] = log.c_str();
    CHECK(assocnet::cli::run(static_cast<int>(argv2.size()), argv2.data()) == 0);
}

TEST_CASE("generate respects the rate limit end to end (virtual time)") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.set_content(completion_body("a, b, c"), "application/json");
    });
    TempDir dir;
    FakeClock clock;
    GenConfig cfg = test_config(server.endpoint(), 4);
    cfg.rate_limit = 50.0;  // 20 ms interval
    cfg.max_in_flight = 1;
    const auto before = clock.now();
    generate({"apple"}, cfg, dir / "log.jsonl", &clock);
    CHECK(hits == 4);
    // 4 starts -> at least 3 intervals of virtual waiting
    CHECK(clock.now() - before >= std::chrono::milliseconds(60));
}
