#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "assocnet/error.hpp"
#include "assocnet/norms.hpp"
#include "assocnet/text.hpp"

#include <httplib.h>
#include <json.hpp>

namespace assocnet::llm {

inline constexpr const char* kDefaultPromptTemplate =
    "You are a participant in a word association task. For the cue word "
    "'{cue}', give the first three words that come to mind, one word per "
    "response, separated by commas. Reply with only the three words.";

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};  // doubled per attempt
};

struct GenConfig {
    std::string endpoint;  // full URL, e.g. http://localhost:8080/v1/chat/completions
    std::string model;
    std::string prompt_template = kDefaultPromptTemplate;
    int repetitions = 100;
    double temperature = 1.0;
    int max_tokens = 64;
    RetryPolicy retry;
    double rate_limit = 0.0;  // requests per second; <= 0 means unlimited
    int max_in_flight = 4;
    std::string api_key_env = "LLM_API_KEY";

    void validate() const {
        require(!endpoint.empty(), "llmgen: endpoint is required");
        require(!model.empty(), "llmgen: model name is required");
        require(repetitions >= 1, "llmgen: repetitions must be >= 1");
        require(retry.max_attempts >= 1, "llmgen: max_attempts must be >= 1");
        require(max_in_flight >= 1, "llmgen: max_in_flight must be >= 1");
        auto first = prompt_template.find("{cue}");
        require(first != std::string::npos &&
                    prompt_template.find("{cue}", first + 1) == std::string::npos,
                "llmgen: prompt template must contain {cue} exactly once");
    }

    static GenConfig from_json(const nlohmann::json& j) {
        GenConfig cfg;
        cfg.endpoint = j.at("endpoint").get<std::string>();
        cfg.model = j.at("model").get<std::string>();
        if (j.contains("prompt_template")) cfg.prompt_template = j["prompt_template"];
        if (j.contains("repetitions")) cfg.repetitions = j["repetitions"];
        if (j.contains("temperature")) cfg.temperature = j["temperature"];
        if (j.contains("max_tokens")) cfg.max_tokens = j["max_tokens"];
        if (j.contains("max_attempts")) cfg.retry.max_attempts = j["max_attempts"];
        if (j.contains("backoff_ms"))
            cfg.retry.initial_backoff = std::chrono::milliseconds(j["backoff_ms"].get<int>());
        if (j.contains("rate_limit")) cfg.rate_limit = j["rate_limit"];
        if (j.contains("max_in_flight")) cfg.max_in_flight = j["max_in_flight"];
        if (j.contains("api_key_env")) cfg.api_key_env = j["api_key_env"];
        cfg.validate();
        return cfg;
    }

    static GenConfig from_json_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        require(in.good(), "llmgen: cannot open config ", path.string());
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            fail("llmgen: invalid config ", path.string(), ": ", e.what());
        }
    }
};

// Injectable clock so the rate limiter and backoff are testable without
// real waiting.
struct Clock {
    virtual ~Clock() = default;
    virtual std::chrono::steady_clock::time_point now() = 0;
    virtual void sleep_until(std::chrono::steady_clock::time_point tp) = 0;
    void sleep_for(std::chrono::steady_clock::duration d) { sleep_until(now() + d); }
};

struct RealClock final : Clock {
    std::chrono::steady_clock::time_point now() override {
        return std::chrono::steady_clock::now();
    }
    void sleep_until(std::chrono::steady_clock::time_point tp) override {
        std::this_thread::sleep_until(tp);
    }
};

// Serializes request starts so consecutive starts are >= 1/rps apart.
class RateLimiter {
public:
    RateLimiter(double requests_per_second, Clock& clock) : clock_(clock) {
        if (requests_per_second > 0.0)
            interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(1.0 / requests_per_second));
    }

    void acquire() {
        if (interval_.count() == 0) return;
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard<std::mutex> lock(mu_);
            const auto now = clock_.now();
            slot = next_ > now ? next_ : now;
            next_ = slot + interval_;
        }
        clock_.sleep_until(slot);
    }

private:
    Clock& clock_;
    std::chrono::steady_clock::duration interval_{0};
    std::chrono::steady_clock::time_point next_{};
    std::mutex mu_;
};

// Splits a completion into at most three response words: newlines first, then
// commas, with list numbering and bullet characters stripped. Parsing stays
// permissive; the norms preprocessing is the real cleaner.
inline std::vector<std::string> parse_association_response(std::string_view raw) {
    std::vector<std::string> out;
    for (const std::string& line : split(raw, '\n')) {
        for (const std::string& piece : split(line, ',')) {
            std::string_view token = trim_view(piece);
            // leading enumeration: digits followed by '.' or ')'
            std::size_t i = 0;
            while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) ++i;
            if (i > 0 && i < token.size() && (token[i] == '.' || token[i] == ')'))
                token = token.substr(i + 1);
            while (!token.empty() && (token.front() == '-' || token.front() == '*' ||
                                      token.front() == '.' || token.front() == ')'))
                token.remove_prefix(1);
            token = trim_view(token);
            while (token.size() >= 2 && ((token.front() == '"' && token.back() == '"') ||
                                         (token.front() == '\'' && token.back() == '\'')))
                token = trim_view(token.substr(1, token.size() - 2));
            if (token.empty()) continue;
            out.emplace_back(token);
            if (out.size() == kResponsesPerRow) return out;
        }
    }
    return out;
}

struct SlotKey {
    std::string cue;
    int rep = 0;
    bool operator<(const SlotKey& other) const {
        return cue != other.cue ? cue < other.cue : rep < other.rep;
    }
};

struct SlotResult {
    std::vector<std::string> responses;
    int attempts = 0;
    bool ok = false;
};

struct GenerationResult {
    NormsTable table;
    std::size_t requests_issued = 0;
    std::size_t failed_slots = 0;
};

namespace detail {

struct ParsedEndpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    require(scheme_end != std::string::npos, "llmgen: endpoint must be a full URL: ", url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string render_prompt(const std::string& tmpl, const std::string& cue) {
    std::string out = tmpl;
    auto pos = out.find("{cue}");
    out.replace(pos, 5, cue);
    return out;
}

class AuthFailure : public Error {
public:
    using Error::Error;
};

// One request with retries. Returns the raw completion text, or nullopt after
// exhausting attempts. 401/403 abort the whole run.
inline std::optional<std::string> request_completion(httplib::Client& client,
                                                     const std::string& path,
                                                     const GenConfig& cfg,
                                                     const std::string& api_key,
                                                     const std::string& cue, Clock& clock,
                                                     int& attempts) {
    nlohmann::json body = {
        {"model", cfg.model},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"}, {"content", render_prompt(cfg.prompt_template, cue)}}})},
        {"temperature", cfg.temperature},
        {"max_tokens", cfg.max_tokens}};
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto backoff = cfg.retry.initial_backoff;
    for (int attempt = 1; attempt <= cfg.retry.max_attempts; ++attempt) {
        attempts = attempt;
        auto res = client.Post(path, headers, payload, "application/json");
        if (res) {
            if (res->status == 401 || res->status == 403)
                throw AuthFailure("llmgen: authentication failed (HTTP " +
                                  std::to_string(res->status) + ")");
            if (res->status == 200) {
                try {
                    auto j = nlohmann::json::parse(res->body);
                    return j.at("choices").at(0).at("message").at("content")
                        .get<std::string>();
                } catch (const nlohmann::json::exception&) {
                    // malformed body; fall through to retry
                }
            }
        }
        if (attempt < cfg.retry.max_attempts) {
            clock.sleep_for(backoff);
            backoff *= 2;
        }
    }
    return std::nullopt;
}

inline nlohmann::json log_header(const GenConfig& cfg) {
    return {{"type", "config"},
            {"endpoint", cfg.endpoint},
            {"model", cfg.model},
            {"repetitions", cfg.repetitions},
            {"prompt_template", cfg.prompt_template}};
}

struct LogState {
    std::vector<std::string> cues;                // order of first appearance
    std::map<SlotKey, SlotResult> slots;          // last entry per slot wins
};

inline LogState read_log(const std::filesystem::path& path, const GenConfig& cfg) {
    std::ifstream in(path);
    require(in.good(), "llmgen: cannot open log ", path.string());
    LogState state;
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    std::unordered_set<std::string> seen_cues;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail("llmgen: corrupt log line ", lineno, " in ", path.string(), ": ", e.what());
        }
        try {
            const std::string type = j.at("type");
            if (type == "config") {
                require(!saw_header, "llmgen: duplicate config header in log at line ", lineno);
                saw_header = true;
                require(j.at("model").get<std::string>() == cfg.model,
                        "llmgen: log was produced with model '",
                        j.at("model").get<std::string>(), "' but config says '", cfg.model,
                        "'");
                require(j.at("repetitions").get<int>() == cfg.repetitions,
                        "llmgen: log repetitions do not match config");
            } else if (type == "gen") {
                require(saw_header, "llmgen: log entry before config header at line ", lineno);
                SlotKey key{j.at("cue").get<std::string>(), j.at("rep").get<int>()};
                SlotResult result;
                result.ok = j.at("ok").get<bool>();
                result.attempts = j.value("attempts", 0);
                for (const auto& r : j.at("responses"))
                    result.responses.push_back(r.get<std::string>());
                if (seen_cues.insert(key.cue).second) state.cues.push_back(key.cue);
                state.slots[key] = std::move(result);
            } else {
                fail("llmgen: unknown log entry type '", type, "' at line ", lineno);
            }
        } catch (const nlohmann::json::exception& e) {
            fail("llmgen: corrupt log line ", lineno, " in ", path.string(), ": ", e.what());
        }
    }
    require(saw_header, "llmgen: log has no config header: ", path.string());
    return state;
}

inline NormsTable assemble_table(const std::vector<std::string>& cues, const GenConfig& cfg,
                                 const std::map<SlotKey, SlotResult>& slots,
                                 std::size_t* failed) {
    std::vector<std::string> sorted_cues(cues);
    std::sort(sorted_cues.begin(), sorted_cues.end());
    sorted_cues.erase(std::unique(sorted_cues.begin(), sorted_cues.end()), sorted_cues.end());
    NormsTable table;
    for (const std::string& cue : sorted_cues) {
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            NormRow row;
            row.cue = cue;
            auto it = slots.find(SlotKey{cue, rep});
            if (it != slots.end() && it->second.ok) {
                for (std::size_t i = 0; i < it->second.responses.size() && i < kResponsesPerRow;
                     ++i)
                    row.responses[i] = it->second.responses[i];
            } else if (failed) {
                ++*failed;
            }
            table.rows.push_back(std::move(row));
        }
    }
    table.reindex();
    return table;
}

// Issues the pending slots with bounded concurrency and appends one log line
// per slot. The log writer is the only serialization point.
inline GenerationResult run_slots(const std::vector<std::string>& cues, const GenConfig& cfg,
                                  const std::filesystem::path& log_path,
                                  std::vector<SlotKey> pending,
                                  std::map<SlotKey, SlotResult> completed, Clock& clock,
                                  bool append_log) {
    std::ofstream log(log_path, append_log ? std::ios::app : std::ios::trunc);
    require(log.good(), "llmgen: cannot open log for writing: ", log_path.string());
    if (!append_log) log << log_header(cfg).dump() << '\n';

    const char* key_env = std::getenv(cfg.api_key_env.c_str());
    const std::string api_key = key_env ? key_env : "";
    const auto endpoint = parse_endpoint(cfg.endpoint);

    std::sort(pending.begin(), pending.end());
    RateLimiter limiter(cfg.rate_limit, clock);
    std::mutex state_mu;
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr abort_error;
    std::atomic<bool> aborted{false};

    auto worker = [&] {
        httplib::Client client(endpoint.origin);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(120, 0);
        while (!aborted.load()) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= pending.size()) break;
            const SlotKey& slot = pending[i];
            SlotResult result;
            try {
                limiter.acquire();
                auto content = request_completion(client, endpoint.path, cfg, api_key,
                                                  slot.cue, clock, result.attempts);
                if (content) {
                    result.responses = parse_association_response(*content);
                    result.ok = true;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(state_mu);
                if (!abort_error) abort_error = std::current_exception();
                aborted.store(true);
                break;
            }
            nlohmann::json entry = {{"type", "gen"},
                                    {"cue", slot.cue},
                                    {"rep", slot.rep},
                                    {"ok", result.ok},
                                    {"attempts", result.attempts},
                                    {"responses", result.responses},
                                    {"ts", std::chrono::duration_cast<std::chrono::milliseconds>(
                                               std::chrono::system_clock::now()
                                                   .time_since_epoch())
                                               .count()}};
            std::lock_guard<std::mutex> lock(state_mu);
            log << entry.dump() << '\n';
            log.flush();
            completed[slot] = std::move(result);
        }
    };

    const unsigned workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight), pending.size());
    std::size_t issued = pending.size();
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (abort_error) std::rethrow_exception(abort_error);

    GenerationResult out;
    out.requests_issued = issued;
    out.table = assemble_table(cues, cfg, completed, &out.failed_slots);
    return out;
}

}  // namespace detail

// Requests `repetitions` completions per cue and writes an append-only JSONL
// log alongside. Failed slots become all-blank rows; the table is always
// rectangular.
inline GenerationResult generate(const std::vector<std::string>& cues, const GenConfig& cfg,
                                 const std::filesystem::path& log_path, Clock* clock = nullptr) {
    cfg.validate();
    RealClock real;
    std::vector<SlotKey> pending;
    pending.reserve(cues.size() * static_cast<std::size_t>(cfg.repetitions));
    for (const std::string& cue : cues)
        for (int rep = 0; rep < cfg.repetitions; ++rep) pending.push_back({cue, rep});
    return detail::run_slots(cues, cfg, log_path, std::move(pending), {},
                             clock ? *clock : real, /*append_log=*/false);
}

// Re-requests only the slots that are missing or previously failed; slots
// with a successful completion are never re-issued.
inline GenerationResult resume(const std::filesystem::path& log_path, const GenConfig& cfg,
                               Clock* clock = nullptr) {
    cfg.validate();
    RealClock real;
    detail::LogState state = detail::read_log(log_path, cfg);
    std::vector<SlotKey> pending;
    for (const std::string& cue : state.cues) {
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            SlotKey key{cue, rep};
            auto it = state.slots.find(key);
            if (it == state.slots.end() || !it->second.ok) pending.push_back(key);
        }
    }
    return detail::run_slots(state.cues, cfg, log_path, std::move(pending),
                             std::move(state.slots), clock ? *clock : real,
                             /*append_log=*/true);
}

inline std::vector<std::string> load_cue_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "llmgen: cannot open cue list ", path.string());
    std::vector<std::string> cues;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string cue = trim(line);
        if (!cue.empty()) cues.push_back(std::move(cue));
    }
    require(!cues.empty(), "llmgen: cue list is empty: ", path.string());
    return cues;
}

}  // namespace assocnet::llm
