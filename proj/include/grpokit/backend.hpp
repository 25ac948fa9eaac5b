#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace grpokit {

/// Text-in/text-out model endpoint. Implementations must tolerate concurrent
/// complete() calls from multiple threads.
class BackendClient {
public:
    virtual ~BackendClient() = default;

    /// Throws BackendError on a transient failure.
    virtual std::string complete(const std::string& prompt) = 0;

    virtual std::string name() const = 0;
};

struct StubOptions {
    std::uint64_t seed = 0;
    /// Fraction of filter prompts answered "valid".
    double accept_rate = 1.0;
    /// Exact-prompt overrides, consulted first.
    std::map<std::string, std::string> responses;
    /// Throw BackendError on every n-th call (0 disables).
    std::size_t fail_every = 0;
    /// Filter verdict text for rejections.
    std::string reject_text = "invalid";
};

/// Deterministic backend for tests and dry runs. Responses are a pure
/// function of the prompt and the seed, so results do not depend on call
/// order or concurrency. Recognizes the built-in templates: pipeline prompts
/// get synthetic CoT text and seeded verdicts; judge prompts are answered by
/// the rule-based extractor and matcher.
class StubBackend : public BackendClient {
public:
    explicit StubBackend(StubOptions options = {});

    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "stub"; }

    std::size_t calls() const { return calls_.load(); }
    /// Every prompt that produced a response, in completion order.
    std::vector<std::string> prompts() const;

private:
    std::string respond(const std::string& prompt) const;

    StubOptions options_;
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mutex_;
    std::vector<std::string> log_;
};

struct HttpOptions {
    /// e.g. http://localhost:8000/v1/chat/completions
    std::string endpoint;
    std::string model = "gpt-4o-mini";
    /// Environment variable holding the bearer token; unset or empty sends no header.
    std::string token_env = "GRPOKIT_API_KEY";
    std::chrono::seconds timeout{60};
};

/// OpenAI-style chat-completions client: POSTs
/// {"model", "messages": [{"role": "user", "content": prompt}], "temperature": 0}
/// and returns choices[0].message.content.
class HttpBackend : public BackendClient {
public:
    explicit HttpBackend(HttpOptions options);

    std::string complete(const std::string& prompt) override;
    std::string name() const override { return "http:" + options_.model; }

private:
    HttpOptions options_;
    std::string scheme_host_port_;
    std::string path_;
};

/// 64-bit FNV-1a; stable across platforms, used for seeded stub decisions.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0);

}  // namespace grpokit
