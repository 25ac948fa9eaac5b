#include "grpokit/backend.hpp"

#include <cstdlib>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "grpokit/answer_extraction.hpp"
#include "grpokit/error.hpp"
#include "grpokit/prompts.hpp"

namespace grpokit {

namespace {

using nlohmann::json;

// Template text before its first placeholder identifies the template.
std::string_view template_prefix(TemplateName name) {
    const std::string& body = builtin_template(name).body;
    return std::string_view(body).substr(0, body.find('{'));
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string line_value(std::string_view prompt, std::string_view label) {
    const auto pos = prompt.rfind(label);
    if (pos == std::string_view::npos) return {};
    const auto begin = pos + label.size();
    const auto end = prompt.find('\n', begin);
    return std::string(prompt.substr(begin, end == std::string_view::npos ? std::string_view::npos : end - begin));
}

std::string hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return out;
}

std::string judge_scoring(std::string_view prompt) {
    const std::string extracted = line_value(prompt, "\nfinal answer: ");
    const std::string truth = line_value(prompt, "\ngroundtruth: ");
    const ExtractedAnswer answer = classify_value(extracted);
    GroundTruth gt{GroundTruthKind::text, truth, std::nullopt, std::nullopt};
    const ExtractedAnswer truth_kind = classify_value(truth);
    if (truth_kind.kind == AnswerKind::numeric || truth_kind.kind == AnswerKind::expression) {
        gt.kind = GroundTruthKind::numeric;
    }
    try {
        return answers_match(answer, gt) ? "YES" : "NO";
    } catch (const ConfigError&) {
        return "NO";
    }
}

}  // namespace

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

StubBackend::StubBackend(StubOptions options) : options_(std::move(options)) {}

std::string StubBackend::complete(const std::string& prompt) {
    const std::size_t n = ++calls_;
    if (options_.fail_every != 0 && n % options_.fail_every == 0) {
        throw BackendError("stub backend: injected failure on call " + std::to_string(n));
    }
    std::string out = respond(prompt);
    std::lock_guard lock(mutex_);
    log_.push_back(prompt);
    return out;
}

std::vector<std::string> StubBackend::prompts() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::string StubBackend::respond(const std::string& prompt) const {
    if (auto it = options_.responses.find(prompt); it != options_.responses.end()) return it->second;
    const std::string_view p = prompt;
    const std::uint64_t h = fnv1a(p, options_.seed);

    if (starts_with(p, template_prefix(TemplateName::generation))) {
        return "The image shows the details needed for: " + line_value(p, "\nQuestion: ") +
               " Working through them step by step gives the result. [" + hex(h) + "]";
    }
    if (starts_with(p, template_prefix(TemplateName::roleplay))) {
        return "As seen in the image: " + line_value(p, "\nCoT: ");
    }
    if (starts_with(p, template_prefix(TemplateName::filter))) {
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        return u < options_.accept_rate ? "valid" : options_.reject_text;
    }
    if (starts_with(p, template_prefix(TemplateName::choice_extraction))) {
        const auto a = extract_choice(p.substr(template_prefix(TemplateName::choice_extraction).size()));
        return a.kind == AnswerKind::none ? "NONE" : a.value;
    }
    if (starts_with(p, template_prefix(TemplateName::free_form_extraction))) {
        const auto a = extract_free_form(p.substr(template_prefix(TemplateName::free_form_extraction).size()));
        if (a.kind == AnswerKind::none) return "NONE";
        return a.unit ? a.value + " " + *a.unit : a.value;
    }
    if (starts_with(p, template_prefix(TemplateName::scoring))) return judge_scoring(p);
    return "stub response " + hex(h);
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
    const auto scheme_end = options_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("backend endpoint must be an absolute URL");
    const auto path_begin = options_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = options_.endpoint.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/" : options_.endpoint.substr(path_begin);
}

std::string HttpBackend::complete(const std::string& prompt) {
    httplib::Client client(scheme_host_port_);
    const auto timeout = static_cast<time_t>(options_.timeout.count());
    client.set_connection_timeout(timeout, 0);
    client.set_read_timeout(timeout, 0);

    httplib::Headers headers;
    if (const char* token = std::getenv(options_.token_env.c_str()); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const json body = {
        {"model", options_.model},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", 0},
    };
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw BackendError("backend request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    try {
        const json reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("backend reply is not a chat completion: ") + e.what());
    }
}

}  // namespace grpokit
