#include "grpokit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "grpokit/error.hpp"
#include "grpokit/prompts.hpp"

namespace grpokit {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

int rank(RecordStatus s) {
    switch (s) {
        case RecordStatus::pending: return 0;
        case RecordStatus::generated: return 1;
        case RecordStatus::rewritten: return 2;
        case RecordStatus::accepted:
        case RecordStatus::rejected: return 3;
    }
    return 0;
}

bool advances(const PipelineRecord& from, const PipelineRecord& to) {
    return std::make_tuple(to.attempt, rank(to.status)) > std::make_tuple(from.attempt, rank(from.status));
}

std::string required_string(const json& j, const char* key) {
    if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    if (!j.at(key).is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::string lower_trimmed(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trimmed(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

Stage next_stage(RecordStatus s) {
    switch (s) {
        case RecordStatus::pending: return Stage::generate;
        case RecordStatus::generated: return Stage::rewrite;
        case RecordStatus::rewritten: return Stage::filter;
        default: break;
    }
    throw InputError("record is already terminal");
}

void write_atomically(const fs::path& path, const std::vector<json>& lines) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        for (const auto& j : lines) out << j.dump() << '\n';
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Resume source: latest known state per id from a previous output or journal.
void absorb(std::unordered_map<std::string, PipelineRecord>& latest, const fs::path& path, bool terminal_only) {
    if (!fs::exists(path)) return;
    for (const auto& line : read_lines(path)) {
        if (blank(line)) continue;
        PipelineRecord r;
        try {
            r = record_from_json(json::parse(line));
        } catch (const std::exception&) {
            continue;  // torn last line of an interrupted journal
        }
        if (terminal_only && !is_terminal(r.status)) continue;
        auto it = latest.find(r.id);
        if (it == latest.end()) {
            latest.emplace(r.id, std::move(r));
        } else if (advances(it->second, r)) {
            it->second = std::move(r);
        }
    }
}

}  // namespace

std::string_view to_string(Category c) {
    switch (c) {
        case Category::chart_diagram: return "chart_diagram";
        case Category::natural_scene: return "natural_scene";
        case Category::text_only: return "text_only";
        case Category::mixed: return "mixed";
        case Category::math: return "math";
    }
    return "mixed";
}

std::string_view to_string(RecordStatus s) {
    switch (s) {
        case RecordStatus::pending: return "pending";
        case RecordStatus::generated: return "generated";
        case RecordStatus::rewritten: return "rewritten";
        case RecordStatus::accepted: return "accepted";
        case RecordStatus::rejected: return "rejected";
    }
    return "pending";
}

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::generate: return "generate";
        case Stage::rewrite: return "rewrite";
        case Stage::filter: return "filter";
    }
    return "generate";
}

Category category_from_string(std::string_view name) {
    for (auto c : {Category::chart_diagram, Category::natural_scene, Category::text_only, Category::mixed,
                   Category::math}) {
        if (to_string(c) == name) return c;
    }
    throw SchemaError("unknown category '" + std::string(name) + "'");
}

RecordStatus status_from_string(std::string_view name) {
    for (auto s : {RecordStatus::pending, RecordStatus::generated, RecordStatus::rewritten, RecordStatus::accepted,
                   RecordStatus::rejected}) {
        if (to_string(s) == name) return s;
    }
    throw SchemaError("unknown status '" + std::string(name) + "'");
}

bool is_terminal(RecordStatus s) { return s == RecordStatus::accepted || s == RecordStatus::rejected; }

PipelineRecord record_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("record must be a JSON object");
    PipelineRecord r;
    r.id = required_string(j, "id");
    if (r.id.empty()) throw SchemaError("field 'id' must not be empty");
    r.caption = required_string(j, "caption");
    r.question = required_string(j, "question");
    r.ground_truth = required_string(j, "ground_truth");
    r.image_ref = optional_string(j, "image_ref").value_or("");
    if (auto c = optional_string(j, "category")) r.category = category_from_string(*c);
    if (j.contains("tags")) {
        if (!j.at("tags").is_array()) throw SchemaError("field 'tags' must be an array of strings");
        for (const auto& t : j.at("tags")) {
            if (!t.is_string()) throw SchemaError("field 'tags' must be an array of strings");
            r.tags.push_back(t.get<std::string>());
        }
    }
    r.cot = optional_string(j, "cot");
    r.cot_rewritten = optional_string(j, "cot_rewritten");
    if (auto s = optional_string(j, "status")) r.status = status_from_string(*s);
    r.failure_reason = optional_string(j, "failure_reason");
    if (j.contains("attempt")) {
        if (!j.at("attempt").is_number_integer() || j.at("attempt").get<int>() < 0) {
            throw SchemaError("field 'attempt' must be a non-negative integer");
        }
        r.attempt = j.at("attempt").get<int>();
    }

    if (rank(r.status) >= 1 && r.status != RecordStatus::rejected && !r.cot) {
        throw SchemaError("status '" + std::string(to_string(r.status)) + "' requires 'cot'");
    }
    if ((r.status == RecordStatus::rewritten || r.status == RecordStatus::accepted) && !r.cot_rewritten) {
        throw SchemaError("status '" + std::string(to_string(r.status)) + "' requires 'cot_rewritten'");
    }
    return r;
}

json record_to_json(const PipelineRecord& r) {
    json j = {
        {"id", r.id},
        {"image_ref", r.image_ref},
        {"caption", r.caption},
        {"question", r.question},
        {"ground_truth", r.ground_truth},
        {"status", to_string(r.status)},
    };
    if (r.category) j["category"] = to_string(*r.category);
    if (!r.tags.empty()) j["tags"] = r.tags;
    if (r.cot) j["cot"] = *r.cot;
    if (r.cot_rewritten) j["cot_rewritten"] = *r.cot_rewritten;
    if (r.failure_reason) j["failure_reason"] = *r.failure_reason;
    if (r.attempt != 0) j["attempt"] = r.attempt;
    return j;
}

Category classify_category(const PipelineRecord& record) {
    if (record.category) return *record.category;
    static const std::unordered_map<std::string, Category> kTagMap = {
        {"table", Category::chart_diagram},       {"chart", Category::chart_diagram},
        {"diagram", Category::chart_diagram},     {"flowchart", Category::chart_diagram},
        {"circuit", Category::chart_diagram},     {"schematic", Category::chart_diagram},
        {"plot", Category::chart_diagram},        {"graph", Category::chart_diagram},
        {"ui", Category::chart_diagram},          {"screenshot", Category::chart_diagram},
        {"natural", Category::natural_scene},     {"photo", Category::natural_scene},
        {"scene", Category::natural_scene},       {"natural_scene", Category::natural_scene},
        {"object", Category::natural_scene},      {"text", Category::text_only},
        {"ocr", Category::text_only},             {"document", Category::text_only},
        {"printed", Category::text_only},         {"handwritten", Category::text_only},
        {"text_only", Category::text_only},       {"math", Category::math},
        {"equation", Category::math},             {"formula", Category::math},
        {"geometry", Category::math},             {"mixed", Category::mixed},
        {"meme", Category::mixed},                {"poster", Category::mixed},
        {"infographic", Category::mixed},         {"chart_diagram", Category::chart_diagram},
    };
    std::set<Category> seen;
    for (const auto& tag : record.tags) {
        if (auto it = kTagMap.find(lower_trimmed(tag)); it != kTagMap.end()) seen.insert(it->second);
    }
    if (seen.size() == 1) return *seen.begin();
    return Category::mixed;
}

Verdict parse_verdict(std::string_view response, const VerdictGrammar& grammar) {
    std::string last;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto end = response.find('\n', pos);
        if (end == std::string_view::npos) end = response.size();
        auto line = trimmed(response.substr(pos, end - pos));
        if (!line.empty()) last = std::move(line);
        pos = end + 1;
    }
    std::string v = lower_trimmed(last);
    if (v.rfind("output:", 0) == 0) v = lower_trimmed(v.substr(7));
    auto strip = [](char c) { return c == '*' || c == '"' || c == '\'' || c == '.' || c == '!' || c == '`'; };
    while (!v.empty() && strip(v.front())) v.erase(v.begin());
    while (!v.empty() && strip(v.back())) v.pop_back();
    v = lower_trimmed(v);
    const auto in = [&](const std::vector<std::string>& markers) {
        return std::any_of(markers.begin(), markers.end(), [&](const std::string& m) { return lower_trimmed(m) == v; });
    };
    if (in(grammar.valid_markers)) return Verdict::valid;
    if (in(grammar.invalid_markers)) return Verdict::invalid;
    return Verdict::unparseable;
}

PipelineRecord run_stage(const PipelineRecord& record, Stage stage, BackendClient& client,
                         const VerdictGrammar& grammar) {
    const RecordStatus expected = stage == Stage::generate  ? RecordStatus::pending
                                  : stage == Stage::rewrite ? RecordStatus::generated
                                                            : RecordStatus::rewritten;
    if (record.status != expected) {
        throw InputError("stage '" + std::string(to_string(stage)) + "' needs status '" +
                         std::string(to_string(expected)) + "', record '" + record.id + "' is '" +
                         std::string(to_string(record.status)) + "'");
    }

    PipelineRecord next = record;
    switch (stage) {
        case Stage::generate: {
            const auto prompt = render_prompt(builtin_template(TemplateName::generation),
                                              {{"question", record.question}, {"caption", record.caption}});
            next.cot = client.complete(prompt);
            next.status = RecordStatus::generated;
            break;
        }
        case Stage::rewrite: {
            const auto prompt = render_prompt(builtin_template(TemplateName::roleplay), {{"cot", *record.cot}});
            next.cot_rewritten = client.complete(prompt);
            next.status = RecordStatus::rewritten;
            break;
        }
        case Stage::filter: {
            const auto prompt =
                render_prompt(builtin_template(TemplateName::filter),
                              {{"gt", record.ground_truth}, {"augmented answer", *record.cot_rewritten}});
            const std::string reply = client.complete(prompt);
            switch (parse_verdict(reply, grammar)) {
                case Verdict::valid:
                    next.status = RecordStatus::accepted;
                    next.failure_reason.reset();
                    break;
                case Verdict::invalid:
                    next.status = RecordStatus::rejected;
                    next.failure_reason = trimmed(reply);
                    break;
                case Verdict::unparseable:
                    next.status = RecordStatus::rejected;
                    next.failure_reason = "unparseable verdict";
                    break;
            }
            break;
        }
    }
    return next;
}

json PipelineSummary::to_json() const {
    return json{
        {"input_records", input_records},     {"processed", processed},
        {"quarantined", quarantined},         {"resumed_terminal", resumed_terminal},
        {"backend_calls", backend_calls},     {"by_status", by_status},
        {"by_category", by_category},         {"by_failure_reason", by_failure_reason},
    };
}

PipelineSummary run_pipeline(const fs::path& input, const fs::path& output, BackendClient& client,
                             const PipelineOptions& options) {
    if (options.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    PipelineSummary summary;
    std::vector<PipelineRecord> records;
    std::vector<json> quarantine;
    std::set<std::string> ids;

    const auto lines = read_lines(input);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (blank(lines[n])) continue;
        ++summary.input_records;
        try {
            PipelineRecord r = record_from_json(json::parse(lines[n]));
            if (!ids.insert(r.id).second) throw SchemaError("duplicate id '" + r.id + "'");
            records.push_back(std::move(r));
        } catch (const std::exception& e) {
            quarantine.push_back(json{{"line", n + 1}, {"error", e.what()}, {"raw", lines[n]}});
        }
    }

    fs::path journal_path = output;
    journal_path += ".journal";
    fs::path quarantine_path = output;
    quarantine_path += ".quarantine.jsonl";

    std::unordered_map<std::string, PipelineRecord> latest;
    absorb(latest, output, true);
    absorb(latest, journal_path, false);

    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        if (auto it = latest.find(r.id); it != latest.end() && advances(r, it->second)) r = it->second;
        if (!r.category) r.category = classify_category(r);
        if (is_terminal(r.status)) {
            ++summary.resumed_terminal;
        } else {
            work.push_back(i);
        }
    }

    std::ofstream journal;
    if (!work.empty()) {
        journal.open(journal_path, std::ios::app);
        if (!journal) throw std::runtime_error("cannot open journal " + journal_path.string());
    }
    std::mutex journal_mutex;
    auto log_progress = [&](const PipelineRecord& r) {
        std::lock_guard lock(journal_mutex);
        journal << record_to_json(r).dump() << '\n';
        journal.flush();
    };

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> calls{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto drive = [&](PipelineRecord& rec) {
        while (!is_terminal(rec.status) && !stop.load()) {
            const Stage stage = next_stage(rec.status);
            std::optional<PipelineRecord> advanced;
            auto delay = options.backoff_initial;
            for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
                try {
                    ++calls;
                    advanced = run_stage(rec, stage, client, options.grammar);
                    break;
                } catch (const BackendError&) {
                    if (attempt + 1 < options.max_attempts && delay.count() > 0) {
                        std::this_thread::sleep_for(delay);
                        delay *= 2;
                    }
                }
            }
            if (!advanced) {
                rec.status = RecordStatus::rejected;
                rec.failure_reason = "backend exhausted";
                log_progress(rec);
                return;
            }
            if (advanced->status == RecordStatus::rejected && advanced->attempt < options.max_regens) {
                log_progress(*advanced);
                PipelineRecord retry = *advanced;
                retry.attempt += 1;
                retry.status = RecordStatus::pending;
                retry.cot.reset();
                retry.cot_rewritten.reset();
                retry.failure_reason.reset();
                rec = std::move(retry);
            } else {
                rec = std::move(*advanced);
            }
            log_progress(rec);
        }
    };

    auto worker = [&] {
        while (!stop.load()) {
            const std::size_t k = next++;
            if (k >= work.size()) return;
            try {
                drive(records[work[k]]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(options.max_in_flight, work.size()));
    if (!work.empty()) {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (journal.is_open()) journal.close();
    if (failure) std::rethrow_exception(failure);

    std::vector<json> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(record_to_json(r));
    write_atomically(output, out);
    if (!quarantine.empty()) {
        write_atomically(quarantine_path, quarantine);
    } else if (fs::exists(quarantine_path)) {
        fs::remove(quarantine_path);
    }
    if (fs::exists(journal_path)) fs::remove(journal_path);

    summary.processed = records.size();
    summary.quarantined = quarantine.size();
    summary.backend_calls = calls.load();
    for (const auto& r : records) {
        ++summary.by_status[std::string(to_string(r.status))];
        ++summary.by_category[std::string(to_string(r.category.value_or(Category::mixed)))];
        if (r.failure_reason) ++summary.by_failure_reason[*r.failure_reason];
    }
    return summary;
}

}  // namespace grpokit
