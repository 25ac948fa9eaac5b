#include "grpokit/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "grpokit/error.hpp"
#include "grpokit/prompts.hpp"

namespace grpokit {

namespace {

using nlohmann::json;

std::string required_string(const json& j, const char* key) {
    if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    if (!j.at(key).is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Reply token for YES/NO/NONE checks: trimmed, upper-cased, outer quotes and
// terminal punctuation dropped.
std::string reply_token(std::string_view reply) {
    std::string t = trim(reply);
    while (!t.empty() && std::string_view("\"'`*.!").find(t.back()) != std::string_view::npos) t.pop_back();
    while (!t.empty() && std::string_view("\"'`*").find(t.front()) != std::string_view::npos) t.erase(t.begin());
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return t;
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const Enum (&values)[N], const char* what) {
    for (Enum v : values) {
        if (to_string(v) == name) return v;
    }
    throw SchemaError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

void check_stat(std::vector<std::string>& warnings, const char* label, std::size_t actual,
                const std::optional<std::size_t>& expected) {
    if (expected && *expected != actual) {
        warnings.push_back(std::string(label) + ": expected " + std::to_string(*expected) + ", found " +
                           std::to_string(actual));
    }
}

void tally(SliceScore& s, JudgeVerdict v) {
    ++s.items;
    switch (v) {
        case JudgeVerdict::correct: ++s.correct; break;
        case JudgeVerdict::incorrect: ++s.incorrect; break;
        case JudgeVerdict::unanswered: ++s.unanswered; break;
        case JudgeVerdict::deferred: ++s.deferred; break;
    }
}

void finish(SliceScore& s, bool exclude_unanswered) {
    s.attempted = s.items - s.deferred - (exclude_unanswered ? s.unanswered : 0);
    if (s.attempted > 0) s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.attempted);
}

std::string percent_cell(const std::optional<double>& accuracy) {
    if (!accuracy) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *accuracy * 100.0);
    return buf;
}

}  // namespace

std::string_view to_string(Grade g) {
    switch (g) {
        case Grade::junior_high: return "junior_high";
        case Grade::high_school: return "high_school";
        case Grade::college: return "college";
        case Grade::social_test: return "social_test";
    }
    return "junior_high";
}

std::string_view to_string(Subject s) {
    switch (s) {
        case Subject::math: return "math";
        case Subject::physics: return "physics";
        case Subject::chemistry: return "chemistry";
        case Subject::biology: return "biology";
        case Subject::deduction: return "deduction";
    }
    return "math";
}

std::string_view to_string(QuestionType t) {
    return t == QuestionType::multiple_choice ? "multiple_choice" : "free_form";
}

std::string_view display_name(Grade g) {
    switch (g) {
        case Grade::junior_high: return "Junior High School";
        case Grade::high_school: return "High School";
        case Grade::college: return "College";
        case Grade::social_test: return "Social Test";
    }
    return "";
}

std::string_view display_name(Subject s) {
    switch (s) {
        case Subject::math: return "Math";
        case Subject::physics: return "Physics";
        case Subject::chemistry: return "Chemistry";
        case Subject::biology: return "Biology";
        case Subject::deduction: return "Deduction";
    }
    return "";
}

Grade grade_from_string(std::string_view name) { return parse_enum(name, kGrades, "grade"); }

Subject subject_from_string(std::string_view name) { return parse_enum(name, kSubjects, "category"); }

QuestionType question_type_from_string(std::string_view name) {
    static constexpr QuestionType kTypes[] = {QuestionType::multiple_choice, QuestionType::free_form};
    return parse_enum(name, kTypes, "question_type");
}

std::string_view to_string(JudgeKind k) { return k == JudgeKind::rules ? "rules" : "llm"; }

std::string_view to_string(JudgeVerdict v) {
    switch (v) {
        case JudgeVerdict::correct: return "correct";
        case JudgeVerdict::incorrect: return "incorrect";
        case JudgeVerdict::unanswered: return "unanswered";
        case JudgeVerdict::deferred: return "deferred";
    }
    return "unanswered";
}

JudgeKind judge_kind_from_string(std::string_view name) {
    if (name == "rules") return JudgeKind::rules;
    if (name == "llm") return JudgeKind::llm;
    throw ConfigError("unknown judge '" + std::string(name) + "' (expected rules or llm)");
}

BenchmarkItem item_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("item must be a JSON object");
    BenchmarkItem item;
    item.id = required_string(j, "id");
    if (item.id.empty()) throw SchemaError("field 'id' must not be empty");
    item.grade = grade_from_string(required_string(j, "grade"));
    item.category = subject_from_string(required_string(j, "category"));
    item.subcategory = required_string(j, "subcategory");
    item.question = required_string(j, "question");
    item.question_type = question_type_from_string(required_string(j, "question_type"));
    item.answer = required_string(j, "answer");
    if (j.contains("image_ref") && !j.at("image_ref").is_null()) item.image_ref = required_string(j, "image_ref");
    return item;
}

json item_to_json(const BenchmarkItem& item) {
    json j = {
        {"id", item.id},
        {"grade", to_string(item.grade)},
        {"category", to_string(item.category)},
        {"subcategory", item.subcategory},
        {"question", item.question},
        {"question_type", to_string(item.question_type)},
        {"answer", item.answer},
    };
    if (item.image_ref) j["image_ref"] = *item.image_ref;
    return j;
}

ExpectedStats ExpectedStats::published() {
    ExpectedStats s;
    s.total = 942;
    s.multiple_choice = 783;
    s.free_form = 159;
    s.grades = 4;
    s.categories = 5;
    s.subcategories = 38;
    return s;
}

ExpectedStats ExpectedStats::from_json(const json& j) {
    static const std::set<std::string> kKeys = {"total",  "multiple_choice", "free_form",
                                                "grades", "categories",      "subcategories"};
    if (!j.is_object()) throw ConfigError("expected statistics must be an object");
    ExpectedStats s;
    for (const auto& [key, value] : j.items()) {
        if (!kKeys.count(key)) throw ConfigError("unknown expected-statistics key '" + key + "'");
        if (!value.is_number_integer() || value.get<long long>() < 0) throw ConfigError("expected statistic '" + key + "' must be a count");
    }
    auto get = [&](const char* key) -> std::optional<std::size_t> {
        if (!j.contains(key)) return std::nullopt;
        return j.at(key).get<std::size_t>();
    };
    s.total = get("total");
    s.multiple_choice = get("multiple_choice");
    s.free_form = get("free_form");
    s.grades = get("grades");
    s.categories = get("categories");
    s.subcategories = get("subcategories");
    return s;
}

json ManifestStats::to_json() const {
    return json{{"total", total},         {"multiple_choice", multiple_choice}, {"free_form", free_form},
                {"by_grade", by_grade},   {"by_category", by_category},         {"subcategories", subcategories}};
}

json ManifestReport::to_json() const {
    json errs = json::array();
    for (const auto& e : errors) errs.push_back({{"line", e.line}, {"message", e.message}});
    return json{{"errors", errs}, {"warnings", warnings}, {"notes", notes}, {"stats", stats.to_json()}};
}

Manifest parse_manifest(std::istream& in, const std::optional<ExpectedStats>& expected) {
    Manifest m;
    std::set<std::string> ids;
    std::set<std::string> subcategories;
    std::set<std::string> social_ids;
    std::set<std::string> deduction_ids;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            BenchmarkItem item = item_from_json(json::parse(line));
            if (!ids.insert(item.id).second) throw SchemaError("duplicate id '" + item.id + "'");
            m.items.push_back(std::move(item));
        } catch (const json::parse_error& e) {
            m.report.errors.push_back({n, std::string("invalid JSON: ") + e.what()});
        } catch (const SchemaError& e) {
            m.report.errors.push_back({n, e.what()});
        }
    }

    auto& st = m.report.stats;
    for (const auto& item : m.items) {
        ++st.total;
        ++(item.question_type == QuestionType::multiple_choice ? st.multiple_choice : st.free_form);
        ++st.by_grade[std::string(to_string(item.grade))];
        ++st.by_category[std::string(to_string(item.category))];
        subcategories.insert(item.subcategory);
        if (item.grade == Grade::social_test) social_ids.insert(item.id);
        if (item.category == Subject::deduction) deduction_ids.insert(item.id);
    }
    st.subcategories = subcategories.size();

    if (!social_ids.empty() && social_ids == deduction_ids) {
        m.report.notes.push_back("grade social_test and category deduction select the same " +
                                 std::to_string(social_ids.size()) + " items");
    }
    if (expected) {
        auto& w = m.report.warnings;
        check_stat(w, "total", st.total, expected->total);
        check_stat(w, "multiple_choice", st.multiple_choice, expected->multiple_choice);
        check_stat(w, "free_form", st.free_form, expected->free_form);
        check_stat(w, "grades", st.by_grade.size(), expected->grades);
        check_stat(w, "categories", st.by_category.size(), expected->categories);
        check_stat(w, "subcategories", st.subcategories, expected->subcategories);
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path, const std::optional<ExpectedStats>& expected) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    return parse_manifest(in, expected);
}

std::map<std::string, std::string> load_responses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open responses " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            if (!j.is_object()) throw SchemaError("response line must be a JSON object");
            std::string id = required_string(j, "id");
            if (!out.emplace(std::move(id), required_string(j, "response")).second) {
                throw SchemaError("duplicate id");
            }
        } catch (const json::parse_error& e) {
            throw SchemaError("responses line " + std::to_string(n) + ": invalid JSON: " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError("responses line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

GroundTruth item_ground_truth(const BenchmarkItem& item) {
    GroundTruth gt;
    gt.value = item.answer;
    if (item.question_type == QuestionType::multiple_choice) {
        gt.kind = GroundTruthKind::choice;
        return gt;
    }
    const auto kind = classify_value(item.answer).kind;
    gt.kind = kind == AnswerKind::numeric || kind == AnswerKind::expression ? GroundTruthKind::numeric
                                                                            : GroundTruthKind::text;
    return gt;
}

Judgement judge(const BenchmarkItem& item, std::string_view response, JudgeKind kind, BackendClient* client,
                const ExtractionOptions& options) {
    Judgement out;
    const bool mc = item.question_type == QuestionType::multiple_choice;

    if (kind == JudgeKind::rules) {
        const ExtractedAnswer a = mc ? extract_choice(response) : extract_free_form(response, options);
        if (a.kind == AnswerKind::none) {
            out.verdict = JudgeVerdict::unanswered;
            return out;
        }
        out.extracted = a.unit ? a.value + " " + *a.unit : a.value;
        GroundTruth gt = item_ground_truth(item);
        bool match = false;
        try {
            match = answers_match(a, gt, options);
        } catch (const ConfigError&) {
            gt.kind = GroundTruthKind::text;
            match = answers_match(a, gt, options);
        }
        out.verdict = match ? JudgeVerdict::correct : JudgeVerdict::incorrect;
        return out;
    }

    if (client == nullptr) throw ConfigError("llm judge requires a backend client");
    try {
        const auto& extraction =
            builtin_template(mc ? TemplateName::choice_extraction : TemplateName::free_form_extraction);
        const std::string extracted = trim(client->complete(render_prompt(extraction, {{"response", std::string(response)}})));
        out.detail = "extraction: " + extracted;
        if (extracted.empty() || reply_token(extracted) == "NONE") {
            out.verdict = JudgeVerdict::unanswered;
            return out;
        }
        out.extracted = extracted;
        const std::string verdict = client->complete(render_prompt(
            builtin_template(TemplateName::scoring), {{"extracted", extracted}, {"gt", item.answer}}));
        out.detail += "; scoring: " + trim(verdict);
        const std::string token = reply_token(verdict);
        if (token == "YES") {
            out.verdict = JudgeVerdict::correct;
        } else if (token == "NO") {
            out.verdict = JudgeVerdict::incorrect;
        } else {
            out.verdict = JudgeVerdict::deferred;
            out.detail += " (unparseable)";
        }
    } catch (const BackendError& e) {
        out.verdict = JudgeVerdict::deferred;
        out.detail = e.what();
    }
    return out;
}

json SliceScore::to_json() const {
    return json{{"items", items},           {"correct", correct},     {"incorrect", incorrect},
                {"unanswered", unanswered}, {"deferred", deferred},   {"attempted", attempted},
                {"accuracy", accuracy ? json(*accuracy) : json(nullptr)}};
}

json ScoreReport::to_json() const {
    json grades = json::object();
    for (const auto& [g, s] : by_grade) grades[std::string(to_string(g))] = s.to_json();
    json cats = json::object();
    for (const auto& [c, s] : by_category) cats[std::string(to_string(c))] = s.to_json();
    return json{{"judge_backend", judge_backend},
                {"exclude_unanswered", exclude_unanswered},
                {"overall", overall.to_json()},
                {"by_grade", grades},
                {"by_category", cats},
                {"flagged", flagged}};
}

std::string ScoreReport::format_table(std::string_view model) const {
    std::vector<std::string> header{"Model", "Avg"};
    std::vector<std::string> row{std::string(model), percent_cell(overall.accuracy)};
    for (Grade g : kGrades) {
        header.emplace_back(display_name(g));
        row.push_back(percent_cell(by_grade.at(g).accuracy));
    }
    for (Subject s : kSubjects) {
        header.emplace_back(display_name(s));
        row.push_back(percent_cell(by_category.at(s).accuracy));
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::size_t width = std::max(header[i].size(), row[i].size());
            out << (i == 0 ? "| " : " | ") << cells[i] << std::string(width - cells[i].size(), ' ');
        }
        out << " |\n";
    };
    emit(header);
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << "|" << std::string(std::max(header[i].size(), row[i].size()) + 2, '-');
    }
    out << "|\n";
    emit(row);
    out << "judge: " << judge_backend << '\n';
    return out.str();
}

ScoreReport aggregate(const std::vector<BenchmarkItem>& items, const std::vector<Judgement>& judgements,
                      std::string judge_backend, const ScoreOptions& options) {
    if (items.size() != judgements.size()) throw InputError("one judgement per item required");
    ScoreReport r;
    r.judge_backend = std::move(judge_backend);
    r.exclude_unanswered = options.exclude_unanswered;
    for (Grade g : kGrades) r.by_grade[g];
    for (Subject s : kSubjects) r.by_category[s];
    for (std::size_t i = 0; i < items.size(); ++i) {
        const JudgeVerdict v = judgements[i].verdict;
        tally(r.overall, v);
        tally(r.by_grade[items[i].grade], v);
        tally(r.by_category[items[i].category], v);
        if (v == JudgeVerdict::deferred) r.flagged.push_back(items[i].id);
    }
    std::sort(r.flagged.begin(), r.flagged.end());
    finish(r.overall, options.exclude_unanswered);
    for (auto& [g, s] : r.by_grade) finish(s, options.exclude_unanswered);
    for (auto& [c, s] : r.by_category) finish(s, options.exclude_unanswered);
    return r;
}

}  // namespace grpokit
