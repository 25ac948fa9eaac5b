#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "grpokit/backend.hpp"
#include "grpokit/error.hpp"
#include "grpokit/pipeline.hpp"
#include "grpokit/prompts.hpp"

using namespace grpokit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() /
                ("grpokit_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

json record_json(int i) {
    static const char* tags[] = {"table", "photo", "handwritten", "geometry", "meme"};
    return json{{"id", "rec" + std::to_string(i)},
                {"image_ref", "img/" + std::to_string(i) + ".png"},
                {"tags", {tags[i % 5]}},
                {"caption", "caption of image " + std::to_string(i)},
                {"question", "What is shown in image " + std::to_string(i) + "?"},
                {"ground_truth", std::to_string(i)}};
}

void write_input(const fs::path& path, int n, const std::vector<std::string>& extra = {}) {
    std::ofstream out(path);
    for (int i = 0; i < n; ++i) out << record_json(i).dump() << '\n';
    for (const auto& line : extra) out << line << '\n';
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

std::map<std::string, std::string> status_by_id(const fs::path& path) {
    std::map<std::string, std::string> out;
    for (const auto& j : read_jsonl(path)) out[j.at("id")] = j.at("status");
    return out;
}

PipelineOptions fast(std::size_t in_flight = 4) {
    PipelineOptions o;
    o.max_in_flight = in_flight;
    o.backoff_initial = std::chrono::milliseconds(0);
    return o;
}

// Forwards to a stub and aborts the run (non-retryable) after `limit` calls.
class CrashingBackend : public BackendClient {
public:
    CrashingBackend(StubBackend& inner, std::size_t limit) : inner_(inner), limit_(limit) {}
    std::string complete(const std::string& prompt) override {
        if (++calls_ > limit_) throw std::runtime_error("simulated crash");
        return inner_.complete(prompt);
    }
    std::string name() const override { return "crashing"; }

private:
    StubBackend& inner_;
    std::size_t limit_;
    std::atomic<std::size_t> calls_{0};
};

class FailingBackend : public BackendClient {
public:
    std::string complete(const std::string&) override {
        ++calls;
        throw BackendError("unavailable");
    }
    std::string name() const override { return "failing"; }
    std::atomic<std::size_t> calls{0};
};

PipelineRecord pending_record() { return record_from_json(record_json(1)); }

}  // namespace

TEST(PipelineRecord, JsonRoundTrip) {
    PipelineRecord r = pending_record();
    r.category = Category::math;
    r.cot = "c";
    r.cot_rewritten = "d";
    r.status = RecordStatus::accepted;
    r.attempt = 2;
    EXPECT_EQ(record_from_json(record_to_json(r)), r);
}

TEST(PipelineRecord, SchemaViolations) {
    EXPECT_THROW(record_from_json(json{{"id", "x"}}), SchemaError);
    auto j = record_json(0);
    j["status"] = "done";
    EXPECT_THROW(record_from_json(j), SchemaError);
    j = record_json(0);
    j["category"] = "landscape";
    EXPECT_THROW(record_from_json(j), SchemaError);
    j = record_json(0);
    j["status"] = "accepted";
    j["cot"] = "c";
    EXPECT_THROW(record_from_json(j), SchemaError);  // accepted needs cot_rewritten
    EXPECT_THROW(record_from_json(json::array()), SchemaError);
}

TEST(ClassifyCategory, MetadataDriven) {
    PipelineRecord r;
    r.tags = {"table"};
    EXPECT_EQ(classify_category(r), Category::chart_diagram);
    r.tags = {"handwritten"};
    EXPECT_EQ(classify_category(r), Category::text_only);
    r.tags = {};
    EXPECT_EQ(classify_category(r), Category::mixed);
    r.tags = {"Photo"};
    EXPECT_EQ(classify_category(r), Category::natural_scene);
    r.tags = {"circuit", "schematic"};
    EXPECT_EQ(classify_category(r), Category::chart_diagram);
    r.tags = {"geometry"};
    EXPECT_EQ(classify_category(r), Category::math);
    r.tags = {"table", "photo"};
    EXPECT_EQ(classify_category(r), Category::mixed);
    r.tags = {"unheard-of"};
    EXPECT_EQ(classify_category(r), Category::mixed);
    r.category = Category::text_only;
    EXPECT_EQ(classify_category(r), Category::text_only);
}

TEST(ParseVerdict, Grammar) {
    EXPECT_EQ(parse_verdict("valid"), Verdict::valid);
    EXPECT_EQ(parse_verdict("The steps are fine.\nValid."), Verdict::valid);
    EXPECT_EQ(parse_verdict("Output: YES"), Verdict::valid);
    EXPECT_EQ(parse_verdict("**Invalid**\n\n"), Verdict::invalid);
    EXPECT_EQ(parse_verdict("not valid"), Verdict::invalid);
    EXPECT_EQ(parse_verdict("valid\nbut I am unsure"), Verdict::unparseable);
    EXPECT_EQ(parse_verdict("asdf qwerty"), Verdict::unparseable);
    EXPECT_EQ(parse_verdict(""), Verdict::unparseable);
    VerdictGrammar custom{{"ok"}, {"bad"}};
    EXPECT_EQ(parse_verdict("OK", custom), Verdict::valid);
    EXPECT_EQ(parse_verdict("valid", custom), Verdict::unparseable);
}

TEST(RunStage, GenerateRewriteFilter) {
    StubOptions o;
    const PipelineRecord r = pending_record();
    const std::string gen_prompt = render_prompt(builtin_template(TemplateName::generation),
                                                 {{"question", r.question}, {"caption", r.caption}});
    o.responses[gen_prompt] = "fixed cot";
    StubBackend stub(o);

    const auto generated = run_stage(r, Stage::generate, stub);
    EXPECT_EQ(generated.status, RecordStatus::generated);
    EXPECT_EQ(generated.cot, "fixed cot");
    const auto rewritten = run_stage(generated, Stage::rewrite, stub);
    EXPECT_EQ(rewritten.status, RecordStatus::rewritten);
    ASSERT_TRUE(rewritten.cot_rewritten);
    const auto filtered = run_stage(rewritten, Stage::filter, stub);
    EXPECT_EQ(filtered.status, RecordStatus::accepted);
    EXPECT_EQ(stub.prompts().front(), gen_prompt);
}

TEST(RunStage, FilterVerdicts) {
    PipelineRecord r = pending_record();
    r.cot = "c";
    r.cot_rewritten = "d";
    r.status = RecordStatus::rewritten;
    const std::string prompt =
        render_prompt(builtin_template(TemplateName::filter), {{"gt", r.ground_truth}, {"augmented answer", "d"}});

    StubOptions gibberish;
    gibberish.responses[prompt] = "blorp";
    StubBackend g(gibberish);
    const auto out = run_stage(r, Stage::filter, g);
    EXPECT_EQ(out.status, RecordStatus::rejected);
    EXPECT_EQ(out.failure_reason, "unparseable verdict");

    StubOptions invalid;
    invalid.responses[prompt] = "Step 2 is wrong.\nInvalid";
    StubBackend i(invalid);
    const auto rejected = run_stage(r, Stage::filter, i);
    EXPECT_EQ(rejected.status, RecordStatus::rejected);
    EXPECT_EQ(rejected.failure_reason, "Step 2 is wrong.\nInvalid");
}

TEST(RunStage, RequiresPredecessorStatus) {
    StubBackend stub;
    EXPECT_THROW(run_stage(pending_record(), Stage::filter, stub), InputError);
    EXPECT_EQ(stub.calls(), 0u);
}

TEST(RunStage, BackendFailureLeavesRecordUnchanged) {
    FailingBackend failing;
    const PipelineRecord r = pending_record();
    const PipelineRecord copy = r;
    EXPECT_THROW(run_stage(r, Stage::generate, failing), BackendError);
    EXPECT_EQ(r, copy);
}

TEST(RunPipeline, AllAccepted) {
    TempDir dir;
    write_input(dir / "in.jsonl", 10);
    StubBackend stub;
    const auto s = run_pipeline(dir / "in.jsonl", dir / "out.jsonl", stub, fast());
    EXPECT_EQ(s.processed, 10u);
    EXPECT_EQ(s.by_status.at("accepted"), 10u);
    EXPECT_EQ(s.backend_calls, 30u);
    EXPECT_EQ(s.by_category.at("chart_diagram"), 2u);
    EXPECT_EQ(read_jsonl(dir / "out.jsonl").size(), 10u);
    EXPECT_FALSE(fs::exists(dir / "out.jsonl.journal"));
    EXPECT_FALSE(fs::exists(dir / "out.jsonl.tmp"));
}

TEST(RunPipeline, RerunOnCompletedOutputMakesNoCalls) {
    TempDir dir;
    write_input(dir / "in.jsonl", 10);
    StubBackend first;
    run_pipeline(dir / "in.jsonl", dir / "out.jsonl", first, fast());
    StubBackend second;
    const auto s = run_pipeline(dir / "in.jsonl", dir / "out.jsonl", second, fast());
    EXPECT_EQ(second.calls(), 0u);
    EXPECT_EQ(s.backend_calls, 0u);
    EXPECT_EQ(s.resumed_terminal, 10u);
    EXPECT_EQ(s.by_status.at("accepted"), 10u);
}

TEST(RunPipeline, MalformedLineQuarantined) {
    TempDir dir;
    write_input(dir / "in.jsonl", 9, {"{not json"});
    StubBackend stub;
    const auto s = run_pipeline(dir / "in.jsonl", dir / "out.jsonl", stub, fast());
    EXPECT_EQ(s.processed, 9u);
    EXPECT_EQ(s.quarantined, 1u);
    EXPECT_EQ(s.processed + s.quarantined, s.input_records);
    const auto q = read_jsonl(dir / "out.jsonl.quarantine.jsonl");
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0].at("line"), 10);
}

TEST(RunPipeline, DuplicateIdsAndSchemaErrorsQuarantined) {
    TempDir dir;
    write_input(dir / "in.jsonl", 3, {record_json(1).dump(), json{{"id", "x"}}.dump(), ""});
    StubBackend stub;
    const auto s = run_pipeline(dir / "in.jsonl", dir / "out.jsonl", stub, fast());
    EXPECT_EQ(s.input_records, 5u);
    EXPECT_EQ(s.processed, 3u);
    EXPECT_EQ(s.quarantined, 2u);
}

TEST(RunPipeline, ResultIndependentOfConcurrency) {
    TempDir dir;
    write_input(dir / "in.jsonl", 60);
    std::optional<std::vector<json>> baseline;
    for (std::size_t n : {1u, 8u, 32u}) {
        StubOptions o;
        o.seed = 9;
        o.accept_rate = 0.6;
        StubBackend stub(o);
        const auto out = dir / ("out" + std::to_string(n) + ".jsonl");
        run_pipeline(dir / "in.jsonl", out, stub, fast(n));
        auto records = read_jsonl(out);
        std::sort(records.begin(), records.end(), [](const json& a, const json& b) { return a.at("id") < b.at("id"); });
        if (!baseline) {
            baseline = records;
        } else {
            EXPECT_EQ(records, *baseline) << "max_in_flight=" << n;
        }
    }
}

TEST(RunPipeline, TransientFailuresAreRetried) {
    TempDir dir;
    write_input(dir / "in.jsonl", 20);
    StubOptions o;
    o.fail_every = 4;
    StubBackend stub(o);
    const auto s = run_pipeline(dir / "in.jsonl", dir / "out.jsonl", stub, fast(1));
    EXPECT_EQ(s.by_status.at("accepted"), 20u);
    EXPECT_GT(s.backend_calls, 60u);
}

TEST(RunPipeline, ExhaustedRetriesReject) {
    TempDir dir;
    write_input(dir / "in.jsonl", 4);
    FailingBackend failing;
    const auto s = run_pipeline(dir / "in.jsonl", dir / "out.jsonl", failing, fast());
    EXPECT_EQ(s.by_status.at("rejected"), 4u);
    EXPECT_EQ(s.by_failure_reason.at("backend exhausted"), 4u);
    EXPECT_EQ(failing.calls.load(), 12u);
}

TEST(RunPipeline, RegenerationRounds) {
    TempDir dir;
    write_input(dir / "in.jsonl", 3);
    StubOptions o;
    o.accept_rate = 0.0;
    StubBackend stub(o);
    auto opts = fast();
    opts.max_regens = 2;
    run_pipeline(dir / "in.jsonl", dir / "out.jsonl", stub, opts);
    EXPECT_EQ(stub.calls(), 3u * 3u * 3u);
    for (const auto& j : read_jsonl(dir / "out.jsonl")) {
        EXPECT_EQ(j.at("status"), "rejected");
        EXPECT_EQ(j.at("attempt"), 2);
    }
}

TEST(RunPipeline, ResumeAfterCrashRepeatsNoCalls) {
    TempDir dir;
    write_input(dir / "in.jsonl", 40);
    StubOptions o;
    o.accept_rate = 0.7;

    StubBackend reference(o);
    run_pipeline(dir / "in.jsonl", dir / "ref.jsonl", reference, fast());

    StubBackend first(o);
    CrashingBackend crashing(first, 50);
    EXPECT_THROW(run_pipeline(dir / "in.jsonl", dir / "out.jsonl", crashing, fast(8)), std::runtime_error);
    EXPECT_FALSE(fs::exists(dir / "out.jsonl"));
    EXPECT_TRUE(fs::exists(dir / "out.jsonl.journal"));

    StubBackend second(o);
    run_pipeline(dir / "in.jsonl", dir / "out.jsonl", second, fast(8));

    const auto before = first.prompts();
    const auto after = second.prompts();
    const std::set<std::string> done(before.begin(), before.end());
    for (const auto& p : after) EXPECT_EQ(done.count(p), 0u) << "repeated call";
    EXPECT_EQ(before.size() + after.size(), reference.calls());
    EXPECT_EQ(status_by_id(dir / "out.jsonl"), status_by_id(dir / "ref.jsonl"));
}

TEST(RunPipeline, JournalNeverMovesRecordsBackward) {
    TempDir dir;
    write_input(dir / "in.jsonl", 20);
    StubOptions o;
    o.accept_rate = 0.5;
    StubBackend inner(o);
    CrashingBackend crashing(inner, 1000000);  // never crashes; keeps the journal via a failing output path
    fs::create_directories(dir / "out_is_dir.jsonl");
    EXPECT_ANY_THROW(run_pipeline(dir / "in.jsonl", dir / "out_is_dir.jsonl", crashing, fast(4)));
    const auto journal = read_jsonl(dir / "out_is_dir.jsonl.journal");
    ASSERT_FALSE(journal.empty());
    const std::map<std::string, int> rank{
        {"pending", 0}, {"generated", 1}, {"rewritten", 2}, {"accepted", 3}, {"rejected", 3}};
    std::map<std::string, int> last;
    for (const auto& j : journal) {
        const int r = rank.at(j.at("status").get<std::string>());
        auto [it, fresh] = last.emplace(j.at("id"), r);
        if (!fresh) {
            EXPECT_GT(r, it->second);
            it->second = r;
        }
    }
}
