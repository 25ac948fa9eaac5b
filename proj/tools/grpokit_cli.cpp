// grpokit command-line entry point: train-toy, pipeline run, eval score/validate.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "grpokit/backend.hpp"
#include "grpokit/config.hpp"
#include "grpokit/error.hpp"
#include "grpokit/eval.hpp"
#include "grpokit/pipeline.hpp"
#include "grpokit/trainer.hpp"

namespace {

using nlohmann::json;
using namespace grpokit;

json metrics_json(const StepMetrics& m) {
    return json{{"step", m.step},           {"mean_reward", m.mean_reward}, {"mean_accuracy", m.mean_accuracy},
                {"mean_format", m.mean_format}, {"loss", m.loss},           {"surrogate", m.surrogate},
                {"kl", m.kl},               {"clip_fraction", m.clip_fraction}};
}

Config config_or_default(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

std::unique_ptr<BackendClient> make_backend(const std::string& kind, const HttpOptions& http, std::uint64_t seed,
                                            double accept_rate) {
    if (kind == "stub") {
        StubOptions o;
        o.seed = seed;
        o.accept_rate = accept_rate;
        return std::make_unique<StubBackend>(o);
    }
    if (http.endpoint.empty()) throw ConfigError("http backend needs --endpoint or backend.endpoint in the config");
    return std::make_unique<HttpBackend>(http);
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GRPO toolkit: toy training, data pipeline, evaluation"};
    app.require_subcommand(1);

    // train-toy
    auto* train_cmd = app.add_subcommand("train-toy", "Train the toy policy; one JSON metrics line per step");
    std::string task_name = "format";
    int steps = 500;
    std::uint64_t seed = 0;
    std::string train_config;
    std::string metrics_path;
    train_cmd->add_option("--task", task_name, "format | boxed-arith")
        ->check(CLI::IsMember({"format", "boxed-arith"}));
    train_cmd->add_option("--steps", steps, "Training steps")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--seed", seed, "Sampling seed");
    train_cmd->add_option("--config", train_config, "JSON config file")->check(CLI::ExistingFile);
    train_cmd->add_option("--metrics", metrics_path, "Write metrics here instead of stdout");

    // pipeline run
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Data-generation pipeline");
    pipeline_cmd->require_subcommand(1);
    auto* run_cmd = pipeline_cmd->add_subcommand("run", "Drive every record to accepted or rejected");
    std::string in_path;
    std::string out_path;
    std::string backend_kind = "stub";
    std::size_t max_in_flight = 0;
    int max_regens = -1;
    std::string pipeline_config;
    std::string endpoint;
    std::uint64_t stub_seed = 0;
    double accept_rate = 1.0;
    run_cmd->add_option("--in", in_path, "Input JSONL")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_path, "Output JSONL")->required();
    run_cmd->add_option("--backend", backend_kind, "stub | http")->check(CLI::IsMember({"stub", "http"}));
    run_cmd->add_option("--max-in-flight", max_in_flight, "Concurrent backend calls")->check(CLI::PositiveNumber);
    run_cmd->add_option("--max-regens", max_regens, "Extra rounds for rejected records")
        ->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--config", pipeline_config, "JSON config file")->check(CLI::ExistingFile);
    run_cmd->add_option("--endpoint", endpoint, "Chat-completions URL for --backend http");
    run_cmd->add_option("--stub-seed", stub_seed, "Stub backend seed");
    run_cmd->add_option("--stub-accept-rate", accept_rate, "Stub filter acceptance rate")->check(CLI::Range(0.0, 1.0));

    // eval score / validate
    auto* eval_cmd = app.add_subcommand("eval", "Benchmark scoring");
    eval_cmd->require_subcommand(1);
    auto* score_cmd = eval_cmd->add_subcommand("score", "Judge responses and report accuracy by grade and category");
    std::string manifest_path;
    std::string responses_path;
    std::string judge_name = "rules";
    std::string report_path;
    std::string eval_config;
    std::string model_name = "model";
    std::string judge_backend = "http";
    bool exclude_unanswered = false;
    score_cmd->add_option("--manifest", manifest_path, "Benchmark manifest JSONL")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--responses", responses_path, "Responses JSONL {id, response}")
        ->required()
        ->check(CLI::ExistingFile);
    score_cmd->add_option("--judge", judge_name, "rules | llm")->check(CLI::IsMember({"rules", "llm"}));
    score_cmd->add_option("--report", report_path, "JSON report path")->required();
    score_cmd->add_option("--config", eval_config, "JSON config file")->check(CLI::ExistingFile);
    score_cmd->add_option("--model", model_name, "Model name for the table row");
    score_cmd->add_option("--judge-backend", judge_backend, "Backend for --judge llm: http | stub")
        ->check(CLI::IsMember({"http", "stub"}));
    score_cmd->add_option("--endpoint", endpoint, "Chat-completions URL for the llm judge");
    score_cmd->add_flag("--exclude-unanswered", exclude_unanswered, "Drop unanswered items from denominators");

    auto* validate_cmd = eval_cmd->add_subcommand("validate", "Check a manifest's schema and statistics");
    std::string expected_spec = "published";
    validate_cmd->add_option("--manifest", manifest_path, "Benchmark manifest JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    validate_cmd->add_option("--expected", expected_spec, "published | none | path to a JSON statistics file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            Config config = config_or_default(train_config);
            ToyTask task = make_task(task_name);
            apply_reward_config(task, config);
            std::ofstream file;
            if (!metrics_path.empty()) {
                file.open(metrics_path);
                if (!file) throw InputError("cannot write " + metrics_path);
            }
            std::ostream& out = metrics_path.empty() ? std::cout : file;
            const auto result = train(task.uniform_policy(), task, config.grpo, steps, seed,
                                      [&](const StepMetrics& m) { out << metrics_json(m).dump() << '\n'; });
            const double final_reward = result.metrics.empty() ? 0.0 : result.metrics.back().mean_reward;
            std::fprintf(stderr, "task=%s steps=%d final_mean_reward=%.4f\n", task.name.c_str(), steps, final_reward);
            return 0;
        }

        if (run_cmd->parsed()) {
            Config config = config_or_default(pipeline_config);
            if (max_in_flight > 0) config.pipeline.max_in_flight = max_in_flight;
            if (max_regens >= 0) config.pipeline.max_regens = max_regens;
            if (!endpoint.empty()) config.backend.endpoint = endpoint;
            auto client = make_backend(backend_kind, config.backend, stub_seed, accept_rate);
            const auto summary = run_pipeline(in_path, out_path, *client, config.pipeline);
            std::cout << summary.to_json().dump(2) << '\n';
            return 0;
        }

        if (score_cmd->parsed()) {
            Config config = config_or_default(eval_config);
            if (!endpoint.empty()) config.backend.endpoint = endpoint;
            const JudgeKind kind = judge_kind_from_string(judge_name);
            const Manifest manifest = load_manifest(manifest_path, config.eval.expected);
            for (const auto& e : manifest.report.errors) {
                std::fprintf(stderr, "manifest line %zu: %s\n", e.line, e.message.c_str());
            }
            for (const auto& w : manifest.report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            const auto responses = load_responses(responses_path);

            std::unique_ptr<BackendClient> client;
            if (kind == JudgeKind::llm) client = make_backend(judge_backend, config.backend, 0, 1.0);
            std::vector<Judgement> judgements;
            judgements.reserve(manifest.items.size());
            json verdicts = json::array();
            for (const auto& item : manifest.items) {
                const auto it = responses.find(item.id);
                const std::string response = it == responses.end() ? std::string() : it->second;
                judgements.push_back(judge(item, response, kind, client.get(), config.extraction));
                verdicts.push_back({{"id", item.id},
                                    {"verdict", to_string(judgements.back().verdict)},
                                    {"extracted", judgements.back().extracted}});
            }
            const std::string identity =
                kind == JudgeKind::rules ? std::string("rules") : "llm:" + client->name();
            ScoreOptions options;
            options.exclude_unanswered = exclude_unanswered || config.eval.exclude_unanswered;
            const ScoreReport report = aggregate(manifest.items, judgements, identity, options);
            json j = report.to_json();
            j["model"] = model_name;
            j["manifest"] = manifest.report.to_json();
            j["verdicts"] = verdicts;
            write_json_file(report_path, j);
            std::cout << report.format_table(model_name);
            return manifest.report.ok() ? 0 : 2;
        }

        if (validate_cmd->parsed()) {
            std::optional<ExpectedStats> expected;
            if (expected_spec == "published") {
                expected = ExpectedStats::published();
            } else if (expected_spec != "none") {
                std::ifstream in(expected_spec);
                if (!in) throw ConfigError("cannot open " + expected_spec);
                expected = ExpectedStats::from_json(json::parse(in));
            }
            const Manifest manifest = load_manifest(manifest_path, expected);
            std::cout << manifest.report.to_json().dump(2) << '\n';
            return manifest.report.ok() ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
