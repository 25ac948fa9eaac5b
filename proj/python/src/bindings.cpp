#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "grpokit/answer_extraction.hpp"
#include "grpokit/backend.hpp"
#include "grpokit/config.hpp"
#include "grpokit/error.hpp"
#include "grpokit/eval.hpp"
#include "grpokit/grpo.hpp"
#include "grpokit/pipeline.hpp"
#include "grpokit/prompts.hpp"
#include "grpokit/reward.hpp"
#include "grpokit/trainer.hpp"

namespace py = pybind11;
using namespace grpokit;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
nlohmann::json parse_json(const std::string& text) {
    return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
}

TemplateName template_from_string(const std::string& name) {
    for (auto t : {TemplateName::generation, TemplateName::roleplay, TemplateName::filter,
                   TemplateName::choice_extraction, TemplateName::free_form_extraction, TemplateName::scoring}) {
        if (to_string(t) == name) return t;
    }
    throw InputError("unknown template '" + name + "'");
}

GroundTruth make_ground_truth(const std::string& kind, const std::string& value, std::optional<double> tolerance,
                              std::optional<std::vector<std::string>> units) {
    GroundTruth gt{ground_truth_kind_from_string(kind), value, tolerance, std::move(units)};
    gt.validate();
    return gt;
}

}  // namespace

PYBIND11_MODULE(_grpokit, m) {
    m.doc() = "Native core of grpokit";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<TemplateError>(m, "TemplateError", PyExc_KeyError);
    py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    py::class_<ExtractedAnswer>(m, "ExtractedAnswer")
        .def_property_readonly("kind", [](const ExtractedAnswer& a) { return std::string(to_string(a.kind)); })
        .def_readonly("value", &ExtractedAnswer::value)
        .def_readonly("unit", &ExtractedAnswer::unit)
        .def("__repr__", [](const ExtractedAnswer& a) {
            return "ExtractedAnswer(kind='" + std::string(to_string(a.kind)) + "', value='" + a.value + "')";
        });

    m.def("extract_boxed", [](const std::string& text) { return extract_boxed(text); }, py::arg("text"));
    m.def("extract_choice", [](const std::string& text) { return extract_choice(text); }, py::arg("text"));
    m.def("extract_free_form", [](const std::string& text) { return extract_free_form(text); }, py::arg("text"));
    m.def(
        "parse_tags",
        [](const std::string& text) {
            const auto t = parse_tags(text);
            return py::make_tuple(t.think, t.answer);
        },
        py::arg("text"), "Returns (think, answer); absent blocks are None.");
    m.def(
        "answers_match",
        [](const ExtractedAnswer& extracted, const std::string& kind, const std::string& value,
           std::optional<double> tolerance, std::optional<std::vector<std::string>> units) {
            return answers_match(extracted, make_ground_truth(kind, value, tolerance, std::move(units)));
        },
        py::arg("extracted"), py::arg("kind"), py::arg("value"), py::arg("tolerance") = py::none(),
        py::arg("accepted_units") = py::none());

    m.def(
        "format_reward",
        [](const std::string& response, const std::string& profile) {
            return format_reward(response, format_profile_from_string(profile));
        },
        py::arg("response"), py::arg("profile") = "think_answer");
    m.def(
        "iou",
        [](std::array<double, 4> a, std::array<double, 4> b) {
            return iou({a[0], a[1], a[2], a[3]}, {b[0], b[1], b[2], b[3]});
        },
        py::arg("a"), py::arg("b"), "Boxes are (x_min, y_min, x_max, y_max).");
    m.def(
        "detection_reward",
        [](const std::vector<std::array<double, 4>>& pred, const std::vector<std::array<double, 4>>& gt) {
            auto convert = [](const std::vector<std::array<double, 4>>& in) {
                std::vector<BoundingBox> out;
                for (const auto& b : in) out.push_back({b[0], b[1], b[2], b[3]});
                return out;
            };
            return detection_reward(convert(pred), convert(gt));
        },
        py::arg("pred"), py::arg("gt"));

    m.def(
        "normalize_rewards",
        [](const std::vector<double>& rewards, double floor) { return normalize_rewards(rewards, floor); },
        py::arg("rewards"), py::arg("std_floor") = 1e-8);
    m.def("clip_ratio", &clip_ratio, py::arg("ratio"), py::arg("epsilon"));
    m.def("kl_estimator", &kl_estimator, py::arg("logp_new"), py::arg("logp_ref"));
    m.def(
        "grpo_loss",
        [](const std::vector<std::vector<double>>& logp_new, const std::vector<std::vector<double>>& logp_ref,
           const std::vector<double>& rewards, const std::string& config_json) {
            if (logp_new.size() != logp_ref.size() || logp_new.size() != rewards.size()) {
                throw InputError("logp_new, logp_ref and rewards must have one entry per rollout");
            }
            nlohmann::json wrapped = {{"grpo", parse_json(config_json)}};
            GrpoConfig cfg = config_from_json(wrapped).grpo;
            cfg.kl_mode = KlMode::estimator;
            Group g;
            for (std::size_t i = 0; i < rewards.size(); ++i) {
                Rollout r;
                r.logp_new = logp_new[i];
                r.logp_ref = logp_ref[i];
                r.tokens.assign(r.logp_new.size(), 0);
                r.states.assign(r.logp_new.size(), 0);
                r.reward = rewards[i];
                g.rollouts.push_back(std::move(r));
            }
            compute_advantages(g, cfg.advantage_std_floor);
            const auto s = grpo_loss(g, cfg);
            py::dict out;
            out["loss"] = s.loss;
            out["surrogate"] = s.surrogate;
            out["kl"] = s.kl;
            out["clip_fraction"] = s.clip_fraction;
            return out;
        },
        py::arg("logp_new"), py::arg("logp_ref"), py::arg("rewards"), py::arg("config_json") = "",
        "GRPO loss of one group from per-token log-probabilities (k3 KL estimator).");

    m.def(
        "train_toy",
        [](const std::string& task_name, int steps, std::uint64_t seed, const std::string& config_json) {
            const Config cfg = config_from_json(parse_json(config_json));
            auto task = make_task(task_name);
            apply_reward_config(task, cfg);
            TrainResult result;
            {
                py::gil_scoped_release release;
                result = train(task.uniform_policy(), task, cfg.grpo, steps, seed);
            }
            py::list metrics;
            for (const auto& s : result.metrics) {
                py::dict d;
                d["step"] = s.step;
                d["mean_reward"] = s.mean_reward;
                d["mean_accuracy"] = s.mean_accuracy;
                d["mean_format"] = s.mean_format;
                d["loss"] = s.loss;
                d["kl"] = s.kl;
                d["clip_fraction"] = s.clip_fraction;
                metrics.append(d);
            }
            return metrics;
        },
        py::arg("task"), py::arg("steps"), py::arg("seed") = 0, py::arg("config_json") = "");

    m.def(
        "render_prompt",
        [](const std::string& name, const std::map<std::string, std::string>& bindings) {
            return render_prompt(builtin_template(template_from_string(name)), Bindings(bindings.begin(), bindings.end()));
        },
        py::arg("template"), py::arg("bindings"));
    m.def("inference_instruction", [] { return std::string(inference_instruction()); });
    m.def("parse_verdict", [](const std::string& reply) {
        switch (parse_verdict(reply)) {
            case Verdict::valid: return "valid";
            case Verdict::invalid: return "invalid";
            default: return "unparseable";
        }
    });

    m.def(
        "run_pipeline_stub",
        [](const std::filesystem::path& input, const std::filesystem::path& output, std::size_t max_in_flight,
           std::uint64_t stub_seed, double accept_rate, int max_regens) {
            StubOptions so;
            so.seed = stub_seed;
            so.accept_rate = accept_rate;
            StubBackend stub(so);
            PipelineOptions po;
            po.max_in_flight = max_in_flight;
            po.max_regens = max_regens;
            PipelineSummary s;
            {
                py::gil_scoped_release release;
                s = run_pipeline(input, output, stub, po);
            }
            return s.to_json().dump();
        },
        py::arg("input"), py::arg("output"), py::arg("max_in_flight") = 4, py::arg("stub_seed") = 0,
        py::arg("accept_rate") = 1.0, py::arg("max_regens") = 0, "Runs the pipeline on the stub backend; JSON summary.");

    m.def(
        "validate_manifest",
        [](const std::filesystem::path& path, bool published) {
            std::optional<ExpectedStats> expected;
            if (published) expected = ExpectedStats::published();
            return load_manifest(path, expected).report.to_json().dump();
        },
        py::arg("path"), py::arg("published") = false);
    m.def(
        "score",
        [](const std::filesystem::path& manifest_path, const std::filesystem::path& responses_path,
           bool exclude_unanswered) {
            const auto manifest = load_manifest(manifest_path);
            if (!manifest.report.ok()) throw SchemaError("manifest has errors");
            const auto responses = load_responses(responses_path);
            std::vector<Judgement> judgements;
            for (const auto& item : manifest.items) {
                const auto it = responses.find(item.id);
                judgements.push_back(judge(item, it == responses.end() ? "" : it->second, JudgeKind::rules));
            }
            return aggregate(manifest.items, judgements, "rules", ScoreOptions{exclude_unanswered}).to_json().dump();
        },
        py::arg("manifest"), py::arg("responses"), py::arg("exclude_unanswered") = false,
        "Scores responses with the rule-based judge; JSON report.");
}
