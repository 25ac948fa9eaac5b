#include "grpokit/prompts.hpp"

#include <algorithm>
#include <array>

#include "grpokit/error.hpp"

namespace grpokit {

namespace {

constexpr std::string_view kGeneration =
    "Answer the question and provide your reasoning process, including the following:\n"
    "1. Simulate image reasoning: Treat the image caption as an image. Simulate reasoning by imagining you are "
    "looking at the image, and act as if you can see it. However, avoid visualization as a step in the reasoning "
    "process.\n"
    "2. Direct visual language: Frame observations as if you are directly viewing the image (e.g., \"The image "
    "shows...\"). Avoid reasoning through image caption or description.\n"
    "3. Forbidden phrases: Avoid phrases like \"based on the caption\", \"based on the description\", "
    "\"visualizing the image\".\n"
    "Question: {question}\n"
    "Image Content: {caption}.";

constexpr std::string_view kRoleplay =
    "Revise the provided Chain of Thought (CoT) to follow these guidelines:\n"
    "1. Style Shift: Convert all references to image description-based reasoning into direct image-based "
    "reasoning. For example: Replace phrases like \"based on the description\" \"based on the caption\" with "
    "\"the image shows\" or \"as seen in the image\".\n"
    "2. Remove image visualization step: If the CoT contains an inference step for image visualization, remove "
    "it and rewrite the CoT to reflect reasoning directly on the image itself, rather than reasoning after "
    "visualization from the image description.\n"
    "Apply these changes rigorously to ensure that the final CoT reflects direct image interpretation, "
    "uninfluenced by description, caption, image visualization.\n"
    "CoT: {cot}";

constexpr std::string_view kFilter =
    "Give your assistant's response. This response is the reasoning steps for the assistant to solve the "
    "problem. Please follow the following rules to evaluate whether the assistant's response is valid.\n"
    "Rules for judging as valid:\n"
    "1. The assistant's response has correct reasoning steps.\n"
    "2. The assistant's response has the final reasoning answer, and the final reasoning answer is consistent "
    "with the meaning of the standard answer.\n"
    "3. The assistant's response is based on the reasoning process of the image, not the image description or "
    "caption.\n"
    "4. There are no steps in the assistant's response that are irrelevant to the reasoning, and each reasoning "
    "step is closely related.\n"
    "Standard answer: {gt}\n"
    "Assistant's response: {augmented answer}\n"
    "Output:";

constexpr std::string_view kChoiceExtraction =
    "Below is a thought process and an answer that includes the final choices. Please extract only the final "
    "choices (A, B, C, D, etc.) from the text and do not return any other words. If the final choice is not "
    "explicitly stated in the text, output NONE. No reasoning is required; just extract the answer.\n"
    "\n"
    "{response}";

constexpr std::string_view kFreeFormExtraction =
    "The following is a thought process and a free-form answer. Please extract the numerical value or text of "
    "the final answer, excluding any explanation. If the final answer cannot be extracted from the given text, "
    "output NONE. No reasoning is required; just extract the answer.\n"
    "\n"
    "{response}";

constexpr std::string_view kScoring =
    "Compare 'final answer' with 'groundtruth'. If final answer matches 'groundtruth', output YES; otherwise, "
    "output NO. Do not return any extra words. For numerical answers with units, if 'final answer' contains the "
    "unit but its numeric value matches 'groundtruth', consider it a match.\n"
    "\n"
    "final answer: {extracted}\n"
    "groundtruth: {gt}";

constexpr std::string_view kInference =
    "First output the thinking process in <think> </think> tags and then output the final answer in <answer> "
    "</answer> tags.";

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == ' ' || c == '_'; }

// Name of a placeholder starting at body[pos] == '{', or empty if the braces
// do not enclose a valid name.
std::string_view placeholder_at(std::string_view body, std::size_t pos) {
    const auto close = body.find('}', pos + 1);
    if (close == std::string_view::npos || close == pos + 1) return {};
    const auto name = body.substr(pos + 1, close - pos - 1);
    if (!std::all_of(name.begin(), name.end(), is_placeholder_char)) return {};
    if (name.front() == ' ' || name.back() == ' ') return {};
    return name;
}

}  // namespace

std::string_view to_string(TemplateName name) {
    switch (name) {
        case TemplateName::generation: return "generation";
        case TemplateName::roleplay: return "roleplay";
        case TemplateName::filter: return "filter";
        case TemplateName::choice_extraction: return "choice_extraction";
        case TemplateName::free_form_extraction: return "free_form_extraction";
        case TemplateName::scoring: return "scoring";
    }
    return "generation";
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    for (std::size_t pos = body.find('{'); pos != std::string::npos; pos = body.find('{', pos + 1)) {
        const auto name = placeholder_at(body, pos);
        if (name.empty()) continue;
        if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
    }
    return names;
}

const PromptTemplate& builtin_template(TemplateName name) {
    static const std::array<PromptTemplate, 6> templates{{
        {TemplateName::generation, std::string(kGeneration)},
        {TemplateName::roleplay, std::string(kRoleplay)},
        {TemplateName::filter, std::string(kFilter)},
        {TemplateName::choice_extraction, std::string(kChoiceExtraction)},
        {TemplateName::free_form_extraction, std::string(kFreeFormExtraction)},
        {TemplateName::scoring, std::string(kScoring)},
    }};
    return templates[static_cast<std::size_t>(name)];
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
    const std::string_view body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        out.append(body.substr(pos, open - pos));
        const auto name = placeholder_at(body, open);
        if (name.empty()) {
            out.push_back('{');
            pos = open + 1;
            continue;
        }
        const auto it = bindings.find(name);
        if (it == bindings.end()) throw TemplateError(std::string(name));
        out.append(it->second);
        pos = open + name.size() + 2;
    }
    return out;
}

std::string_view inference_instruction() { return kInference; }

}  // namespace grpokit
