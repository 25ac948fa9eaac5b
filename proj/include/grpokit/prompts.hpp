#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace grpokit {

enum class TemplateName {
    generation,            // caption + question -> chain of thought
    roleplay,              // caption-based CoT -> image-grounded CoT
    filter,                // CoT validity check against the standard answer
    choice_extraction,     // judge: pull the final option letter out of a response
    free_form_extraction,  // judge: pull the final value out of a response
    scoring,               // judge: compare extracted answer with ground truth
};

std::string_view to_string(TemplateName name);

struct PromptTemplate {
    TemplateName name;
    std::string body;  // placeholders written as {name}; names may contain spaces

    /// Placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

const PromptTemplate& builtin_template(TemplateName name);

/// Single-pass substitution: binding values are inserted verbatim and never
/// rescanned. Throws TemplateError naming the first unbound placeholder.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

/// Fixed instruction the toy tasks and evaluation prompts share with the
/// policy: reasoning in think tags, final answer in answer tags.
std::string_view inference_instruction();

}  // namespace grpokit
