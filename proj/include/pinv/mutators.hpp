#pragma once

#include <array>
#include <optional>
#include <string>

#include "pinv/core.hpp"

namespace pinv {

enum class MutatorOp {
    subject_paraphrase,
    subject_enrich,
    subject_fix_grammar,
    modifier_generate,
    modifier_description,
    modifier_style,
};

enum class MutatorPhase { subject, modifier, any };

constexpr std::array<MutatorOp, 6> all_mutator_ops = {
    MutatorOp::subject_paraphrase,  MutatorOp::subject_enrich,
    MutatorOp::subject_fix_grammar, MutatorOp::modifier_generate,
    MutatorOp::modifier_description, MutatorOp::modifier_style,
};

const std::string& mutator_op_name(MutatorOp op);
std::optional<MutatorOp> mutator_op_from_name(const std::string& name);
MutatorPhase mutator_op_phase(MutatorOp op);

// Word-count / structure constraints from the operator templates, applied to
// every mutator output regardless of backend. Returns an error message on
// violation, nullopt when the output is admissible.
std::optional<std::string> validate_mutation(MutatorOp op, const Prompt& seed, const Prompt& out);

// True when `sub` appears in `full` as an ordered subsequence.
bool is_ordered_subsequence(const std::vector<std::string>& sub,
                            const std::vector<std::string>& full);

}  // namespace pinv
