#include "pinv/mutators.hpp"

#include <stdexcept>

namespace pinv {

const std::string& mutator_op_name(MutatorOp op) {
    static const std::string names[] = {
        "subject_paraphrase",  "subject_enrich",      "subject_fix_grammar",
        "modifier_generate",   "modifier_description", "modifier_style",
    };
    return names[static_cast<size_t>(op)];
}

std::optional<MutatorOp> mutator_op_from_name(const std::string& name) {
    for (MutatorOp op : all_mutator_ops) {
        if (mutator_op_name(op) == name) return op;
    }
    return std::nullopt;
}

MutatorPhase mutator_op_phase(MutatorOp op) {
    switch (op) {
        case MutatorOp::subject_paraphrase:
        case MutatorOp::subject_enrich:
            return MutatorPhase::subject;
        case MutatorOp::subject_fix_grammar:
            return MutatorPhase::any;
        case MutatorOp::modifier_generate:
        case MutatorOp::modifier_description:
        case MutatorOp::modifier_style:
            return MutatorPhase::modifier;
    }
    throw std::logic_error("unknown mutator op");
}

bool is_ordered_subsequence(const std::vector<std::string>& sub,
                            const std::vector<std::string>& full) {
    size_t i = 0;
    for (const auto& w : full) {
        if (i < sub.size() && w == sub[i]) ++i;
    }
    return i == sub.size();
}

std::optional<std::string> validate_mutation(MutatorOp op, const Prompt& seed, const Prompt& out) {
    const int seed_subject_words = word_count(seed.subject());
    const int out_subject_words = word_count(out.subject());
    switch (op) {
        case MutatorOp::subject_paraphrase:
            if (out_subject_words > 15) return "paraphrase: subject exceeds 15 words";
            return std::nullopt;
        case MutatorOp::subject_enrich: {
            const int inserted = out_subject_words - seed_subject_words;
            if (inserted < 2 || inserted > 6) return "enrich: must insert 2-6 words";
            if (!is_ordered_subsequence(split_words(seed.subject()), split_words(out.subject()))) {
                return "enrich: original tokens not preserved as ordered subsequence";
            }
            return std::nullopt;
        }
        case MutatorOp::subject_fix_grammar: {
            const int delta = out_subject_words - seed_subject_words;
            if (delta < -2 || delta > 2) return "fix_grammar: length changed by more than 2 words";
            return std::nullopt;
        }
        case MutatorOp::modifier_generate: {
            if (!out.description()) return "modifier_generate: missing description";
            if (!out.style()) return "modifier_generate: missing style";
            const int dw = word_count(*out.description());
            if (dw < 15 || dw > 35) return "modifier_generate: description must be 15-35 words";
            if (word_count(*out.style()) > 12) return "modifier_generate: style exceeds 12 words";
            return std::nullopt;
        }
        case MutatorOp::modifier_description: {
            if (!out.description()) return "modifier_description: missing description";
            const int dw = word_count(*out.description());
            if (dw < 15 || dw > 35) return "modifier_description: description must be 15-35 words";
            return std::nullopt;
        }
        case MutatorOp::modifier_style: {
            if (!out.style()) return "modifier_style: missing style";
            if (word_count(*out.style()) > 12) return "modifier_style: style exceeds 12 words";
            return std::nullopt;
        }
    }
    return "unknown operator";
}

}  // namespace pinv
