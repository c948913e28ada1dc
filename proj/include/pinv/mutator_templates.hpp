#pragma once

#include <string>

#include "pinv/core.hpp"
#include "pinv/mutators.hpp"

namespace pinv {

// Immutable prompt resources sent to a remote mutator service. Stored
// verbatim; covered by byte-equality tests. Placeholders: {base_prompt},
// {description-from-parent}, {style-from-parent}.
const std::string& mutator_system_prompt();
const std::string& mutator_user_template(MutatorOp op);

// Placeholder substitution against the seed prompt; absent modifiers
// substitute as "none".
std::string instantiate_user_template(MutatorOp op, const Prompt& seed);

}  // namespace pinv
