#include "pinv/mutator_templates.hpp"

#include <stdexcept>

namespace pinv {

namespace {

constexpr const char* kSystemPrompt =
    R"PROMPT(you are a prompt mutator for text-to-image diffusion models.
given a base prompt and an input image, you must return EXACTLY ONE SINGLE-LINE JSON object.
- lowercase english only; no markdown; no code fences; no trailing commas; no extra text.
- never insert line breaks inside values.
- if the base prompt conflicts with the image, trust the image.
- be concrete and visual; do not invent invisible objects.
- field-specific rules:
  description: 15-35 words, write as a compact comma-separated tag string (not full sentences). include: subject and key attributes or pose, setting/location, composition/shot/angle, lighting, overall color tendency, one brief quality token (e.g., highly detailed or sharp focus), optional material/texture cue, artist, plus up to 2 simple negatives (e.g., no watermark, no text). use only visible facts.
  style: <= 12 words, a short comma-separated tag string of medium/movement/lens/quality only (e.g., digital painting, photorealistic, vector art, isometric, 35mm lens, 85mm lens, film grain, clean render). do not include scene facts or lighting.
  base_prompt: <= 15 words, preserve the original meaning, clearer phrasing, avoid style or lighting tokens.
examples:
 input(base): 'two samurai duel in a bamboo forest'
 output(desc+style): {"description":"bamboo grove, two samurai facing between tall stalks, medium shot, eye-level, dappled sunlight, green tones, foreground leaves, no text","style":"ink illustration, ukiyo-e inspired, paper texture"}
 input(base): 'astronaut and robot on mars at dawn'
 output(modify-desc): {"description":"red dunes, astronaut left of small robot, wide shot, low angle, soft dawn light, cool shadows, distant mountains, no watermark"}
 input(base): 'portrait of an old musician in neon city'
 output(modify-style): {"style":"photorealistic, 85mm lens, cinematic still"}
 input(base): 'a child reading a book under a tree'
 output(paraphrase-base): {"base_prompt":"a child reading beneath a tree"}
)PROMPT";

constexpr const char* kSubjectEnrich =
    R"PROMPT(task: ENRICH the base prompt by inserting concise, image-grounded modifiers WITHOUT changing its syntactic skeleton or word order.
base prompt: '{base_prompt}'
you will receive the IMAGE together with this message. use ONLY details that are VISIBLE in the image.
output schema (single line json): {"base_prompt":"..."}
constraints:
- preserve the original tokens as an ordered subsequence: do not delete, replace, or reorder existing words; no synonym substitution.
- keep the subject–verb–object–prepositional structure intact.
- INSERT 2–6 words total, placed immediately AFTER the nouns/verbs they modify (adjectives/appositives for nouns; short adverbs/adjuncts for verbs).
- allowed insertions: count/quantity (one/two), object attributes (color, size, material), pose/state, simple spatial cues relative to BACKGROUND (e.g., near the fence, in front of the gate), and other concrete scene facts visible in the image.
- forbid insertions about style/lighting/lens/artist or abstract aesthetics (these belong to style).
- if a detail is uncertain or not visible, DO NOT add it; trust the image over the text.
- lowercase only; no quotes; no extra commentary.
examples:
 base: 'a child reading a book under a tree'
 enriched: {'base_prompt':'a small child quietly reading a worn book under a shady tree'}
 base: 'a dog runs across a field'
 enriched: {'base_prompt':'a brown dog runs swiftly across a grassy field'}
return ONLY the json line.
)PROMPT";

constexpr const char* kSubjectFixGrammar =
    R"PROMPT(task: CLEANUP the base prompt by fixing grammar/spelling, removing duplicated words/phrases, and correcting spacing/punctuation ONLY.
base prompt: '{base_prompt}'
output schema (single line json): {"base_prompt":"..."}
constraints:
- do NOT add any new content or modifiers; do NOT introduce synonyms; do NOT reorder clauses.
- preserve the original subject–verb–object–prepositional order and overall sentence structure.
- only remove repeated tokens/phrases, fix typos, collapse multiple spaces, and standardize minimal punctuation.
- keep length approximately unchanged (within ±2 words of the original).
- lowercase only; no quotes; no extra commentary.
return ONLY the json line.
)PROMPT";

constexpr const char* kSubjectParaphrase =
    R"PROMPT(task: PARAPHRASE the base prompt WITHOUT changing its meaning, and enforce the structure:
WHO/WHAT + is doing + WHERE.
base prompt: '{base_prompt}'
output schema (single line json): {"base_prompt":"..."}
constraints:
- <= 15 words total.
- structure must be strictly: <who/what> + 'is/are' + <present participle> + <where-phrase>.
- examples: 'a child is reading under a tree'; 'two samurai are dueling in a bamboo forest'; 'a red car is driving along a rainy street'.
- no style/lighting/lens/artist tokens.
- preserve entities and relations; trust the image if there is a conflict.
- lowercase only; no quotes; no extra commentary.

return ONLY the json line.
)PROMPT";

constexpr const char* kModifierGenerate =
    R"PROMPT(task: generate a NEW description and a NEW style from the base prompt and the image. base prompt: '{base_prompt}'
output schema (single line json): {"description":"...","style":"..."}
constraints:
- description: 15–35 words, compact comma-separated tag string (not full sentences).
- include, in order when possible: subject+attributes/pose, setting, composition/shot/angle, lighting, overall color tendency, one quality token, optional material/texture, artist, up to 2 simple negatives.
- include one explicit spatial or depth cue (e.g., foreground, in front of distant hills).
- style: <= 12 words; medium/movement/lens/quality only; no scene facts; no lighting.
return ONLY the json line.
)PROMPT";

constexpr const char* kModifierStyle =
    R"PROMPT(task: CHANGE STYLE ONLY while preserving entities and relations in the current description.
current style: {style-from-parent}
current description: {description-from-parent}
base prompt: '{base_prompt}'
output schema (single line json): {"style":"..."}
constraints:
- concise comma-separated tag string (<=12 words) of medium/movement/lens/quality.
- do NOT include scene facts or lighting.
- keep the aesthetic consistent; improve clarity or fidelity.
return ONLY the json line.
)PROMPT";

constexpr const char* kModifierDescription =
    R"PROMPT(task: CHANGE DESCRIPTION ONLY while preserving the subject meaning and current style.
current description: {description-from-parent}
current style: {style-from-parent}
base prompt: '{base_prompt}'
output schema (single line json): {"description":"..."}
constraints:
- compact comma-separated tag string (15–35 words).
- include: subject+attributes/pose, setting, composition/shot/angle, lighting, overall color tendency, one quality token, optional material/texture, artist, up to 2 negatives.
- include one explicit spatial or depth cue.
- concrete visible details only; avoid abstractions; do not change the style semantics.
return ONLY the json line.
)PROMPT";


std::string replace_all(std::string text, const std::string& needle, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace

const std::string& mutator_system_prompt() {
    static const std::string prompt = kSystemPrompt;
    return prompt;
}

const std::string& mutator_user_template(MutatorOp op) {
    static const std::string templates[] = {
        kSubjectParaphrase, kSubjectEnrich,        kSubjectFixGrammar,
        kModifierGenerate,  kModifierDescription,  kModifierStyle,
    };
    return templates[static_cast<size_t>(op)];
}

std::string instantiate_user_template(MutatorOp op, const Prompt& seed) {
    std::string text = mutator_user_template(op);
    text = replace_all(text, "{base_prompt}", seed.subject());
    text = replace_all(text, "{description-from-parent}",
                       seed.description() ? *seed.description() : "none");
    text = replace_all(text, "{style-from-parent}", seed.style() ? *seed.style() : "none");
    return text;
}

}  // namespace pinv
