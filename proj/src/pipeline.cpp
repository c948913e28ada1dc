#include "pinv/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pinv/io.hpp"
#include "pinv/png_io.hpp"
#include "pinv/remote.hpp"
#include "pinv/rl_env.hpp"

namespace pinv {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (backend != "synthetic" && backend != "remote") {
        throw std::invalid_argument("RunConfig: backend must be synthetic or remote");
    }
    if (backend == "remote" && (generator_url.empty() || embedder_url.empty())) {
        throw std::invalid_argument("RunConfig: remote backend requires endpoint URLs");
    }
    if (target_subject.empty() && target_image_path.empty()) {
        throw std::invalid_argument("RunConfig: target prompt or target image required");
    }
    if (seeds.empty()) throw std::invalid_argument("RunConfig: at least one seed");
    if (rl_budget < 1 || fuzz_budget < 1) throw std::invalid_argument("RunConfig: budgets >= 1");
    ppo.validate();
    potential.validate();
    defense.validate();
    defense_kind_from_name(defense_kind);
}

namespace {

json mutator_weights_to_json(const std::map<MutatorOp, double>& weights) {
    json j = json::object();
    for (const auto& [op, w] : weights) j[mutator_op_name(op)] = w;
    return j;
}

std::map<MutatorOp, double> mutator_weights_from_json(const json& j) {
    std::map<MutatorOp, double> out;
    for (const auto& [name, w] : j.items()) {
        auto op = mutator_op_from_name(name);
        if (!op) throw std::invalid_argument("unknown mutator operator: " + name);
        out[*op] = w.get<double>();
    }
    return out;
}

}  // namespace

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["backend"] = c.backend;
    j["generator_url"] = c.generator_url;
    j["embedder_url"] = c.embedder_url;
    j["mutator_url"] = c.mutator_url;
    j["scorer_url"] = c.scorer_url;
    j["bearer_token"] = c.bearer_token;
    j["remote_timeout_s"] = c.remote_timeout_s;
    j["remote_retries"] = c.remote_retries;
    j["synthetic"] = {{"seed", c.synthetic.seed},
                      {"embed_dim", c.synthetic.embed_dim},
                      {"hidden_dim", c.synthetic.hidden_dim},
                      {"vocab_size", c.synthetic.vocab_size},
                      {"image_width", c.synthetic.image_width},
                      {"image_height", c.synthetic.image_height}};
    j["target_subject"] = c.target_subject;
    j["target_description"] = c.target_description;
    j["target_style"] = c.target_style;
    j["target_image_path"] = c.target_image_path;
    j["reference_prompt"] = c.reference_prompt;
    j["initial_subject"] = c.initial_subject;
    j["run_phase1"] = c.run_phase1;
    j["run_phase2"] = c.run_phase2;
    j["rl_budget"] = c.rl_budget;
    j["fuzz_budget"] = c.fuzz_budget;
    j["max_len"] = c.max_len;
    j["il"] = {{"n_trajectories", c.il.n_trajectories}, {"epochs", c.il.epochs},
               {"learning_rate", c.il.learning_rate},   {"batch_size", c.il.batch_size},
               {"sample_decode", c.il.sample_decode}};
    j["ppo"] = {{"gamma", c.ppo.gamma},
                {"clip_eps", c.ppo.clip_eps},
                {"gae_lambda", c.ppo.gae_lambda},
                {"actor_lr", c.ppo.actor_lr},
                {"critic_lr", c.ppo.critic_lr},
                {"update_every", c.ppo.update_every},
                {"epochs_per_update", c.ppo.epochs_per_update},
                {"max_epochs", c.ppo.max_epochs},
                {"use_shaping", c.ppo.use_shaping},
                {"critic_shift_phi", c.ppo.critic_shift_phi},
                {"normalize_advantages", c.ppo.normalize_advantages},
                {"value_coef", c.ppo.value_coef},
                {"entropy_coef", c.ppo.entropy_coef},
                {"early_stop_patience", c.ppo.early_stop_patience}};
    j["potential"] = {{"beta", c.potential.beta}, {"gamma", c.potential.gamma}};
    j["fuzz"] = {{"budget", c.fuzz.budget},
                 {"pool_capacity", c.fuzz.pool_capacity},
                 {"subject_only_queries", c.fuzz.subject_only_queries},
                 {"exploration_c", c.fuzz.exploration_c},
                 {"mutator_retries", c.fuzz.mutator_retries},
                 {"mutator_weights", mutator_weights_to_json(c.fuzz.mutator_weights)}};
    j["defense"] = {{"noise_sigma", c.defense.noise_sigma},
                    {"grid", c.defense.grid},
                    {"shift_limit", c.defense.shift_limit},
                    {"wm_text", c.defense.wm_text},
                    {"wm_font_px", c.defense.wm_font_px},
                    {"wm_row_gap", c.defense.wm_row_gap},
                    {"wm_col_gap", c.defense.wm_col_gap},
                    {"wm_alpha", c.defense.wm_alpha}};
    j["defense_kind"] = c.defense_kind;
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig c;
    auto get = [](const json& obj, const char* key, auto& field) {
        if (obj.contains(key)) field = obj[key].template get<std::decay_t<decltype(field)>>();
    };
    get(j, "backend", c.backend);
    get(j, "generator_url", c.generator_url);
    get(j, "embedder_url", c.embedder_url);
    get(j, "mutator_url", c.mutator_url);
    get(j, "scorer_url", c.scorer_url);
    get(j, "bearer_token", c.bearer_token);
    get(j, "remote_timeout_s", c.remote_timeout_s);
    get(j, "remote_retries", c.remote_retries);
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        get(s, "seed", c.synthetic.seed);
        get(s, "embed_dim", c.synthetic.embed_dim);
        get(s, "hidden_dim", c.synthetic.hidden_dim);
        get(s, "vocab_size", c.synthetic.vocab_size);
        get(s, "image_width", c.synthetic.image_width);
        get(s, "image_height", c.synthetic.image_height);
    }
    get(j, "target_subject", c.target_subject);
    get(j, "target_description", c.target_description);
    get(j, "target_style", c.target_style);
    get(j, "target_image_path", c.target_image_path);
    get(j, "reference_prompt", c.reference_prompt);
    get(j, "initial_subject", c.initial_subject);
    get(j, "run_phase1", c.run_phase1);
    get(j, "run_phase2", c.run_phase2);
    get(j, "rl_budget", c.rl_budget);
    get(j, "fuzz_budget", c.fuzz_budget);
    get(j, "max_len", c.max_len);
    if (j.contains("il")) {
        const auto& s = j["il"];
        get(s, "n_trajectories", c.il.n_trajectories);
        get(s, "epochs", c.il.epochs);
        get(s, "learning_rate", c.il.learning_rate);
        get(s, "batch_size", c.il.batch_size);
        get(s, "sample_decode", c.il.sample_decode);
    }
    if (j.contains("ppo")) {
        const auto& s = j["ppo"];
        get(s, "gamma", c.ppo.gamma);
        get(s, "clip_eps", c.ppo.clip_eps);
        get(s, "gae_lambda", c.ppo.gae_lambda);
        get(s, "actor_lr", c.ppo.actor_lr);
        get(s, "critic_lr", c.ppo.critic_lr);
        get(s, "update_every", c.ppo.update_every);
        get(s, "epochs_per_update", c.ppo.epochs_per_update);
        get(s, "max_epochs", c.ppo.max_epochs);
        get(s, "use_shaping", c.ppo.use_shaping);
        get(s, "critic_shift_phi", c.ppo.critic_shift_phi);
        get(s, "normalize_advantages", c.ppo.normalize_advantages);
        get(s, "value_coef", c.ppo.value_coef);
        get(s, "entropy_coef", c.ppo.entropy_coef);
        get(s, "early_stop_patience", c.ppo.early_stop_patience);
    }
    if (j.contains("potential")) {
        const auto& s = j["potential"];
        get(s, "beta", c.potential.beta);
        get(s, "gamma", c.potential.gamma);
    }
    if (j.contains("fuzz")) {
        const auto& s = j["fuzz"];
        get(s, "budget", c.fuzz.budget);
        get(s, "pool_capacity", c.fuzz.pool_capacity);
        get(s, "subject_only_queries", c.fuzz.subject_only_queries);
        get(s, "exploration_c", c.fuzz.exploration_c);
        get(s, "mutator_retries", c.fuzz.mutator_retries);
        if (s.contains("mutator_weights")) {
            c.fuzz.mutator_weights = mutator_weights_from_json(s["mutator_weights"]);
        }
    }
    if (j.contains("defense")) {
        const auto& s = j["defense"];
        get(s, "noise_sigma", c.defense.noise_sigma);
        get(s, "grid", c.defense.grid);
        get(s, "shift_limit", c.defense.shift_limit);
        get(s, "wm_text", c.defense.wm_text);
        get(s, "wm_font_px", c.defense.wm_font_px);
        get(s, "wm_row_gap", c.defense.wm_row_gap);
        get(s, "wm_col_gap", c.defense.wm_col_gap);
        get(s, "wm_alpha", c.defense.wm_alpha);
    }
    get(j, "defense_kind", c.defense_kind);
    get(j, "seeds", c.seeds);
    get(j, "output_dir", c.output_dir);
    return c;
}

std::string run_report_to_json(const RunReport& r) {
    json j;
    j["best_prompt"] = r.best_prompt;
    j["image_similarity"] = r.image_similarity;
    if (r.textual) {
        j["textual"] = {{"precision", r.textual->precision},
                        {"recall", r.textual->recall},
                        {"f1", r.textual->f1},
                        {"sentence", r.textual->sentence}};
    }
    j["rl_queries_used"] = r.rl_queries_used;
    j["fuzz_queries_used"] = r.fuzz_queries_used;
    j["wall_time_s"] = r.wall_time_s;
    return j.dump(2) + "\n";
}

RunReport run_report_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunReport r;
    r.best_prompt = j.at("best_prompt").get<std::string>();
    r.image_similarity = j.at("image_similarity").get<double>();
    if (j.contains("textual")) {
        TextualAlignment t;
        t.precision = j["textual"].at("precision").get<double>();
        t.recall = j["textual"].at("recall").get<double>();
        t.f1 = j["textual"].at("f1").get<double>();
        t.sentence = j["textual"].at("sentence").get<double>();
        r.textual = t;
    }
    r.rl_queries_used = j.at("rl_queries_used").get<uint64_t>();
    r.fuzz_queries_used = j.at("fuzz_queries_used").get<uint64_t>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
}

namespace {

struct BackendSet {
    std::unique_ptr<SyntheticBackends> synthetic;
    std::unique_ptr<RemoteGenerator> remote_generator;
    std::unique_ptr<RemoteEmbedder> remote_embedder;
    std::unique_ptr<RemoteMutator> remote_mutator;

    Generator* generator = nullptr;
    Embedder* embedder = nullptr;
    Captioner* captioner = nullptr;  // synthetic only
    Mutator* mutator = nullptr;
    SyntheticVocab* vocab = nullptr;
};

BackendSet make_backends(const RunConfig& cfg) {
    BackendSet set;
    if (cfg.backend == "synthetic") {
        set.synthetic = std::make_unique<SyntheticBackends>(cfg.synthetic);
        set.generator = set.synthetic->generator.get();
        set.embedder = set.synthetic->embedder.get();
        set.captioner = set.synthetic->captioner.get();
        set.mutator = set.synthetic->mutator.get();
        set.vocab = &set.synthetic->vocab;
    } else {
        RemoteConfig base{cfg.generator_url, cfg.bearer_token, cfg.remote_timeout_s,
                          cfg.remote_retries};
        set.remote_generator = std::make_unique<RemoteGenerator>(base);
        RemoteConfig emb = base;
        emb.base_url = cfg.embedder_url;
        set.remote_embedder = std::make_unique<RemoteEmbedder>(emb);
        RemoteConfig mut = base;
        mut.base_url = cfg.mutator_url.empty() ? cfg.embedder_url : cfg.mutator_url;
        set.remote_mutator = std::make_unique<RemoteMutator>(mut);
        set.generator = set.remote_generator.get();
        set.embedder = set.remote_embedder.get();
        set.mutator = set.remote_mutator.get();
        // The RL phase trains against in-process captioners only; remote runs
        // start phase II from the configured subject.
    }
    return set;
}

Prompt target_prompt_of(const RunConfig& cfg) {
    return Prompt(cfg.target_subject,
                  cfg.target_description.empty() ? std::nullopt
                                                 : std::make_optional(cfg.target_description),
                  cfg.target_style.empty() ? std::nullopt : std::make_optional(cfg.target_style));
}

TextualAlignment textual_metrics(Embedder& embedder, const std::string& candidate,
                                 const std::string& reference) {
    std::vector<EmbeddingVector> cand_tokens, ref_tokens;
    for (const auto& w : bag_words(candidate)) cand_tokens.push_back(embedder.embed_text(w));
    for (const auto& w : bag_words(reference)) ref_tokens.push_back(embedder.embed_text(w));
    TextualAlignment t;
    const BertScore bs = bertscore(cand_tokens, ref_tokens);
    t.precision = bs.precision;
    t.recall = bs.recall;
    t.f1 = bs.f1;
    t.sentence = sentence_alignment(embedder.embed_text(candidate), embedder.embed_text(reference));
    return t;
}

RunReport run_single_seed(const RunConfig& cfg, uint64_t seed, const fs::path& out_dir,
                          DefenseKind defense) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);

    BackendSet backends = make_backends(cfg);

    // --- target ---
    ImageBuffer target_image(1, 1);
    if (!cfg.target_image_path.empty()) {
        target_image = read_png_file(cfg.target_image_path);
    } else {
        if (cfg.backend != "synthetic") {
            throw std::invalid_argument("remote runs need target_image_path");
        }
        target_image = backends.synthetic->generator->render_image(target_prompt_of(cfg).render());
    }
    if (defense != DefenseKind::none) {
        Rng defense_rng(seed ^ hash_string("defense"));
        target_image = apply_defense(target_image, defense, cfg.defense, defense_rng);
    }
    write_png_file(out_dir / "target.png", target_image);
    const EmbeddingVector target_embedding = backends.embedder->embed_image(target_image);

    RunReport report;

    // --- phase I: IL warm-start + PPO ---
    std::string rl_subject;
    QueryLedger rl_ledger(cfg.rl_budget);
    if (cfg.run_phase1 && backends.captioner != nullptr) {
        PolicyNet policy(backends.captioner->hidden_dim(), 2 * backends.captioner->hidden_dim(),
                         backends.captioner->head(), seed);
        IlConfig il = cfg.il;
        il.seed = seed;
        il.max_len = cfg.max_len;
        const auto trajectories = collect_expert(*backends.captioner, target_embedding, il);
        const IlResult il_result = train_il(policy, trajectories, il);
        write_il_loss_csv(out_dir / "il_loss.csv", il_result.loss_curve);

        PotentialConfig pot = cfg.potential;
        pot.gamma = cfg.ppo.gamma;
        PromptEnv env(*backends.vocab, *backends.generator, *backends.embedder, rl_ledger, pot,
                      cfg.max_len);
        PpoConfig ppo = cfg.ppo;
        ppo.seed = seed;
        const PpoTrainResult ppo_result =
            train_ppo(policy, env, *backends.captioner, target_embedding, ppo, rl_ledger);
        write_ppo_curve_csv(out_dir / "ppo_curve.csv", ppo_result.curve);
        write_episodes_jsonl(out_dir / "episodes.jsonl", ppo_result.episodes);
        save_checkpoint(out_dir / "policy.ckpt",
                        const_cast<const PolicyNet&>(policy).all_tensors());
        rl_subject = ppo_result.best_prompt;
        report.image_similarity = ppo_result.best_score;
        report.best_prompt = ppo_result.best_prompt;
    }
    report.rl_queries_used = rl_ledger.used();

    // Fallback initialization: configured caption, captioner greedy decode,
    // then a fixed word.
    if (rl_subject.empty() && !cfg.initial_subject.empty()) {
        rl_subject = cfg.initial_subject;
    }
    if (rl_subject.empty() && backends.captioner != nullptr && backends.vocab != nullptr) {
        IlConfig greedy;
        greedy.n_trajectories = 1;
        greedy.max_len = cfg.max_len;
        const auto traj = collect_expert(*backends.captioner, target_embedding, greedy);
        std::vector<TokenId> tokens;
        for (const auto& p : traj.front().pairs) tokens.push_back(p.next_token);
        rl_subject = backends.vocab->detokenize(tokens);
    }
    if (rl_subject.empty()) rl_subject = "image";

    // --- phase II: fuzz ---
    if (cfg.run_phase2) {
        FuzzConfig fz = cfg.fuzz;
        fz.budget = cfg.fuzz_budget;
        fz.seed = seed;
        FuzzBackends fb{*backends.generator, *backends.embedder, *backends.mutator};
        const FuzzResult fuzz_result = run_fuzz(Prompt(rl_subject), target_image, fz, fb);
        write_pool_history(out_dir / "pool_history.jsonl", fuzz_result.history);
        write_fuzz_curve_csv(out_dir / "curve.csv", fuzz_result.history);
        report.best_prompt = fuzz_result.best.prompt.render();
        report.image_similarity = fuzz_result.best.score;
        report.fuzz_queries_used = fuzz_result.history.empty()
                                       ? 0
                                       : fuzz_result.history.back().ledger_used;
    }

    write_text_file(out_dir / "best_prompt.txt", report.best_prompt + "\n");

    if (!cfg.reference_prompt.empty()) {
        report.textual = textual_metrics(*backends.embedder, report.best_prompt,
                                         cfg.reference_prompt);
    } else if (cfg.backend == "synthetic" && cfg.target_image_path.empty()) {
        report.textual = textual_metrics(*backends.embedder, report.best_prompt,
                                         target_prompt_of(cfg).render());
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text_file(out_dir / "report.json", run_report_to_json(report));
    return report;
}

}  // namespace

RunReport run_pipeline(const RunConfig& cfg) {
    return evaluate_robustness(cfg, defense_kind_from_name(cfg.defense_kind));
}

RunReport evaluate_robustness(const RunConfig& cfg, DefenseKind defense) {
    cfg.validate();
    // The persisted config always reflects the defense actually applied, so
    // re-running from it reproduces this run.
    RunConfig persisted = cfg;
    persisted.defense_kind = defense_kind_name(defense);
    const fs::path out_root(cfg.output_dir);
    fs::create_directories(out_root);
    write_text_file(out_root / "config.resolved", run_config_to_json(persisted));

    std::optional<RunReport> first;
    for (uint64_t seed : cfg.seeds) {
        const fs::path seed_dir = out_root / ("seed_" + std::to_string(seed));
        try {
            RunReport r = run_single_seed(cfg, seed, seed_dir, defense);
            if (!first) first = r;
        } catch (const std::exception& e) {
            // Marker write must never mask the original failure.
            std::error_code ec;
            fs::create_directories(seed_dir, ec);
            try {
                write_text_file(seed_dir / "FAILED", std::string(e.what()) + "\n");
            } catch (...) {
            }
            throw;
        }
    }
    return *first;
}

ComparisonResult report_runs(const std::vector<fs::path>& run_dirs) {
    ComparisonResult out;
    std::ostringstream text, csv;
    csv << "run,best_prompt,image_similarity,bert_p,bert_r,bert_f1,sentence,rl_queries,"
           "fuzz_queries\n";
    text << "run | image_sim | f1 | sentence | best prompt\n";
    for (const auto& dir : run_dirs) {
        try {
            const RunReport r = run_report_from_json(read_text_file(dir / "report.json"));
            out.rows.push_back({dir.string(), r});
            csv << dir.string() << ",\"" << r.best_prompt << "\"," << format_double(r.image_similarity);
            if (r.textual) {
                csv << ',' << format_double(r.textual->precision) << ','
                    << format_double(r.textual->recall) << ',' << format_double(r.textual->f1)
                    << ',' << format_double(r.textual->sentence);
            } else {
                csv << ",,,,";
            }
            csv << ',' << r.rl_queries_used << ',' << r.fuzz_queries_used << '\n';
            text << dir.string() << " | " << format_double(r.image_similarity) << " | "
                 << (r.textual ? format_double(r.textual->f1) : "-") << " | "
                 << (r.textual ? format_double(r.textual->sentence) : "-") << " | "
                 << r.best_prompt << '\n';
        } catch (const std::exception& e) {
            out.warnings.push_back(dir.string() + ": " + e.what());
        }
    }
    out.table_text = text.str();
    out.table_csv = csv.str();
    return out;
}

std::string merge_curves_csv(const std::vector<fs::path>& run_dirs, const std::string& curve_file,
                             const std::string& index_column) {
    std::vector<std::vector<std::string>> columns;  // per run, indexed rows
    std::vector<std::string> names;
    size_t max_rows = 0;
    for (const auto& dir : run_dirs) {
        std::ifstream is(dir / curve_file);
        if (!is) continue;
        std::string line;
        std::getline(is, line);  // header
        std::vector<std::string> values;
        while (std::getline(is, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            values.push_back(line.substr(comma + 1));
        }
        max_rows = std::max(max_rows, values.size());
        columns.push_back(std::move(values));
        names.push_back(dir.string());
    }
    std::ostringstream os;
    os << index_column;
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (size_t row = 0; row < max_rows; ++row) {
        os << row;
        for (const auto& col : columns) {
            os << ',';
            if (row < col.size()) os << col[row];
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace pinv
