// tdti: command-line front end.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tdti/data/pipeline.hpp"
#include "tdti/error.hpp"
#include "tdti/io/embeddings.hpp"
#include "tdti/io/interactions.hpp"
#include "tdti/io/projections.hpp"
#include "tdti/io/synthetic.hpp"
#include "tdti/metrics.hpp"
#include "tdti/model/checkpoint.hpp"
#include "tdti/screening.hpp"
#include "tdti/train/trainer.hpp"
#include "tdti/util/log.hpp"
#include "tdti/util/rng.hpp"
#include "tdti/util/tsv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tdti;

namespace {

// ---------------------------------------------------------------------------
// Config file: key = value lines, '#' comments, [section] headers ignored.

const std::set<std::string> kKnownKeys = {
    // gen-synth
    "n_drugs", "n_targets", "drug_dim", "protein_dim", "pocket_dim", "n_latent_factors", "noise", "affinity_base",
    "affinity_bilinear",
    // split
    "strategy", "train_fraction", "valid_fraction", "test_fraction", "balance_train", "kd_threshold", "neg_ratio",
    // model
    "hidden_dim", "output_dim", "latent_dim", "max_len", "lambda_protein", "lambda_pocket", "use_pockets", "alpha_cls",
    "alpha_con", "alpha_conf", "alpha_recon", "contrastive", "margin", "triplet_margin", "unfamiliarity_eps",
    "regression_error_scale",
    // train
    "lr", "weight_decay", "max_epochs", "patience", "batch_size", "runs", "eval_metric",
    // screening
    "unf_threshold", "trials", "k_grid",
    // shared
    "mode", "seed", "threads"};

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
    return s;
}

class Settings {
public:
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::Io, "cannot open config '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty() || line.front() == '[') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) fail(ErrorKind::Config, path + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (!kKnownKeys.count(key)) fail(ErrorKind::Config, path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
            values_[key] = unquote(trim(line.substr(eq + 1)));
        }
    }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string str(const std::string& key, const std::string& def) const {
        const auto it = values_.find(key);
        used_[key] = it == values_.end() ? def : it->second;
        return used_[key];
    }
    double real(const std::string& key, double def) const {
        if (!has(key)) {
            used_[key] = format_real(def);
            return def;
        }
        return parse_real(str(key, ""), "config key '" + key + "'");
    }
    long long integer(const std::string& key, long long def) const {
        if (!has(key)) {
            used_[key] = std::to_string(def);
            return def;
        }
        return parse_int(str(key, ""), "config key '" + key + "'");
    }
    bool boolean(const std::string& key, bool def) const {
        const std::string v = str(key, def ? "true" : "false");
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        fail(ErrorKind::Config, "config key '" + key + "' must be true or false");
    }
    /// Resolved values actually read, for hashing into the manifest.
    json resolved() const { return json(used_); }

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> used_;
};

std::vector<double> parse_real_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_real(item, what));
    }
    if (out.empty()) fail(ErrorKind::Usage, what + " is empty");
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex(fnv1a(ss.str()));
}

struct Run {
    std::string command;
    Settings settings;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> inputs;
    std::vector<std::string> artifacts;
    std::string out_dir;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    std::string artifact(const std::string& name) {
        const std::string p = (fs::path(out_dir) / name).string();
        artifacts.push_back(p);
        return p;
    }
    void input(const std::string& path) { inputs.push_back(path); }

    void write_manifest() const {
        json in = json::object();
        for (const auto& p : inputs) {
            if (fs::is_regular_file(p)) in[p] = file_digest(p);
        }
        const json cfg = settings.resolved();
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const json m{{"command", command},
                     {"config", cfg},
                     {"config_hash", hex(fnv1a(cfg.dump()))},
                     {"seeds", seeds},
                     {"inputs", in},
                     {"artifacts", artifacts},
                     {"wall_time_s", wall}};
        std::ofstream out(fs::path(out_dir) / "manifest.json");
        if (!out) fail(ErrorKind::Io, "cannot write manifest in '" + out_dir + "'");
        out << m.dump(2) << '\n';
    }
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) fail(ErrorKind::Io, "cannot create output directory '" + dir + "'");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out << text;
}

/// A directory resolves to `<dir>/<name>`.
std::string in_dir(const std::string& path, const std::string& name) {
    return fs::is_directory(path) ? (fs::path(path) / name).string() : path;
}

io::TaskMode resolve_mode(const Settings& s) { return io::parse_task_mode(s.str("mode", "dti")); }

// ---------------------------------------------------------------------------
// Data loading shared by train / predict

struct Inputs {
    train::Dataset data;
    bool have_pockets = false;
};

Inputs load_inputs(Run& run, const std::string& interactions_path, const std::string& emb_dir) {
    Inputs in;
    const std::string drugs = (fs::path(emb_dir) / "drugs.emb").string();
    const std::string proteins = (fs::path(emb_dir) / "proteins.emb").string();
    const std::string pockets = (fs::path(emb_dir) / "pockets.emb").string();
    const std::string smiles = (fs::path(emb_dir) / "smiles.tsv").string();
    run.input(interactions_path);
    run.input(drugs);
    run.input(proteins);
    in.data.records = io::load_interactions(interactions_path);
    in.data.drugs = io::load_embeddings(drugs, io::Modality::Drug);
    in.data.proteins = io::load_embeddings(proteins, io::Modality::Protein);
    if (fs::exists(pockets)) {
        run.input(pockets);
        in.data.pockets = io::load_embeddings(pockets, io::Modality::Pocket);
        in.have_pockets = true;
    }
    if (fs::exists(smiles)) {
        run.input(smiles);
        for (const auto& s : io::load_smiles(smiles)) in.data.smiles[s.drug_id] = s.smiles;
    }
    return in;
}

model::ModelConfig model_config_from(const Settings& s, const Inputs& in, io::TaskMode mode) {
    model::ModelConfig c;
    c.mode = mode;
    c.drug_dim = static_cast<int>(in.data.drugs.width());
    c.protein_dim = static_cast<int>(in.data.proteins.width());
    c.pocket_dim = in.have_pockets && s.boolean("use_pockets", true) ? static_cast<int>(in.data.pockets->width()) : 0;
    c.hidden_dim = static_cast<int>(s.integer("hidden_dim", c.hidden_dim));
    c.output_dim = static_cast<int>(s.integer("output_dim", c.output_dim));
    c.latent_dim = static_cast<int>(s.integer("latent_dim", c.latent_dim));
    c.max_len = static_cast<int>(s.integer("max_len", c.max_len));
    c.lambda_protein = s.real("lambda_protein", c.lambda_protein);
    c.lambda_pocket = s.real("lambda_pocket", c.lambda_pocket);
    c.weights.cls = s.real("alpha_cls", c.weights.cls);
    c.weights.con = s.real("alpha_con", c.weights.con);
    c.weights.conf = s.real("alpha_conf", c.weights.conf);
    c.weights.recon = s.real("alpha_recon", c.weights.recon);
    c.contrastive = model::parse_contrastive(s.str("contrastive", std::string(model::to_string(c.contrastive))));
    c.margin = s.real("margin", c.margin);
    c.triplet_margin = s.real("triplet_margin", c.triplet_margin);
    c.unfamiliarity_eps = s.real("unfamiliarity_eps", c.unfamiliarity_eps);
    c.regression_error_scale = s.real("regression_error_scale", c.regression_error_scale);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_gen_synth(Run& run) {
    const Settings& s = run.settings;
    io::SyntheticConfig c;
    c.n_drugs = static_cast<int>(s.integer("n_drugs", c.n_drugs));
    c.n_targets = static_cast<int>(s.integer("n_targets", c.n_targets));
    c.drug_dim = static_cast<int>(s.integer("drug_dim", c.drug_dim));
    c.protein_dim = static_cast<int>(s.integer("protein_dim", c.protein_dim));
    c.pocket_dim = static_cast<int>(s.integer("pocket_dim", c.pocket_dim));
    c.n_latent_factors = static_cast<int>(s.integer("n_latent_factors", c.n_latent_factors));
    c.noise = s.real("noise", c.noise);
    c.affinity_base = s.real("affinity_base", c.affinity_base);
    c.affinity_bilinear = s.real("affinity_bilinear", c.affinity_bilinear);
    c.mode = resolve_mode(s);
    c.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    run.seeds = {c.seed};

    const io::SyntheticDataset d = io::gen_synthetic(c);
    io::save_embeddings_binary(d.drugs, run.artifact("drugs.emb"));
    io::save_embeddings_binary(d.proteins, run.artifact("proteins.emb"));
    if (d.pockets) io::save_embeddings_binary(*d.pockets, run.artifact("pockets.emb"));
    io::save_interactions(d.interactions, run.artifact("interactions.tsv"));
    io::save_smiles(d.smiles, run.artifact("smiles.tsv"));
}

void cmd_split(Run& run, const std::string& data) {
    const Settings& s = run.settings;
    const std::string path = in_dir(data, "interactions.tsv");
    run.input(path);
    auto records = io::load_interactions(path);

    if (s.has("kd_threshold")) records = data::label_by_kd(std::move(records), s.real("kd_threshold", 30.0));

    data::SplitSpec spec;
    spec.strategy = data::parse_split_strategy(s.str("strategy", "random"));
    spec.train = s.real("train_fraction", spec.train);
    spec.valid = s.real("valid_fraction", spec.valid);
    spec.test = s.real("test_fraction", spec.test);
    spec.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    run.seeds = {spec.seed};
    const bool balance = s.boolean("balance_train", false);
    records = data::split(std::move(records), spec);

    if (s.has("neg_ratio")) {
        data::NegSampleSpec neg;
        neg.ratio = s.real("neg_ratio", 1.0);
        const std::vector<io::InteractionRecord> all = records;
        std::uint64_t shard = 0;
        for (auto split : {io::Split::Train, io::Split::Valid, io::Split::Test}) {
            std::vector<io::InteractionRecord> pos;
            for (const auto& r : all) {
                if (r.split == split && r.label && *r.label == 1) pos.push_back(r);
            }
            const auto negs = data::sample_negatives(pos, neg, data::pool_from(all, split),
                                                     derive_seed(spec.seed, 100 + shard++), &all);
            records.insert(records.end(), negs.begin(), negs.end());
        }
    }
    if (balance) records = data::balance_train(records, derive_seed(spec.seed, 1));
    io::save_interactions(records, run.artifact("interactions.tsv"));
}

void cmd_train(Run& run, const std::string& data, const std::string& embeddings, int threads) {
    const Settings& s = run.settings;
    const io::TaskMode mode = resolve_mode(s);
    const std::string path = in_dir(data, "interactions.tsv");
    const Inputs in = load_inputs(run, path, embeddings.empty() ? fs::path(path).parent_path().string() : embeddings);
    const model::ModelConfig mc = model_config_from(s, in, mode);

    train::TrainConfig tc = train::TrainConfig::defaults(mode);
    tc.lr = s.real("lr", tc.lr);
    tc.weight_decay = s.real("weight_decay", tc.weight_decay);
    tc.max_epochs = static_cast<int>(s.integer("max_epochs", tc.max_epochs));
    tc.patience = static_cast<int>(s.integer("patience", tc.patience));
    tc.batch_size = static_cast<int>(s.integer("batch_size", tc.batch_size));
    tc.eval_metric = train::parse_eval_metric(s.str("eval_metric", std::string(train::to_string(tc.eval_metric))));
    const auto seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    const auto runs = s.integer("runs", 1);
    if (runs < 1) fail(ErrorKind::Config, "runs must be at least 1");
    tc.seeds.clear();
    for (long long i = 0; i < runs; ++i) tc.seeds.push_back(seed + static_cast<std::uint64_t>(i));
    run.seeds = tc.seeds;

    auto [model, report] = train::train_seeds(mc, in.data, tc, threads);
    model::save_checkpoint(model, run.artifact("model.ckpt"));
    run.artifacts.push_back(run.artifacts.back() + ".json");
    write_text(run.artifact("train_report.json"), train::to_json(report).dump(2) + "\n");
}

void cmd_predict(Run& run, const std::string& model_path, const std::string& data, const std::string& embeddings,
                 const std::string& split, bool projections) {
    const std::string ckpt = in_dir(model_path, "model.ckpt");
    run.input(ckpt);
    model::Model model = model::load_checkpoint(ckpt);
    const std::string path = in_dir(data, "interactions.tsv");
    Inputs in = load_inputs(run, path, embeddings.empty() ? fs::path(path).parent_path().string() : embeddings);
    run.seeds = {};

    std::vector<io::InteractionRecord> records = in.data.records;
    if (split != "all") records = io::select_split(records, io::parse_split(split));
    if (records.empty()) fail(ErrorKind::Data, "no records in split '" + split + "'");
    const train::Evaluation ev = train::evaluate(model, in.data, records);
    train::save_predictions(ev.predictions, run.artifact("predictions.tsv"));
    write_text(run.artifact("metrics.json"), metrics::to_json(ev.metrics).dump(2) + "\n");
    if (projections) {
        io::export_projections(model, in.data.drugs, run.artifact("projections_drug.tsv"));
        io::export_projections(model, in.data.proteins, run.artifact("projections_protein.tsv"));
    }
}

std::vector<screening::ScoreRow> rows_from_predictions(const std::string& path, const std::string& target,
                                                        const std::string& method) {
    const auto preds = train::load_predictions(path);
    std::set<std::string> targets;
    for (const auto& p : preds) targets.insert(p.target_id);
    std::string chosen = target;
    if (chosen.empty()) {
        if (targets.size() != 1) {
            fail(ErrorKind::Usage, "predictions cover " + std::to_string(targets.size()) + " targets; pass --target");
        }
        chosen = *targets.begin();
    } else if (!targets.count(chosen)) {
        fail(ErrorKind::Data, "target '" + chosen + "' not in predictions");
    }
    std::vector<screening::ScoreRow> rows;
    for (const auto& p : preds) {
        if (p.target_id != chosen) continue;
        screening::ScoreRow r;
        r.compound_id = p.drug_id;
        r.method = method;
        // Ascending score order puts the strongest predicted binder first.
        r.score = p.affinity_pred ? -*p.affinity_pred : -p.logit;
        r.label = p.pred_label;
        r.confidence = p.confidence;
        r.unfamiliarity = p.unfamiliarity;
        rows.push_back(std::move(r));
    }
    return rows;
}

void cmd_rank(Run& run, const std::string& data, const std::string& ranking, const std::string& target,
              const std::string& method) {
    const Settings& s = run.settings;
    run.input(data);
    const TsvTable head = read_tsv(data);
    std::vector<screening::ScoreRow> rows;
    if (head.find("compound_id")) {
        rows = screening::load_scores(data);
    } else if (head.find("drug_id")) {
        rows = rows_from_predictions(data, target, method);
    } else {
        fail(ErrorKind::MissingColumn, data + ": neither a score table nor a prediction table");
    }
    const auto criterion = screening::parse_rank_criterion(ranking);
    if (s.has("unf_threshold")) {
        const auto f = screening::filter_unfamiliar(rows, s.real("unf_threshold", 1.0), method);
        rows = f.rows;
        write_text(run.artifact("census.json"),
                   json{{"population", f.census.population}, {"docked", f.census.docked}, {"unf_below_threshold", f.census.retained}}
                           .dump(2) + "\n");
    }
    const auto lib = screening::rank(rows, criterion);
    std::map<std::string, const screening::ScoreRow*> by_id;
    for (const auto& r : rows) by_id[r.compound_id] = &r;
    std::vector<screening::ScoreRow> ordered;
    for (const auto& id : lib.ids) ordered.push_back(*by_id.at(id));
    const std::string out = run.artifact("ranked.tsv");
    screening::save_scores(ordered, out);
}

screening::ActiveSet actives_from_truth(const std::string& path, const std::string& target) {
    if (target.empty()) fail(ErrorKind::Usage, "--truth needs --target");
    screening::ActiveSet a;
    for (const auto& r : io::load_interactions(path)) {
        if (r.target_id != target || !r.label || *r.label != 1) continue;
        a.ids.insert(r.drug_id);
        if (r.affinity) a.potency[r.drug_id] = *r.affinity;
    }
    if (a.ids.empty()) fail(ErrorKind::Data, "no actives for target '" + target + "'");
    return a;
}

/// Tables are taken in file order unless a ranking criterion is given.
void cmd_enrich(Run& run, const std::vector<std::string>& ranked, const std::string& actives_path,
                const std::string& truth, const std::string& target, const std::string& format, bool topk_fraction,
                const std::optional<std::string>& ranking, int threads) {
    const Settings& s = run.settings;
    if (ranked.empty()) fail(ErrorKind::Usage, "enrich needs at least one --data ranked table");
    if (actives_path.empty() == truth.empty()) fail(ErrorKind::Usage, "pass exactly one of --actives or --truth");

    std::vector<screening::RankedLibrary> libs;
    for (const auto& p : ranked) {
        run.input(p);
        const auto rows = screening::load_scores(p);
        if (rows.empty()) fail(ErrorKind::Data, p + ": empty ranked table");
        if (ranking) {
            libs.push_back(screening::rank(rows, screening::parse_rank_criterion(*ranking)));
            continue;
        }
        screening::RankedLibrary lib;
        lib.method = rows.front().method;
        for (const auto& r : rows) lib.ids.push_back(r.compound_id);
        libs.push_back(std::move(lib));
    }
    screening::ActiveSet actives;
    if (!actives_path.empty()) {
        run.input(actives_path);
        actives = screening::load_actives(actives_path);
    } else {
        run.input(truth);
        actives = actives_from_truth(truth, target);
    }
    actives = screening::align_actives(libs, {actives});

    screening::EnrichmentOptions opt;
    opt.k_grid = parse_real_list(s.str("k_grid", "1,5,20,50,100"), "k grid");
    opt.trials = static_cast<std::size_t>(s.integer("trials", 10000));
    opt.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    opt.threads = threads;
    opt.topk_fraction = topk_fraction;
    run.seeds = {opt.seed};
    const auto rep = screening::enrichment_report(libs, actives, opt);
    if (format == "tsv") {
        write_text(run.artifact("enrichment.tsv"), screening::to_tsv(rep));
    } else {
        write_text(run.artifact("enrichment.json"), screening::to_json(rep).dump(2) + "\n");
    }
}

void cmd_report(Run& run, const std::string& predictions, const std::string& truth, const std::string& format) {
    const Settings& s = run.settings;
    run.input(predictions);
    run.input(truth);
    const auto preds = train::load_predictions(predictions);
    std::map<std::pair<std::string, std::string>, io::InteractionRecord> by_pair;
    for (auto& r : io::load_interactions(truth)) by_pair[{r.drug_id, r.target_id}] = r;

    std::vector<double> probs, confs, logits, aff_pred, aff_true;
    std::vector<int> labels;
    std::vector<metrics::ScoredLabel> scored;
    std::size_t unf_total = 0, unf_kept = 0;
    const double unf_threshold = s.real("unf_threshold", 1.0);
    for (const auto& p : preds) {
        const auto it = by_pair.find({p.drug_id, p.target_id});
        if (it == by_pair.end()) fail(ErrorKind::Data, "prediction " + p.drug_id + "/" + p.target_id + " not in truth table");
        const auto& r = it->second;
        if (p.prob && r.label) {
            probs.push_back(*p.prob);
            labels.push_back(*r.label);
            confs.push_back(p.confidence);
            scored.push_back({p.logit, *r.label, p.drug_id + '\t' + p.target_id});
        }
        if (p.affinity_pred && r.affinity) {
            aff_pred.push_back(*p.affinity_pred);
            aff_true.push_back(*r.affinity);
        }
        if (p.unfamiliarity) {
            ++unf_total;
            unf_kept += *p.unfamiliarity < unf_threshold ? 1 : 0;
        }
    }
    metrics::MetricBundle m;
    json j;
    if (!labels.empty()) {
        try {
            m.aupr = metrics::aupr(scored);
        } catch (const Error& e) {
            m.errors.emplace_back(std::string("aupr: ") + e.what());
        }
        m.f1 = metrics::f1(probs, labels);
        j["confusion_confidence"] = metrics::to_json(metrics::confusion_confidence(probs, labels, confs));
    }
    if (!aff_true.empty()) {
        try {
            m.pcc = metrics::pcc(aff_pred, aff_true);
        } catch (const Error& e) {
            m.errors.emplace_back(std::string("pcc: ") + e.what());
        }
        m.rmse = metrics::rmse(aff_pred, aff_true);
    }
    j["metrics"] = metrics::to_json(m);
    j["unfamiliarity"] = {{"threshold", unf_threshold}, {"scored", unf_total}, {"below_threshold", unf_kept}};
    if (format == "tsv") {
        std::ostringstream out;
        out << "key\tvalue\n";
        for (const auto& [k, v] : j["metrics"].items()) {
            if (v.is_number()) out << k << '\t' << format_real(v.get<double>()) << '\n';
        }
        out << "unf_scored\t" << unf_total << "\nunf_below_threshold\t" << unf_kept << '\n';
        write_text(run.artifact("report.tsv"), out.str());
    } else {
        write_text(run.artifact("report.json"), j.dump(2) + "\n");
    }
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Drug-target interaction training and screening enrichment"};
    app.require_subcommand(1);

    std::string config, data, embeddings, out, mode, ranking = "two_key", k_grid, format = "json", actives, truth,
                                                     target, method = "tdti", model_path, split_name = "all", strategy;
    std::vector<std::string> ranked;
    std::optional<std::uint64_t> seed;
    std::optional<double> unf_threshold;
    std::optional<long long> trials, runs;
    int threads = 1;
    bool projections = false, topk_fraction = false, balance = false;

    auto common = [&](CLI::App* sub, bool data_required) {
        sub->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
        auto* d = sub->add_option("--data", data, "input data");
        if (data_required) d->required();
        sub->add_option("--out", out, "output directory")->required();
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
    };

    auto* gen = app.add_subcommand("gen-synth", "generate a planted synthetic dataset");
    common(gen, false);
    gen->add_option("--mode", mode)->check(CLI::IsMember({"dti", "dta"}));

    auto* spl = app.add_subcommand("split", "label, split and balance interactions");
    common(spl, true);
    spl->add_option("--strategy", strategy)->check(CLI::IsMember({"random", "unseen_drug", "unseen_target", "external_tag"}));
    spl->add_flag("--balance", balance, "balance the train partition");

    auto* trn = app.add_subcommand("train", "train a model");
    common(trn, true);
    trn->add_option("--embeddings", embeddings, "directory with drugs.emb, proteins.emb, pockets.emb, smiles.tsv");
    trn->add_option("--mode", mode)->check(CLI::IsMember({"dti", "dta"}));
    trn->add_option("--runs", runs, "number of seeds");

    auto* prd = app.add_subcommand("predict", "score interactions with a trained model");
    common(prd, true);
    prd->add_option("--model", model_path, "checkpoint or training output directory")->required();
    prd->add_option("--embeddings", embeddings);
    prd->add_option("--mode", mode)->check(CLI::IsMember({"dti", "dta"}));
    prd->add_option("--split", split_name)->check(CLI::IsMember({"all", "train", "valid", "test"}));
    prd->add_flag("--projections", projections, "also export encoder projections");

    auto* rnk = app.add_subcommand("rank", "rank a compound library");
    common(rnk, true);
    rnk->add_option("--ranking", ranking)->check(CLI::IsMember({"docking", "affinity", "two_key"}));
    rnk->add_option("--target", target, "target to rank against when reading predictions");
    rnk->add_option("--method", method, "method name for prediction input");
    rnk->add_option("--unf-threshold", unf_threshold, "keep compounds with unfamiliarity below this");

    auto* enr = app.add_subcommand("enrich", "enrichment report over ranked libraries");
    enr->add_option("--config", config)->check(CLI::ExistingFile);
    enr->add_option("--data", ranked, "ranked table, one per method")->required();
    enr->add_option("--out", out)->required();
    enr->add_option("--seed", seed);
    enr->add_option("--threads", threads)->check(CLI::PositiveNumber);
    enr->add_option("--actives", actives, "TSV compound_id [potency]");
    enr->add_option("--truth", truth, "interaction table supplying actives for --target");
    enr->add_option("--target", target);
    enr->add_option("--k-grid", k_grid, "comma-separated percentages");
    enr->add_option("--trials", trials, "random baseline trials");
    enr->add_option("--format", format)->check(CLI::IsMember({"tsv", "json"}));
    auto* enr_ranking = enr->add_option("--ranking", ranking, "re-rank each table with this criterion")
                            ->check(CLI::IsMember({"docking", "affinity", "two_key"}));
    enr->add_flag("--topk-fraction", topk_fraction, "also report the recall-at-fraction Top-k view");

    auto* rep = app.add_subcommand("report", "metrics and confidence summary for predictions");
    common(rep, true);
    rep->add_option("--truth", truth, "interaction table with labels")->required();
    rep->add_option("--format", format)->check(CLI::IsMember({"tsv", "json"}));
    rep->add_option("--unf-threshold", unf_threshold);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << error_class(ErrorKind::Usage) << ": " << msg << '\n';
        return 2;
    }

    try {
        Run run;
        run.command = app.get_subcommands().front()->get_name();
        run.out_dir = out;
        if (!config.empty()) {
            run.settings.load_file(config);
            run.input(config);
        }
        if (!mode.empty()) run.settings.set("mode", mode);
        if (seed) run.settings.set("seed", std::to_string(*seed));
        if (unf_threshold) run.settings.set("unf_threshold", format_real(*unf_threshold));
        if (!k_grid.empty()) run.settings.set("k_grid", k_grid);
        if (trials) run.settings.set("trials", std::to_string(*trials));
        if (runs) run.settings.set("runs", std::to_string(*runs));
        if (!strategy.empty()) run.settings.set("strategy", strategy);
        if (balance) run.settings.set("balance_train", "true");
        if (run.settings.has("threads") && threads == 1) threads = static_cast<int>(run.settings.integer("threads", 1));
        ensure_dir(out);

        if (run.command == "gen-synth") cmd_gen_synth(run);
        else if (run.command == "split") cmd_split(run, data);
        else if (run.command == "train") cmd_train(run, data, embeddings, threads);
        else if (run.command == "predict") cmd_predict(run, model_path, data, embeddings, split_name, projections);
        else if (run.command == "rank") cmd_rank(run, data, ranking, target, method);
        else if (run.command == "enrich") cmd_enrich(run, ranked, actives, truth, target, format, topk_fraction,
                                                           enr_ranking->count() ? std::optional(ranking) : std::nullopt, threads);
        else if (run.command == "report") cmd_report(run, data, truth, format);
        run.write_manifest();
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << error_class(e.kind()) << ": " << msg << '\n';
        return e.kind() == ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << error_class(ErrorKind::Io) << ": " << msg << '\n';
        return 1;
    }
    return 0;
}
