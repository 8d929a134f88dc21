#include "tdti/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "tdti/error.hpp"
#include "tdti/nn/adam.hpp"
#include "tdti/util/rng.hpp"
#include "tdti/util/tsv.hpp"

namespace tdti::train {

namespace {

constexpr Eigen::Index kEvalBatch = 512;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

using nn::Tensor;

using TokenCache = std::map<std::string, model::TokenSeq>;

TokenCache build_tokens(const Dataset& data, const ModelConfig& config) {
    TokenCache cache;
    for (const auto& [id, smi] : data.smiles) cache.emplace(id, model::tokenize(smi, config.vocab, config.max_len));
    return cache;
}

void shuffle_indices(std::vector<std::size_t>& v, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
}

model::Batch make_batch(const ModelConfig& config, const Dataset& data, const TokenCache& tokens,
                        const std::vector<const InteractionRecord*>& recs, bool with_tokens) {
    const auto n = static_cast<Eigen::Index>(recs.size());
    std::vector<std::string> drug_ids, target_ids, pocket_ids;
    drug_ids.reserve(recs.size());
    target_ids.reserve(recs.size());
    model::Batch b;
    b.targets.resize(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& r = *recs[static_cast<std::size_t>(j)];
        drug_ids.push_back(r.drug_id);
        target_ids.push_back(r.target_id);
        if (config.has_pockets()) {
            if (!r.pocket_id) fail(ErrorKind::Data, "record " + r.drug_id + "/" + r.target_id + " has no pocket id");
            pocket_ids.push_back(*r.pocket_id);
        }
        if (config.mode == io::TaskMode::Classification) {
            b.targets(0, j) = r.label ? *r.label : 0.0;
        } else {
            b.targets(0, j) = r.affinity ? *r.affinity : 0.0;
        }
    }
    b.drugs = data.drugs.gather(drug_ids);
    b.proteins = data.proteins.gather(target_ids);
    if (config.has_pockets()) {
        if (!data.pockets) fail(ErrorKind::Data, "model expects pockets but the dataset has none");
        b.pockets = data.pockets->gather(pocket_ids);
    }
    if (with_tokens && !tokens.empty()) {
        std::vector<model::TokenSeq> seqs;
        seqs.reserve(recs.size());
        for (const auto& id : drug_ids) {
            const auto it = tokens.find(id);
            if (it == tokens.end()) return b;  // partial coverage: skip reconstruction
            seqs.push_back(it->second);
        }
        b.tokens = model::token_matrix(seqs);
    }
    return b;
}

double metric_value(const metrics::MetricBundle& m, EvalMetric which) {
    const std::optional<double>* v = nullptr;
    switch (which) {
        case EvalMetric::Aupr: v = &m.aupr; break;
        case EvalMetric::Pcc: v = &m.pcc; break;
        case EvalMetric::Rmse: v = &m.rmse; break;
    }
    return *v ? **v : kNaN;
}

bool better(double candidate, double best, EvalMetric which) {
    return which == EvalMetric::Rmse ? candidate < best : candidate > best;
}

std::vector<const InteractionRecord*> select(const std::vector<InteractionRecord>& records, io::Split split) {
    std::vector<const InteractionRecord*> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(&r);
    }
    return out;
}

std::vector<InteractionRecord> copy_split(const std::vector<InteractionRecord>& records, io::Split split) {
    std::vector<InteractionRecord> out;
    for (const auto* r : select(records, split)) out.push_back(*r);
    return out;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::optional<double> read_opt_real(const std::string& s, const std::string& ctx) {
    if (s.empty()) return std::nullopt;
    return parse_real(s, ctx);
}

}  // namespace

Dataset from_synthetic(const io::SyntheticDataset& syn) {
    Dataset d;
    d.drugs = syn.drugs;
    d.proteins = syn.proteins;
    d.pockets = syn.pockets;
    d.records = syn.interactions;
    for (const auto& s : syn.smiles) d.smiles[s.drug_id] = s.smiles;
    return d;
}

std::string_view to_string(EvalMetric m) {
    switch (m) {
        case EvalMetric::Aupr: return "aupr";
        case EvalMetric::Pcc: return "pcc";
        case EvalMetric::Rmse: return "rmse";
    }
    return "aupr";
}

EvalMetric parse_eval_metric(std::string_view text) {
    for (auto m : {EvalMetric::Aupr, EvalMetric::Pcc, EvalMetric::Rmse}) {
        if (text == to_string(m)) return m;
    }
    fail(ErrorKind::Config, "unknown eval metric '" + std::string(text) + "'");
}

TrainConfig TrainConfig::defaults(io::TaskMode mode) {
    TrainConfig c;
    c.mode = mode;
    if (mode == io::TaskMode::Regression) {
        c.lr = 1e-4;
        c.eval_metric = EvalMetric::Pcc;
    }
    return c;
}

void TrainConfig::validate() const {
    if (!(lr >= 0) || !std::isfinite(lr)) fail(ErrorKind::Config, "lr must be finite and non-negative");
    if (!(weight_decay >= 0)) fail(ErrorKind::Config, "weight_decay must be non-negative");
    if (max_epochs < 1) fail(ErrorKind::Config, "max_epochs must be at least 1");
    if (patience < 1) fail(ErrorKind::Config, "patience must be at least 1");
    if (batch_size < 1) fail(ErrorKind::Config, "batch_size must be at least 1");
    if (seeds.empty()) fail(ErrorKind::Config, "at least one seed is required");
    if (mode == io::TaskMode::Classification && eval_metric != EvalMetric::Aupr) {
        fail(ErrorKind::Config, "classification runs select on aupr");
    }
    if (mode == io::TaskMode::Regression && eval_metric == EvalMetric::Aupr) {
        fail(ErrorKind::Config, "regression runs select on pcc or rmse");
    }
}

Evaluation evaluate(Model& model, const Dataset& data, const std::vector<InteractionRecord>& records,
                    bool with_unfamiliarity) {
    const ModelConfig& config = model.config();
    io::validate_ids(records, data.drugs, data.proteins, config.has_pockets() && data.pockets ? &*data.pockets : nullptr);
    const TokenCache tokens = build_tokens(data, config);

    Evaluation ev;
    ev.predictions.reserve(records.size());
    for (std::size_t start = 0; start < records.size(); start += kEvalBatch) {
        const std::size_t end = std::min(records.size(), start + kEvalBatch);
        std::vector<const InteractionRecord*> recs;
        for (std::size_t i = start; i < end; ++i) recs.push_back(&records[i]);
        const model::Batch batch = make_batch(config, data, tokens, recs, false);
        nn::Tape tape(false);
        const model::ForwardResult fwd = model.forward(tape, batch);
        const Tensor& logit = fwd.logit.value();
        const Tensor& conf = fwd.confidence.value();
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const auto& r = *recs[i];
            const auto j = static_cast<Eigen::Index>(i);
            PredictionRecord p;
            p.drug_id = r.drug_id;
            p.target_id = r.target_id;
            p.logit = logit(0, j);
            if (config.mode == io::TaskMode::Classification) {
                p.prob = 1.0 / (1.0 + std::exp(-p.logit));
                p.pred_label = *p.prob >= 0.5 ? 1 : 0;
            } else {
                p.affinity_pred = p.logit;
            }
            p.confidence = conf(0, j);
            p.label = r.label;
            p.affinity = r.affinity;
            ev.predictions.push_back(std::move(p));
        }
    }

    // Unfamiliarity depends on the drug alone.
    std::vector<std::string> drug_ids;
    {
        std::map<std::string, bool> seen;
        for (const auto& r : records) {
            if (with_unfamiliarity && tokens.count(r.drug_id) && !seen[r.drug_id]) {
                seen[r.drug_id] = true;
                drug_ids.push_back(r.drug_id);
            }
        }
    }
    std::map<std::string, double> unf;
    for (std::size_t start = 0; start < drug_ids.size(); start += kEvalBatch) {
        const std::size_t end = std::min(drug_ids.size(), start + kEvalBatch);
        std::vector<std::string> ids(drug_ids.begin() + static_cast<std::ptrdiff_t>(start),
                                     drug_ids.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<model::TokenSeq> seqs;
        for (const auto& id : ids) seqs.push_back(tokens.at(id));
        const Tensor nll = model.reconstruction_nll(data.drugs.gather(ids), model::token_matrix(seqs));
        for (std::size_t i = 0; i < ids.size(); ++i) {
            unf[ids[i]] = model::unfamiliarity_from_nll(nll(0, static_cast<Eigen::Index>(i)), config.unfamiliarity_eps);
        }
    }
    for (auto& p : ev.predictions) {
        if (const auto it = unf.find(p.drug_id); it != unf.end()) p.unfamiliarity = it->second;
    }

    if (config.mode == io::TaskMode::Classification) {
        std::vector<metrics::ScoredLabel> items;
        std::vector<double> probs;
        std::vector<int> labels;
        for (const auto& p : ev.predictions) {
            if (!p.label) continue;
            items.push_back({p.logit, *p.label, p.drug_id + '\t' + p.target_id});
            probs.push_back(*p.prob);
            labels.push_back(*p.label);
        }
        if (labels.size() != ev.predictions.size()) ev.metrics.errors.emplace_back("some records lack labels");
        if (!labels.empty()) {
            try {
                ev.metrics.aupr = metrics::aupr(std::move(items));
            } catch (const Error& e) {
                ev.metrics.errors.emplace_back(std::string("aupr: ") + e.what());
            }
            ev.metrics.f1 = metrics::f1(probs, labels);
        }
    } else {
        std::vector<double> pred, truth;
        for (const auto& p : ev.predictions) {
            if (!p.affinity) continue;
            pred.push_back(*p.affinity_pred);
            truth.push_back(*p.affinity);
        }
        if (truth.size() != ev.predictions.size()) ev.metrics.errors.emplace_back("some records lack affinities");
        if (!truth.empty()) {
            try {
                ev.metrics.pcc = metrics::pcc(pred, truth);
            } catch (const Error& e) {
                ev.metrics.errors.emplace_back(std::string("pcc: ") + e.what());
            }
            ev.metrics.rmse = metrics::rmse(pred, truth);
        }
    }
    return ev;
}

TrainResult train(const ModelConfig& model_config, const Dataset& data, const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    model_config.validate();
    if (model_config.mode != config.mode) fail(ErrorKind::Config, "model and training modes differ");
    io::check_mode(data.records, config.mode);
    io::validate_ids(data.records, data.drugs, data.proteins,
                     model_config.has_pockets() && data.pockets ? &*data.pockets : nullptr);

    const auto train_recs = select(data.records, io::Split::Train);
    const auto valid_recs = copy_split(data.records, io::Split::Valid);
    const auto test_recs = copy_split(data.records, io::Split::Test);
    if (train_recs.empty()) fail(ErrorKind::Data, "train split is empty");
    if (valid_recs.empty()) fail(ErrorKind::Data, "validation split is empty");

    const TokenCache tokens = build_tokens(data, model_config);
    Model model(model_config, derive_seed(seed, 0));
    auto params = model.parameters();
    nn::AdamState adam({config.lr, 0.9, 0.999, 1e-8, config.weight_decay}, params);

    TrainReport report;
    report.seed = seed;
    std::vector<Tensor> best;
    double best_metric = kNaN;
    int since_best = 0;
    const std::uint64_t shuffle_master = derive_seed(seed, 1);

    std::vector<std::size_t> order(train_recs.size());
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::uint64_t epoch_seed = derive_seed(shuffle_master, static_cast<std::uint64_t>(epoch));
        shuffle_indices(order, epoch_seed);

        EpochLog log;
        log.epoch = epoch;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const InteractionRecord*> recs;
            for (std::size_t i = start; i < end; ++i) recs.push_back(train_recs[order[i]]);
            const model::Batch batch = make_batch(model_config, data, tokens, recs, true);
            try {
                nn::Tape tape;
                const model::ForwardResult fwd = model.forward(tape, batch);
                const losses::CompositeLoss loss = losses::composite_loss(fwd, batch, model_config, derive_seed(epoch_seed, batch_index));
                const nn::Gradients grads = tape.backward(loss.total);
                nn::adam_step(adam, grads);
                const double w = static_cast<double>(recs.size());
                log.loss.bce += w * loss.breakdown.bce;
                log.loss.con += w * loss.breakdown.con;
                log.loss.conf += w * loss.breakdown.conf;
                log.loss.recon += w * loss.breakdown.recon;
                log.loss.mse += w * loss.breakdown.mse;
                log.loss.total += w * loss.breakdown.total;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Numeric) throw;
                fail(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) +
                                             ": " + e.what());
            }
        }
        const double n = static_cast<double>(order.size());
        for (double* v : {&log.loss.bce, &log.loss.con, &log.loss.conf, &log.loss.recon, &log.loss.mse, &log.loss.total}) {
            *v /= n;
        }

        log.valid_metric = metric_value(evaluate(model, data, valid_recs, false).metrics, config.eval_metric);
        report.epochs.push_back(log);
        spdlog::debug("seed {} epoch {} loss {:.6f} valid {} {:.6f}", seed, epoch, log.loss.total,
                      to_string(config.eval_metric), log.valid_metric);

        const bool improved = std::isfinite(log.valid_metric) &&
                              (!std::isfinite(best_metric) || better(log.valid_metric, best_metric, config.eval_metric));
        if (best.empty() || improved) {
            best.clear();
            for (const nn::Parameter& p : params) best.push_back(p.value);
            best_metric = log.valid_metric;
            report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            spdlog::info("seed {}: early stop at epoch {} (best {})", seed, epoch, report.best_epoch);
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i].get().value = best[i];
    report.best_valid_metric = best_metric;
    if (!test_recs.empty()) report.test = evaluate(model, data, test_recs).metrics;
    return {std::move(model), std::move(report)};
}

nlohmann::json to_json(const TrainReport& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"l_bce", e.loss.bce},
                          {"l_con", e.loss.con},
                          {"l_conf", e.loss.conf},
                          {"l_recon", e.loss.recon},
                          {"l_mse", e.loss.mse},
                          {"l_total", e.loss.total},
                          {"valid_metric", e.valid_metric}});
    }
    nlohmann::json j{{"seed", r.seed}, {"best_epoch", r.best_epoch}, {"best_valid_metric", r.best_valid_metric},
                     {"epochs", epochs}};
    j["test"] = r.test ? metrics::to_json(*r.test) : nlohmann::json(nullptr);
    return j;
}

void save_predictions(const std::vector<PredictionRecord>& preds, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out << "drug_id\ttarget_id\tlogit\tprob\tpred_label\taffinity_pred\tconfidence\tunfamiliarity\n";
    for (const auto& p : preds) {
        out << p.drug_id << '\t' << p.target_id << '\t' << format_real(p.logit) << '\t' << opt_real(p.prob) << '\t'
            << (p.pred_label ? std::to_string(*p.pred_label) : std::string()) << '\t' << opt_real(p.affinity_pred) << '\t'
            << format_real(p.confidence) << '\t' << opt_real(p.unfamiliarity) << '\n';
    }
    if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    const TsvTable t = read_tsv(path);
    const auto c_drug = t.column("drug_id", path);
    const auto c_target = t.column("target_id", path);
    const auto c_logit = t.column("logit", path);
    const auto c_prob = t.column("prob", path);
    const auto c_pred = t.column("pred_label", path);
    const auto c_aff = t.column("affinity_pred", path);
    const auto c_conf = t.column("confidence", path);
    const auto c_unf = t.column("unfamiliarity", path);
    std::vector<PredictionRecord> out;
    for (const auto& row : t.rows) {
        PredictionRecord p;
        p.drug_id = row[c_drug];
        p.target_id = row[c_target];
        p.logit = parse_real(row[c_logit], path);
        p.prob = read_opt_real(row[c_prob], path);
        if (!row[c_pred].empty()) p.pred_label = static_cast<int>(parse_int(row[c_pred], path));
        p.affinity_pred = read_opt_real(row[c_aff], path);
        p.confidence = parse_real(row[c_conf], path);
        p.unfamiliarity = read_opt_real(row[c_unf], path);
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json to_json(const MultiSeedReport& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : r.runs) runs.push_back(to_json(run));
    return {{"runs", runs}, {"mean", r.mean}, {"sd", r.sd}};
}

std::pair<Model, MultiSeedReport> train_seeds(const ModelConfig& model_config, const Dataset& data,
                                              const TrainConfig& config, int threads) {
    config.validate();
    const std::size_t n = config.seeds.size();
    std::vector<std::optional<TrainResult>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next >= n) return;
                i = next++;
            }
            try {
                results[i].emplace(train(model_config, data, config, config.seeds[i]));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    MultiSeedReport agg;
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : results) {
        agg.runs.push_back(r->report);
        values["best_valid_metric"].push_back(r->report.best_valid_metric);
        if (const auto& t = r->report.test) {
            if (t->aupr) values["test_aupr"].push_back(*t->aupr);
            if (t->f1) values["test_f1"].push_back(*t->f1);
            if (t->pcc) values["test_pcc"].push_back(*t->pcc);
            if (t->rmse) values["test_rmse"].push_back(*t->rmse);
        }
    }
    for (const auto& [k, v] : values) {
        if (v.size() != n) continue;
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        agg.mean[k] = mean;
        agg.sd[k] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    }
    return {std::move(results.front()->model), std::move(agg)};
}

}  // namespace tdti::train
