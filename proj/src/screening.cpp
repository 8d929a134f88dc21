#include "tdti/screening.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "tdti/error.hpp"
#include "tdti/util/rng.hpp"
#include "tdti/util/tsv.hpp"

namespace tdti::screening {

namespace {

constexpr std::size_t kShardTrials = 250;

void check_k(double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0)) fail(ErrorKind::Config, "k percent must lie in (0, 100]");
}

std::optional<double> opt_cell(const TsvTable& t, const std::vector<std::string>& row, std::string_view col,
                               const std::string& path) {
    const auto c = t.find(col);
    if (!c || row[*c].empty()) return std::nullopt;
    return parse_real(row[*c], path);
}

std::string opt_text(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

double budget_percent(std::size_t prefix, std::size_t n) { return 100.0 * static_cast<double>(prefix) / static_cast<double>(n); }

struct Moments {
    std::vector<double> sum, sumsq;
};

}  // namespace

std::string_view to_string(RankCriterion c) {
    switch (c) {
        case RankCriterion::DockingAsc: return "docking_score_asc";
        case RankCriterion::AffinityAsc: return "affinity_asc";
        case RankCriterion::TwoKey: return "two_key";
    }
    return "docking_score_asc";
}

RankCriterion parse_rank_criterion(std::string_view text) {
    if (text == "docking" || text == "docking_score_asc") return RankCriterion::DockingAsc;
    if (text == "affinity" || text == "affinity_asc") return RankCriterion::AffinityAsc;
    if (text == "two_key" || text == "two_key_label_then_confidence") return RankCriterion::TwoKey;
    fail(ErrorKind::Usage, "unknown ranking criterion '" + std::string(text) + "'");
}

std::vector<ScoreRow> load_scores(const std::string& path) {
    const TsvTable t = read_tsv(path);
    const auto c_id = t.column("compound_id", path);
    const auto c_method = t.column("method", path);
    t.column("score", path);
    std::vector<ScoreRow> rows;
    rows.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        ScoreRow r;
        r.compound_id = row[c_id];
        r.method = row[c_method];
        r.score = opt_cell(t, row, "score", path);
        if (const auto c = t.find("label"); c && !row[*c].empty()) r.label = static_cast<int>(parse_int(row[*c], path));
        r.confidence = opt_cell(t, row, "confidence", path);
        r.unfamiliarity = opt_cell(t, row, "unfamiliarity", path);
        r.potency = opt_cell(t, row, "potency", path);
        rows.push_back(std::move(r));
    }
    return rows;
}

void save_scores(const std::vector<ScoreRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out << "compound_id\tmethod\tscore\tlabel\tconfidence\tunfamiliarity\tpotency\n";
    for (const auto& r : rows) {
        out << r.compound_id << '\t' << r.method << '\t' << opt_text(r.score) << '\t'
            << (r.label ? std::to_string(*r.label) : std::string()) << '\t' << opt_text(r.confidence) << '\t'
            << opt_text(r.unfamiliarity) << '\t' << opt_text(r.potency) << '\n';
    }
    if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

std::map<std::string, std::size_t> RankedLibrary::positions() const {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i + 1);
    return pos;
}

RankedLibrary rank(const std::vector<ScoreRow>& rows, RankCriterion criterion) {
    if (rows.empty()) fail(ErrorKind::Data, "rank: no rows");
    RankedLibrary lib;
    lib.method = rows.front().method;
    lib.criterion = criterion;
    std::set<std::string> seen;
    for (const auto& r : rows) {
        if (r.method != lib.method) fail(ErrorKind::Usage, "rank: rows from several methods ('" + lib.method + "', '" + r.method + "')");
        if (!seen.insert(r.compound_id).second) fail(ErrorKind::Data, "rank: duplicate compound '" + r.compound_id + "'");
        if (criterion == RankCriterion::TwoKey) {
            if (!r.label) fail(ErrorKind::MissingColumn, "two_key ranking needs a label for '" + r.compound_id + "'");
            if (!r.confidence) fail(ErrorKind::MissingColumn, "two_key ranking needs a confidence for '" + r.compound_id + "'");
        } else if (!r.score) {
            fail(ErrorKind::MissingColumn, std::string(to_string(criterion)) + " ranking needs a score for '" + r.compound_id + "'");
        }
    }
    std::vector<const ScoreRow*> order;
    for (const auto& r : rows) order.push_back(&r);
    if (criterion == RankCriterion::TwoKey) {
        std::sort(order.begin(), order.end(), [](const ScoreRow* a, const ScoreRow* b) {
            const bool pa = *a->label == 1, pb = *b->label == 1;
            if (pa != pb) return pa;
            if (*a->confidence != *b->confidence) return *a->confidence < *b->confidence;
            return a->compound_id < b->compound_id;
        });
    } else {
        std::sort(order.begin(), order.end(), [](const ScoreRow* a, const ScoreRow* b) {
            if (*a->score != *b->score) return *a->score < *b->score;
            return a->compound_id < b->compound_id;
        });
    }
    for (const auto* r : order) lib.ids.push_back(r->compound_id);
    return lib;
}

ActiveSet load_actives(const std::string& path) {
    const TsvTable t = read_tsv(path);
    const auto c_id = t.column("compound_id", path);
    const auto c_pot = t.find("potency");
    ActiveSet a;
    for (const auto& row : t.rows) {
        a.ids.insert(row[c_id]);
        if (c_pot && !row[*c_pot].empty()) a.potency[row[c_id]] = parse_real(row[*c_pot], path);
    }
    return a;
}

ActiveSet align_actives(const std::vector<RankedLibrary>& libraries, const std::vector<ActiveSet>& per_method) {
    if (per_method.empty()) fail(ErrorKind::Usage, "align_actives needs at least one method");
    ActiveSet out = per_method.front();
    for (std::size_t m = 1; m < per_method.size(); ++m) {
        std::set<std::string> keep;
        std::set_intersection(out.ids.begin(), out.ids.end(), per_method[m].ids.begin(), per_method[m].ids.end(),
                              std::inserter(keep, keep.end()));
        out.ids = std::move(keep);
    }
    for (const auto& lib : libraries) {
        const std::set<std::string> present(lib.ids.begin(), lib.ids.end());
        std::erase_if(out.ids, [&present](const std::string& id) { return !present.count(id); });
    }
    std::erase_if(out.potency, [&out](const auto& kv) { return !out.ids.count(kv.first); });
    if (out.ids.empty()) fail(ErrorKind::Data, "aligned active set is empty");
    return out;
}

double recall_at_k(const RankedLibrary& ranked, const ActiveSet& actives, std::size_t k) {
    if (actives.size() == 0) fail(ErrorKind::Data, "no actives");
    if (k < 1 || k > ranked.size()) fail(ErrorKind::Config, "k must lie in [1, N]");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += actives.ids.count(ranked.ids[i]);
    return static_cast<double>(hits) / static_cast<double>(actives.size());
}

double ef_at_k(const RankedLibrary& ranked, const ActiveSet& actives, std::size_t k) {
    return recall_at_k(ranked, actives, k) * static_cast<double>(ranked.size()) / static_cast<double>(k);
}

std::size_t target_count(double k_percent, std::size_t actives) {
    check_k(k_percent);
    const auto c = static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(actives) / 100.0));
    return std::max<std::size_t>(c, 1);
}

double kpct_actives_budget(const RankedLibrary& ranked, const ActiveSet& actives, double k_percent) {
    if (actives.size() == 0) fail(ErrorKind::Data, "no actives");
    const std::size_t need = target_count(k_percent, actives.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        hits += actives.ids.count(ranked.ids[i]);
        if (hits >= need) return budget_percent(i + 1, ranked.size());
    }
    fail(ErrorKind::Data, "only " + std::to_string(hits) + " of " + std::to_string(need) + " required actives are in the library");
}

double topk_potency_budget(const RankedLibrary& ranked, const ActiveSet& actives, double k_percent) {
    if (actives.size() == 0) fail(ErrorKind::Data, "no actives");
    std::vector<std::pair<double, std::string>> by_potency;
    for (const auto& id : actives.ids) {
        const auto it = actives.potency.find(id);
        if (it == actives.potency.end()) fail(ErrorKind::MissingColumn, "active '" + id + "' has no potency");
        by_potency.emplace_back(it->second, id);
    }
    std::sort(by_potency.begin(), by_potency.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const std::size_t need = target_count(k_percent, actives.size());
    const auto pos = ranked.positions();
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < need; ++i) {
        const auto it = pos.find(by_potency[i].second);
        if (it == pos.end()) fail(ErrorKind::Data, "active '" + by_potency[i].second + "' is not in the library");
        deepest = std::max(deepest, it->second);
    }
    return budget_percent(deepest, ranked.size());
}

double topk_recall_at_fraction(const RankedLibrary& ranked, const ActiveSet& actives, double k_percent) {
    const std::size_t k = target_count(k_percent, ranked.size());
    return 100.0 * recall_at_k(ranked, actives, k);
}

std::vector<BaselineStat> random_baseline(std::size_t n, std::size_t a, const std::vector<double>& k_percents,
                                          std::size_t trials, std::uint64_t seed, BudgetView view, int threads) {
    if (trials < 1) fail(ErrorKind::Config, "random_baseline needs at least one trial");
    if (a < 1 || a > n) fail(ErrorKind::Config, "random_baseline needs 1 <= A <= N");
    std::vector<std::size_t> need;
    for (double k : k_percents) need.push_back(target_count(k, a));
    const std::size_t nk = need.size();
    const std::size_t shards = (trials + kShardTrials - 1) / kShardTrials;
    std::vector<Moments> parts(shards, Moments{std::vector<double>(nk, 0.0), std::vector<double>(nk, 0.0)});

    auto run_shard = [&](std::size_t s) {
        Rng rng(derive_seed(seed, s));
        const std::size_t begin = s * kShardTrials;
        const std::size_t end = std::min(trials, begin + kShardTrials);
        std::vector<std::size_t> perm(n);
        std::vector<std::size_t> pos_of(a);
        std::vector<std::size_t> active_pos;
        active_pos.reserve(a);
        for (std::size_t t = begin; t < end; ++t) {
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng() % i)]);
            // Items 0..a-1 are actives, item i being the (i+1)-th most potent.
            active_pos.clear();
            for (std::size_t p = 0; p < n; ++p) {
                if (perm[p] < a) {
                    pos_of[perm[p]] = p + 1;
                    active_pos.push_back(p + 1);
                }
            }
            for (std::size_t k = 0; k < nk; ++k) {
                std::size_t prefix;
                if (view == BudgetView::ActivesRecovered) {
                    prefix = active_pos[need[k] - 1];
                } else {
                    prefix = *std::max_element(pos_of.begin(), pos_of.begin() + static_cast<std::ptrdiff_t>(need[k]));
                }
                const double b = budget_percent(prefix, n);
                parts[s].sum[k] += b;
                parts[s].sumsq[k] += b * b;
            }
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(shards)));
    if (workers == 1) {
        for (std::size_t s = 0; s < shards; ++s) run_shard(s);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t s = static_cast<std::size_t>(w); s < shards; s += static_cast<std::size_t>(workers)) run_shard(s);
            });
        }
        for (auto& t : pool) t.join();
    }

    std::vector<BaselineStat> out(nk);
    const double tn = static_cast<double>(trials);
    for (std::size_t k = 0; k < nk; ++k) {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& p : parts) {
            sum += p.sum[k];
            sumsq += p.sumsq[k];
        }
        out[k].mean = sum / tn;
        out[k].sd = trials > 1 ? std::sqrt(std::max(0.0, (sumsq - sum * sum / tn) / (tn - 1.0))) : 0.0;
    }
    return out;
}

FilterResult filter_unfamiliar(const std::vector<ScoreRow>& rows, double threshold, const std::string& population) {
    FilterResult r;
    r.census.population = population;
    r.census.docked = rows.size();
    for (const auto& row : rows) {
        if (!row.unfamiliarity) fail(ErrorKind::MissingColumn, "unfamiliarity missing for '" + row.compound_id + "'");
        if (*row.unfamiliarity < threshold) r.rows.push_back(row);
    }
    r.census.retained = r.rows.size();
    return r;
}

EnrichmentReport enrichment_report(const std::vector<RankedLibrary>& libraries, const ActiveSet& actives,
                                   const EnrichmentOptions& options) {
    if (libraries.empty()) fail(ErrorKind::Usage, "enrichment_report needs at least one ranked library");
    if (actives.size() == 0) fail(ErrorKind::Data, "no actives");
    for (double k : options.k_grid) check_k(k);
    const bool have_potency = actives.potency.size() == actives.ids.size();

    EnrichmentReport rep;
    rep.k_grid = options.k_grid;
    rep.actives = actives.size();
    rep.trials = options.trials;
    for (const auto& lib : libraries) {
        MethodEnrichment m;
        m.method = lib.method;
        m.n = lib.size();
        if (have_potency) m.topk_budget.emplace();
        if (options.topk_fraction) m.topk_recall_pct.emplace();
        for (double k : options.k_grid) {
            m.ar_budget.push_back(kpct_actives_budget(lib, actives, k));
            if (have_potency) m.topk_budget->push_back(topk_potency_budget(lib, actives, k));
            const std::size_t cut = target_count(k, lib.size());
            m.recall.push_back(recall_at_k(lib, actives, cut));
            m.ef.push_back(ef_at_k(lib, actives, cut));
            if (options.topk_fraction) m.topk_recall_pct->push_back(topk_recall_at_fraction(lib, actives, k));
        }
        rep.methods.push_back(std::move(m));
    }
    const std::size_t n = libraries.front().size();
    rep.random_ar = random_baseline(n, actives.size(), options.k_grid, options.trials, options.seed,
                                    BudgetView::ActivesRecovered, options.threads);
    if (have_potency) {
        rep.random_topk = random_baseline(n, actives.size(), options.k_grid, options.trials, derive_seed(options.seed, 1),
                                          BudgetView::TopPotency, options.threads);
    }
    return rep;
}

nlohmann::json to_json(const EnrichmentReport& r) {
    auto stats = [](const std::vector<BaselineStat>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& s : v) a.push_back({{"mean", s.mean}, {"sd", s.sd}});
        return a;
    };
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : r.methods) {
        methods.push_back({{"method", m.method},
                           {"n", m.n},
                           {"ar_budget", m.ar_budget},
                           {"topk_budget", m.topk_budget ? nlohmann::json(*m.topk_budget) : nlohmann::json(nullptr)},
                           {"recall", m.recall},
                           {"ef", m.ef},
                           {"topk_recall_pct", m.topk_recall_pct ? nlohmann::json(*m.topk_recall_pct) : nlohmann::json(nullptr)}});
    }
    return {{"k_grid", r.k_grid},
            {"actives", r.actives},
            {"trials", r.trials},
            {"methods", methods},
            {"random_ar", stats(r.random_ar)},
            {"random_topk", r.random_topk ? stats(*r.random_topk) : nlohmann::json(nullptr)}};
}

EnrichmentReport report_from_json(const nlohmann::json& j) {
    EnrichmentReport r;
    auto stats = [](const nlohmann::json& a) {
        std::vector<BaselineStat> v;
        for (const auto& s : a) v.push_back({s.at("mean").get<double>(), s.at("sd").get<double>()});
        return v;
    };
    try {
        r.k_grid = j.at("k_grid").get<std::vector<double>>();
        r.actives = j.at("actives").get<std::size_t>();
        r.trials = j.at("trials").get<std::size_t>();
        for (const auto& m : j.at("methods")) {
            MethodEnrichment e;
            e.method = m.at("method").get<std::string>();
            e.n = m.at("n").get<std::size_t>();
            e.ar_budget = m.at("ar_budget").get<std::vector<double>>();
            if (!m.at("topk_budget").is_null()) e.topk_budget = m.at("topk_budget").get<std::vector<double>>();
            e.recall = m.at("recall").get<std::vector<double>>();
            e.ef = m.at("ef").get<std::vector<double>>();
            if (m.contains("topk_recall_pct") && !m.at("topk_recall_pct").is_null()) {
                e.topk_recall_pct = m.at("topk_recall_pct").get<std::vector<double>>();
            }
            if (e.ar_budget.size() != r.k_grid.size() || e.recall.size() != r.k_grid.size() || e.ef.size() != r.k_grid.size()) {
                fail(ErrorKind::Format, "enrichment report: column length differs from k grid");
            }
            r.methods.push_back(std::move(e));
        }
        r.random_ar = stats(j.at("random_ar"));
        if (!j.at("random_topk").is_null()) r.random_topk = stats(j.at("random_topk"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("enrichment report: ") + e.what());
    }
    return r;
}

std::string to_tsv(const EnrichmentReport& r) {
    std::ostringstream out;
    out << "view\tk\tmethod\tvalue\n";
    auto row = [&out](std::string_view view, double k, const std::string& method, double v) {
        out << view << '\t' << format_real(k) << '\t' << method << '\t' << format_real(v) << '\n';
    };
    for (std::size_t i = 0; i < r.k_grid.size(); ++i) {
        const double k = r.k_grid[i];
        for (const auto& m : r.methods) row("ar_budget", k, m.method, m.ar_budget[i]);
        row("ar_budget", k, "random", r.random_ar[i].mean);
    }
    if (r.random_topk) {
        for (std::size_t i = 0; i < r.k_grid.size(); ++i) {
            const double k = r.k_grid[i];
            for (const auto& m : r.methods) {
                if (m.topk_budget) row("topk_budget", k, m.method, (*m.topk_budget)[i]);
            }
            row("topk_budget", k, "random", (*r.random_topk)[i].mean);
        }
    }
    for (std::size_t i = 0; i < r.k_grid.size(); ++i) {
        for (const auto& m : r.methods) row("recall", r.k_grid[i], m.method, m.recall[i]);
    }
    for (std::size_t i = 0; i < r.k_grid.size(); ++i) {
        for (const auto& m : r.methods) row("ef", r.k_grid[i], m.method, m.ef[i]);
    }
    for (std::size_t i = 0; i < r.k_grid.size(); ++i) {
        for (const auto& m : r.methods) {
            if (m.topk_recall_pct) row("topk_recall_pct", r.k_grid[i], m.method, (*m.topk_recall_pct)[i]);
        }
    }
    return out.str();
}

}  // namespace tdti::screening
