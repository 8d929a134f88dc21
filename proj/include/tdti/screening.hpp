#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tdti::screening {

enum class RankCriterion { DockingAsc, AffinityAsc, TwoKey };

std::string_view to_string(RankCriterion c);
/// Accepts docking, affinity, two_key and the long forms.
RankCriterion parse_rank_criterion(std::string_view text);

/// One row of the score TSV
/// `compound_id method score [label] [confidence] [unfamiliarity] [potency]`.
struct ScoreRow {
    std::string compound_id;
    std::string method;
    std::optional<double> score;
    std::optional<int> label;
    std::optional<double> confidence;
    std::optional<double> unfamiliarity;
    std::optional<double> potency;
};

std::vector<ScoreRow> load_scores(const std::string& path);
void save_scores(const std::vector<ScoreRow>& rows, const std::string& path);

struct RankedLibrary {
    std::string method;
    RankCriterion criterion = RankCriterion::DockingAsc;
    std::vector<std::string> ids;  // best first

    std::size_t size() const { return ids.size(); }
    /// 1-based rank of every id.
    std::map<std::string, std::size_t> positions() const;
};

/// Docking and affinity: score ascending. Two-key: label 1 before 0, then
/// confidence ascending. Ties go to the smaller id. Fails with MISSING_COLUMN
/// when a row lacks what the criterion reads, and on duplicate ids.
RankedLibrary rank(const std::vector<ScoreRow>& rows, RankCriterion criterion);

struct ActiveSet {
    std::set<std::string> ids;
    std::map<std::string, double> potency;  // higher is more potent

    std::size_t size() const { return ids.size(); }
};

/// `compound_id [potency]`.
ActiveSet load_actives(const std::string& path);

/// Intersection of the per-method sets, restricted to ids present in every
/// library. Fails when it is empty.
ActiveSet align_actives(const std::vector<RankedLibrary>& libraries, const std::vector<ActiveSet>& per_method);

/// Fraction of actives within the first k compounds (1 <= k <= N).
double recall_at_k(const RankedLibrary& ranked, const ActiveSet& actives, std::size_t k);
/// Recall@k * N / k.
double ef_at_k(const RankedLibrary& ranked, const ActiveSet& actives, std::size_t k);

/// ceil(k% * A), at least 1.
std::size_t target_count(double k_percent, std::size_t actives);

/// 100 * L / N for the shortest prefix L holding ceil(k% * A) actives.
double kpct_actives_budget(const RankedLibrary& ranked, const ActiveSet& actives, double k_percent);

/// 100 * L / N for the shortest prefix holding all of the ceil(k% * A) most
/// potent actives (potency descending, equal potencies by id ascending).
/// Fails when an active has no potency.
double topk_potency_budget(const RankedLibrary& ranked, const ActiveSet& actives, double k_percent);

/// Alternative Top-k reading: fraction of actives found in the first
/// ceil(k% * N) compounds, in percent.
double topk_recall_at_fraction(const RankedLibrary& ranked, const ActiveSet& actives, double k_percent);

enum class BudgetView { ActivesRecovered, TopPotency };

struct BaselineStat {
    double mean = 0.0;
    double sd = 0.0;
};

/// Monte Carlo budgets under uniform random permutations of N compounds with
/// A actives, one entry per k. Trials are sharded with seeds derived from
/// `seed`, so the result does not depend on `threads`.
std::vector<BaselineStat> random_baseline(std::size_t n, std::size_t a, const std::vector<double>& k_percents,
                                          std::size_t trials, std::uint64_t seed, BudgetView view = BudgetView::ActivesRecovered,
                                          int threads = 1);

struct FilterCensus {
    std::string population;
    std::size_t docked = 0;    // rows before filtering
    std::size_t retained = 0;  // rows with U < threshold
};

struct FilterResult {
    std::vector<ScoreRow> rows;
    FilterCensus census;
};

/// Keeps rows with unfamiliarity strictly below `threshold`. Fails with
/// MISSING_COLUMN when a row has no unfamiliarity.
FilterResult filter_unfamiliar(const std::vector<ScoreRow>& rows, double threshold = 1.0,
                               const std::string& population = "all");

inline const std::vector<double> kDefaultKGrid{1, 5, 20, 50, 100};

struct MethodEnrichment {
    std::string method;
    std::size_t n = 0;
    std::vector<double> ar_budget;                 // per k
    std::optional<std::vector<double>> topk_budget;  // when potencies are known
    std::vector<double> recall;                    // at ceil(k% * N)
    std::vector<double> ef;
    std::optional<std::vector<double>> topk_recall_pct;  // alternative Top-k reading
};

struct EnrichmentReport {
    std::vector<double> k_grid;
    std::size_t actives = 0;
    std::vector<MethodEnrichment> methods;
    std::vector<BaselineStat> random_ar;
    std::optional<std::vector<BaselineStat>> random_topk;
    std::size_t trials = 0;
};

struct EnrichmentOptions {
    std::vector<double> k_grid = kDefaultKGrid;
    std::size_t trials = 10000;
    std::uint64_t seed = 0;
    int threads = 1;
    bool topk_fraction = false;  // also emit topk_recall_at_fraction
};

/// Libraries must share one aligned active set. The random column uses the
/// first library's N.
EnrichmentReport enrichment_report(const std::vector<RankedLibrary>& libraries, const ActiveSet& actives,
                                   const EnrichmentOptions& options = {});

nlohmann::json to_json(const EnrichmentReport& r);
/// Rows `view k method value`, with method "random" for the baseline mean.
std::string to_tsv(const EnrichmentReport& r);
EnrichmentReport report_from_json(const nlohmann::json& j);

}  // namespace tdti::screening
