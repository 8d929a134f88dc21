#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace tdti::metrics {

struct ScoredLabel {
    double score;
    int label;
    std::string id;  // secondary sort key
};

/// Average precision. Items are ranked by score descending, then id
/// ascending, then input order. Fails on single-class input.
double aupr(std::vector<ScoredLabel> items);
/// Ids default to input position.
double aupr(std::span<const double> scores, std::span<const int> labels);

struct Counts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;

    long total() const { return tp + fp + tn + fn; }
};

/// Predicted positive iff probability >= threshold.
Counts confusion_counts(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);
double f1_from_counts(const Counts& c);
double f1(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);

/// Fails when either side has zero variance.
double pcc(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);

template <typename DX, typename DY>
double pcc(const Eigen::DenseBase<DX>& x, const Eigen::DenseBase<DY>& y) {
    const Eigen::VectorXd a = x.derived().template cast<double>().reshaped();
    const Eigen::VectorXd b = y.derived().template cast<double>().reshaped();
    return pcc(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
}

template <typename DX, typename DY>
double rmse(const Eigen::DenseBase<DX>& x, const Eigen::DenseBase<DY>& y) {
    const Eigen::VectorXd a = x.derived().template cast<double>().reshaped();
    const Eigen::VectorXd b = y.derived().template cast<double>().reshaped();
    return rmse(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
}

struct CategorySummary {
    long count = 0;
    std::optional<double> mean;
    std::optional<double> q25, median, q75;
};

struct ConfusionSummary {
    CategorySummary tp, fp, tn, fn;

    long total() const { return tp.count + fp.count + tn.count + fn.count; }
    /// Mean confidence over TP and TN, and over FP and FN.
    std::optional<double> mean_correct() const;
    std::optional<double> mean_incorrect() const;
};

ConfusionSummary confusion_confidence(std::span<const double> probs, std::span<const int> labels,
                                      std::span<const double> confidences, double threshold = 0.5);

/// Headline numbers for one evaluation. A metric that cannot be computed is
/// absent and its reason recorded.
struct MetricBundle {
    std::optional<double> aupr;
    std::optional<double> f1;
    std::optional<double> pcc;
    std::optional<double> rmse;
    std::vector<std::string> errors;
};

nlohmann::json to_json(const MetricBundle& m);
nlohmann::json to_json(const ConfusionSummary& s);

}  // namespace tdti::metrics
