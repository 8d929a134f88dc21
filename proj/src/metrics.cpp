#include "tdti/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tdti/error.hpp"

namespace tdti::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) fail(ErrorKind::Shape, std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                           std::to_string(b) + ")");
}

double quantile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CategorySummary summarize(std::vector<double> v) {
    CategorySummary s;
    s.count = static_cast<long>(v.size());
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.q25 = quantile(v, 0.25);
    s.median = quantile(v, 0.5);
    s.q75 = quantile(v, 0.75);
    return s;
}

std::optional<double> pooled_mean(const CategorySummary& a, const CategorySummary& b) {
    const long n = a.count + b.count;
    if (n == 0) return std::nullopt;
    return (a.mean.value_or(0.0) * a.count + b.mean.value_or(0.0) * b.count) / static_cast<double>(n);
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

double aupr(std::vector<ScoredLabel> items) {
    long pos = 0;
    for (const auto& it : items) {
        if (it.label != 0 && it.label != 1) fail(ErrorKind::Data, "aupr: labels must be 0 or 1");
        if (!std::isfinite(it.score)) fail(ErrorKind::Numeric, "aupr: non-finite score for '" + it.id + "'");
        pos += it.label;
    }
    if (pos == 0 || pos == static_cast<long>(items.size())) fail(ErrorKind::Data, "aupr needs both classes");
    std::stable_sort(items.begin(), items.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    double ap = 0.0;
    long hits = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].label == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return ap / static_cast<double>(pos);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
    check_lengths(scores.size(), labels.size(), "aupr");
    std::vector<ScoredLabel> items;
    items.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        // Zero-padded so lexical order equals input order.
        std::string id = std::to_string(i);
        id.insert(0, 20 - id.size(), '0');
        items.push_back({scores[i], labels[i], std::move(id)});
    }
    return aupr(std::move(items));
}

Counts confusion_counts(std::span<const double> probs, std::span<const int> labels, double threshold) {
    check_lengths(probs.size(), labels.size(), "confusion");
    if (!std::isfinite(threshold)) fail(ErrorKind::Config, "threshold must be finite");
    Counts c;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        const bool truth = labels[i] == 1;
        if (pred && truth) ++c.tp;
        else if (pred) ++c.fp;
        else if (truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_from_counts(const Counts& c) {
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    return denom == 0.0 ? 0.0 : 2.0 * c.tp / denom;
}

double f1(std::span<const double> probs, std::span<const int> labels, double threshold) {
    return f1_from_counts(confusion_counts(probs, labels, threshold));
}

double pcc(std::span<const double> x, std::span<const double> y) {
    check_lengths(x.size(), y.size(), "pcc");
    if (x.size() < 2) fail(ErrorKind::Data, "pcc needs at least 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::Numeric, "pcc undefined: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double rmse(std::span<const double> x, std::span<const double> y) {
    check_lengths(x.size(), y.size(), "rmse");
    if (x.empty()) fail(ErrorKind::Data, "rmse of empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s / static_cast<double>(x.size()));
}

std::optional<double> ConfusionSummary::mean_correct() const { return pooled_mean(tp, tn); }
std::optional<double> ConfusionSummary::mean_incorrect() const { return pooled_mean(fp, fn); }

ConfusionSummary confusion_confidence(std::span<const double> probs, std::span<const int> labels,
                                      std::span<const double> confidences, double threshold) {
    check_lengths(probs.size(), labels.size(), "confusion_confidence");
    check_lengths(probs.size(), confidences.size(), "confusion_confidence");
    std::vector<double> tp, fp, tn, fn;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        const bool truth = labels[i] == 1;
        (pred ? (truth ? tp : fp) : (truth ? fn : tn)).push_back(confidences[i]);
    }
    return {summarize(std::move(tp)), summarize(std::move(fp)), summarize(std::move(tn)), summarize(std::move(fn))};
}

nlohmann::json to_json(const MetricBundle& m) {
    nlohmann::json j;
    if (m.aupr) j["aupr"] = *m.aupr;
    if (m.f1) j["f1"] = *m.f1;
    if (m.pcc) j["pcc"] = *m.pcc;
    if (m.rmse) j["rmse"] = *m.rmse;
    if (!m.errors.empty()) j["errors"] = m.errors;
    return j;
}

nlohmann::json to_json(const ConfusionSummary& s) {
    auto cat = [](const CategorySummary& c) {
        return nlohmann::json{{"count", c.count}, {"mean", opt(c.mean)}, {"q25", opt(c.q25)},
                              {"median", opt(c.median)}, {"q75", opt(c.q75)}};
    };
    return {{"TP", cat(s.tp)}, {"FP", cat(s.fp)}, {"TN", cat(s.tn)}, {"FN", cat(s.fn)},
            {"mean_correct", opt(s.mean_correct())}, {"mean_incorrect", opt(s.mean_incorrect())}};
}

}  // namespace tdti::metrics
