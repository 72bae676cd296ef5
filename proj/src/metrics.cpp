#include "finsent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace finsent {

std::size_t PredictionSet::answered() const {
    std::size_t n = 0;
    for (const auto& p : predicted) n += p.has_value();
    return n;
}

void PredictionSet::validate() const {
    if (gold.size() != predicted.size()) {
        throw DataError("prediction set has " + std::to_string(gold.size()) + " gold scores but " +
                        std::to_string(predicted.size()) + " prediction slots");
    }
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!(gold[i] >= -1.0 && gold[i] <= 1.0)) {
            throw DataError("gold score " + std::to_string(i) + " outside [-1, 1]");
        }
        if (predicted[i] && !std::isfinite(*predicted[i])) {
            throw DataError("prediction " + std::to_string(i) + " is not finite");
        }
    }
}

PredictionSet PredictionSet::complete(std::span<const double> gold, std::span<const double> predicted) {
    PredictionSet set;
    set.gold.assign(gold.begin(), gold.end());
    set.predicted.assign(predicted.begin(), predicted.end());
    return set;
}

double cosine_similarity(std::span<const double> gold, std::span<const double> predicted) {
    if (gold.size() != predicted.size()) {
        throw DataError("cosine_similarity: " + std::to_string(gold.size()) + " gold vs " +
                        std::to_string(predicted.size()) + " predicted values");
    }
    if (gold.empty()) throw DataError("cosine_similarity: empty vectors");
    double dot = 0.0, gg = 0.0, pp = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        dot += gold[i] * predicted[i];
        gg += gold[i] * gold[i];
        pp += predicted[i] * predicted[i];
    }
    if (gg == 0.0 || pp == 0.0) {
        throw UndefinedSimilarityError(std::string("cosine similarity undefined: ") +
                                       (gg == 0.0 ? "gold" : "predicted") + " vector has zero norm");
    }
    // Clamp rounding excursions just past +-1.
    return std::clamp(dot / (std::sqrt(gg) * std::sqrt(pp)), -1.0, 1.0);
}

namespace {

struct Answered {
    std::vector<double> gold;
    std::vector<double> predicted;
};

Answered answered_pairs(const PredictionSet& preds) {
    Answered out;
    for (std::size_t i = 0; i < preds.gold.size(); ++i) {
        if (!preds.predicted[i]) continue;
        out.gold.push_back(preds.gold[i]);
        out.predicted.push_back(*preds.predicted[i]);
    }
    return out;
}

std::optional<double> group_cosine(const std::vector<double>& gold, const std::vector<double>& predicted) {
    if (gold.empty()) return std::nullopt;
    try {
        return cosine_similarity(gold, predicted);
    } catch (const UndefinedSimilarityError&) {
        return std::nullopt;
    }
}

}  // namespace

double weighted_score(const PredictionSet& preds, std::ostream* warnings) {
    preds.validate();
    const auto pairs = answered_pairs(preds);
    if (pairs.gold.empty()) {
        if (warnings) *warnings << "warning: no instance was answered; score is 0\n";
        return 0.0;
    }
    const double ratio = static_cast<double>(pairs.gold.size()) / static_cast<double>(preds.gold_total());
    return ratio * cosine_similarity(pairs.gold, pairs.predicted);
}

SignedBreakdown signed_breakdown(const PredictionSet& preds) {
    preds.validate();
    std::vector<double> pos_gold, pos_pred, neg_gold, neg_pred;
    for (std::size_t i = 0; i < preds.gold.size(); ++i) {
        if (!preds.predicted[i]) continue;
        const double p = *preds.predicted[i];
        if (p >= 0.0) {
            pos_gold.push_back(preds.gold[i]);
            pos_pred.push_back(p);
        } else {
            neg_gold.push_back(preds.gold[i]);
            neg_pred.push_back(p);
        }
    }
    return {group_cosine(pos_gold, pos_pred), group_cosine(neg_gold, neg_pred)};
}

EvaluationReport evaluate_predictions(const PredictionSet& preds, std::ostream* warnings) {
    preds.validate();
    EvaluationReport report;
    report.n_gold = preds.gold_total();
    report.n_answered = preds.answered();
    const auto pairs = answered_pairs(preds);
    report.cosine = group_cosine(pairs.gold, pairs.predicted);
    if (pairs.gold.empty() || report.cosine) report.score = weighted_score(preds, warnings);
    else if (warnings) *warnings << "warning: cosine similarity undefined (zero-norm vector); score reported as 0\n";
    report.breakdown = signed_breakdown(preds);
    return report;
}

void EvaluationReport::write(std::ostream& out) const {
    const auto value = [](std::optional<double> v) {
        if (!v) return std::string("NA");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        return std::string(buf);
    };
    out << "cosine\t" << value(cosine) << '\n'
        << "score\t" << value(score) << '\n'
        << "cosine_positive\t" << value(breakdown.positive) << '\n'
        << "cosine_negative\t" << value(breakdown.negative) << '\n'
        << "n_answered\t" << n_answered << '\n'
        << "n_gold\t" << n_gold << '\n';
}

}  // namespace finsent
