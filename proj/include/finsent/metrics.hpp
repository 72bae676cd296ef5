#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "finsent/errors.hpp"

namespace finsent {

// Cosine similarity is undefined when either vector has zero norm.
class UndefinedSimilarityError : public Error {
public:
    using Error::Error;
};

// Gold scores with the system's answers; a missing answer is nullopt.
struct PredictionSet {
    std::vector<double> gold;
    std::vector<std::optional<double>> predicted;

    std::size_t gold_total() const { return gold.size(); }
    std::size_t answered() const;
    // Throws DataError on length mismatch, gold outside [-1, 1], or a
    // non-finite prediction.
    void validate() const;

    static PredictionSet complete(std::span<const double> gold, std::span<const double> predicted);
};

// sum(g*p) / (|g| |p|).
double cosine_similarity(std::span<const double> gold, std::span<const double> predicted);

// (answered / |G|) * cosine over the answered pairs. No answers at all gives
// 0 and a warning on `warnings` (when non-null).
double weighted_score(const PredictionSet& preds, std::ostream* warnings = nullptr);

struct SignedBreakdown {
    std::optional<double> positive;  // prediction >= 0
    std::optional<double> negative;  // prediction < 0
};

// Cosine within each prediction-sign group. A group that is empty, or whose
// cosine is undefined, is reported as absent.
SignedBreakdown signed_breakdown(const PredictionSet& preds);

struct EvaluationReport {
    std::optional<double> cosine;
    double score = 0.0;
    SignedBreakdown breakdown;
    std::size_t n_answered = 0;
    std::size_t n_gold = 0;

    // `metric<TAB>value` lines; absent values print as NA.
    void write(std::ostream& out) const;
};

EvaluationReport evaluate_predictions(const PredictionSet& preds, std::ostream* warnings = nullptr);

}  // namespace finsent
