#pragma once

#include <map>
#include <string>
#include <vector>

#include <fimcb/dataset.hpp>

namespace fimcb {

struct Prediction {
    std::string id;
    Stress predicted = Stress::Heat;
    Stress truth = Stress::Heat;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// correct / total. Throws std::invalid_argument on an empty list.
double accuracy(const std::vector<Prediction>& preds);

/// Fraction of each antibody's predictions that are correct, keyed by
/// antibody label; only antibodies present in preds appear. Prediction ids
/// must resolve in the manifest.
std::map<std::string, double> per_antibody_tpr(const std::vector<Prediction>& preds,
                                               const Manifest& manifest);

/// One table row: a color mode's best-run outcome.
struct ModeEval {
    std::string mode;
    double overall_accuracy = 0.0;
    std::vector<Prediction> preds;
};

struct ReportFiles {
    std::string csv;
    std::string text;
};

/// Rows = modes; columns = overall accuracy, then per-antibody TPR grouped
/// into heat and mechanical blocks. Per column the max is marked "*" and the
/// second-highest distinct value "+"; ties mark every holder of the max and
/// leave "+" unassigned. Output is a deterministic function of the inputs.
ReportFiles render_report(const std::vector<ModeEval>& modes, const Manifest& manifest);

} // namespace fimcb
