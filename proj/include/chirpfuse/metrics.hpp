#pragma once

#include <cstdint>
#include <vector>

namespace chirpfuse {

// Classification metrics. confusion[t][p] counts examples of true class t
// predicted as p; rates derive from it exactly (accuracy = trace / total).
struct Metrics {
    double accuracy = 0.0;
    double precision_macro = 0.0;
    double recall_macro = 0.0;
    double f1_macro = 0.0;
    std::vector<std::vector<std::uint64_t>> confusion;
    std::size_t params = 0;
};

// Macro averages are unweighted means of per-class values with 0/0 -> 0.
Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                        std::size_t n_classes);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax_lowest(const double* v, std::size_t n);

} // namespace chirpfuse
