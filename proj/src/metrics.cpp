#include "chirpfuse/metrics.hpp"

#include "chirpfuse/error.hpp"

namespace chirpfuse {

std::size_t argmax_lowest(const double* v, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                        std::size_t n_classes) {
    if (truth.size() != pred.size())
        throw InternalError("metrics: truth and prediction counts differ");
    if (truth.empty()) throw InternalError("metrics: empty evaluation set");

    Metrics m;
    m.confusion.assign(n_classes, std::vector<std::uint64_t>(n_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes ||
            static_cast<std::size_t>(p) >= n_classes)
            throw InternalError("metrics: class index out of range");
        ++m.confusion[t][p];
    }

    std::uint64_t correct = 0;
    for (std::size_t c = 0; c < n_classes; ++c) correct += m.confusion[c][c];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

    double prc_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::uint64_t tp = m.confusion[c][c];
        std::uint64_t truth_count = 0, pred_count = 0;
        for (std::size_t j = 0; j < n_classes; ++j) {
            truth_count += m.confusion[c][j];
            pred_count += m.confusion[j][c];
        }
        double prc = pred_count == 0 ? 0.0
                                     : static_cast<double>(tp) /
                                           static_cast<double>(pred_count);
        double rec = truth_count == 0 ? 0.0
                                      : static_cast<double>(tp) /
                                            static_cast<double>(truth_count);
        double f1 = (prc + rec) == 0.0 ? 0.0 : 2.0 * prc * rec / (prc + rec);
        prc_sum += prc;
        rec_sum += rec;
        f1_sum += f1;
    }
    double inv = 1.0 / static_cast<double>(n_classes);
    m.precision_macro = prc_sum * inv;
    m.recall_macro = rec_sum * inv;
    m.f1_macro = f1_sum * inv;
    return m;
}

} // namespace chirpfuse
