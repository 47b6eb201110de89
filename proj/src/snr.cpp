#include "nci/snr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace nci {

void SnrModel::validate() const {
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("snr model: a and b must be >= 0");
}

double predict_snr_db(const SnrModel& model, double code_rms_r, double L, int w, int M) {
    model.validate();
    if (!(code_rms_r > 0.0) || !(L > 0.0) || w < 1 || M < 1)
        throw std::invalid_argument("predict_snr: parameters must be positive");
    const double sigma = model.a + model.b * std::sqrt(L);
    if (sigma <= 0.0) return kSnrMaxDb;
    const double snr = std::sqrt(double(M) * w) * code_rms_r / sigma;
    return std::min(20.0 * std::log10(snr), kSnrMaxDb);
}

namespace {

double median(std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("snr: no valid pixels");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace

double measure_snr_db(const std::vector<CodeImage>& trials) {
    if (trials.size() < 2) throw std::invalid_argument("measure_snr: need >= 2 trials");
    const Image& first = trials[0].values;
    for (const CodeImage& t : trials)
        if (!t.values.same_shape(first))
            throw std::invalid_argument("measure_snr: trial shape mismatch");

    const double nt = static_cast<double>(trials.size());
    std::vector<double> db;
    db.reserve(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        bool ok = true;
        double mean = 0.0;
        for (const CodeImage& t : trials) {
            if (!t.sample_valid(i)) ok = false;
            mean += t.values.data[i];
        }
        if (!ok) continue;
        mean /= nt;
        double ss = 0.0;
        for (const CodeImage& t : trials) {
            const double d = t.values.data[i] - mean;
            ss += d * d;
        }
        const double std_dev = std::sqrt(ss / (nt - 1.0));
        if (std_dev <= 0.0) {
            db.push_back(kSnrMaxDb);
        } else if (mean == 0.0) {
            db.push_back(-kSnrMaxDb);
        } else {
            db.push_back(std::clamp(20.0 * std::log10(std::abs(mean) / std_dev), -kSnrMaxDb,
                                    kSnrMaxDb));
        }
    }
    return median(db);
}

double measure_snr_db(const CodeImage& estimate, const Image& truth) {
    if (!estimate.values.same_shape(truth))
        throw std::invalid_argument("measure_snr: truth shape mismatch");

    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!estimate.sample_valid(i)) continue;
        const double d = estimate.values.data[i] - truth.data[i];
        ss += d * d;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("measure_snr: no valid pixels");
    const double noise = std::sqrt(ss / static_cast<double>(n));

    std::vector<double> db;
    db.reserve(n);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!estimate.sample_valid(i)) continue;
        const double sig = std::abs(estimate.values.data[i]);
        if (noise <= 0.0) db.push_back(kSnrMaxDb);
        else if (sig <= 0.0) db.push_back(-kSnrMaxDb);
        else db.push_back(std::clamp(20.0 * std::log10(sig / noise), -kSnrMaxDb, kSnrMaxDb));
    }
    return median(db);
}

void write_prediction_table_csv(const SnrModel& model, const std::vector<double>& L_values,
                                const std::vector<double>& rms_values,
                                const std::vector<int>& w_values,
                                const std::vector<int>& M_values, std::ostream& out) {
    out << "L,code_rms_r,w,M,snr_db\n";
    char buf[128];
    for (double L : L_values)
        for (double rms : rms_values)
            for (int w : w_values)
                for (int M : M_values) {
                    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%d,%.17g\n", L, rms, w, M,
                                  predict_snr_db(model, rms, L, w, M));
                    out << buf;
                }
}

}  // namespace nci
