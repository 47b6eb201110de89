#include "nci/codegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "nci/prng.hpp"

namespace nci {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Synthesis grid: one brightness unit = 2^-40. Contributions are rounded to
// this grid and accumulated in int64, which keeps every partial sum exact
// (amplitudes stay far below the 2^53 mantissa limit), so grouping bins by
// code cannot change the total.
constexpr double kGridScale = 1099511627776.0;  // 2^40

// Domain-separation tags for derived seeds.
constexpr std::uint64_t kBinDrawTag = 0xB1;
constexpr std::uint64_t kShuffleTag = 0x5F;

struct BinDraw {
    int bin;
    double amplitude;
    double phase;
};

// Amplitude and phase for every in-band bin, sampled independently of the
// number of codes (sum-over-codes invariance depends on this ordering).
std::vector<BinDraw> draw_bins(const CodeSpec& spec, int segment_index,
                               const std::vector<int>& bins) {
    std::vector<BinDraw> draws;
    draws.reserve(bins.size());
    for (int b : bins) {
        Xoshiro256pp rng(hash_seed({spec.master_seed, kBinDrawTag,
                                    static_cast<std::uint64_t>(segment_index),
                                    static_cast<std::uint64_t>(b)}));
        const double mean_amp = flicker_weight(spec, spec.bin_freq(b));
        const double amp = rng.uniform(0.5 * mean_amp, 1.5 * mean_amp);
        const double phase = rng.uniform(0.0, kTwoPi);
        draws.push_back({b, amp, phase});
    }
    return draws;
}

// Time series of one bin on the integer grid, corrected to an exactly zero
// sum (the correction is a sub-ulp-of-amplitude perturbation).
std::vector<std::int64_t> bin_series(const BinDraw& d, int n) {
    std::vector<std::int64_t> q(n);
    std::int64_t sum = 0;
    for (int t = 0; t < n; ++t) {
        const double v = d.amplitude * std::cos(kTwoPi * d.bin * t / n + d.phase);
        q[t] = std::llround(v * kGridScale);
        sum += q[t];
    }
    // Spread the residual so every segment is zero-mean to the last bit.
    std::int64_t base = sum / n;
    std::int64_t rem = sum - base * n;
    if (rem < 0) {
        base -= 1;
        rem += n;
    }
    for (int t = 0; t < n; ++t) q[t] -= base + (t < rem ? 1 : 0);
    return q;
}

}  // namespace

void CodeSpec::validate() const {
    if (fps <= 0) throw std::invalid_argument("CodeSpec: fps must be positive");
    if (segment_len < 2) throw std::invalid_argument("CodeSpec: segment_len must be >= 2");
    if (num_codes < 1) throw std::invalid_argument("CodeSpec: num_codes must be >= 1");
    if (!(0 < band_lo && band_lo < band_hi && band_hi < fps / 2))
        throw std::invalid_argument(
            "CodeSpec: passband must satisfy 0 < band_lo < band_hi < fps/2");
    if (amplitude_scale < 0)
        throw std::invalid_argument("CodeSpec: amplitude_scale must be >= 0");
    if (amplitude_scale > 64)
        throw std::invalid_argument("CodeSpec: amplitude_scale unreasonably large");
    if (static_cast<int>(band_bins().size()) < num_codes)
        throw config_error(
            "CodeSpec: fewer in-band frequency bins than codes; increase "
            "segment_len or widen the passband");
}

std::vector<int> CodeSpec::band_bins() const {
    std::vector<int> bins;
    const int lo = static_cast<int>(std::ceil(band_lo * segment_len / fps - 1e-9));
    const int hi = static_cast<int>(std::floor(band_hi * segment_len / fps + 1e-9));
    for (int b = std::max(lo, 1); b <= std::min(hi, segment_len / 2); ++b)
        bins.push_back(b);
    return bins;
}

CodeSegment sample_segment(const CodeSpec& spec, int segment_index) {
    spec.validate();
    if (segment_index < 0)
        throw std::invalid_argument("sample_segment: segment_index must be >= 0");

    const int n = spec.segment_len;
    const int k = spec.num_codes;
    const std::vector<int> bins = spec.band_bins();
    const std::vector<BinDraw> draws = draw_bins(spec, segment_index, bins);

    // Shuffled round robin: deal each block of k consecutive bins to the k
    // codes in a per-block shuffled order.
    CodeSegment seg;
    seg.log.segment_index = segment_index;
    std::vector<int> owner(bins.size());
    std::vector<int> order(k);
    for (std::size_t p = 0; p < bins.size(); p += k) {
        const int block = static_cast<int>(p / k);
        std::iota(order.begin(), order.end(), 0);
        Xoshiro256pp rng(hash_seed({spec.master_seed, kShuffleTag,
                                    static_cast<std::uint64_t>(segment_index),
                                    static_cast<std::uint64_t>(block)}));
        rng.shuffle(order.data(), order.size());
        for (std::size_t j = 0; j < static_cast<std::size_t>(k) && p + j < bins.size(); ++j)
            owner[p + j] = order[j];
    }

    std::vector<std::vector<std::int64_t>> acc(
        k, std::vector<std::int64_t>(n, 0));
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const std::vector<std::int64_t> q = bin_series(draws[i], n);
        auto& dst = acc[owner[i]];
        for (int t = 0; t < n; ++t) dst[t] += q[t];
        seg.log.bin_to_code.emplace_back(bins[i], owner[i]);
    }

    seg.rows.resize(k);
    for (int i = 0; i < k; ++i) {
        seg.rows[i].resize(n);
        for (int t = 0; t < n; ++t)
            seg.rows[i][t] = static_cast<double>(acc[i][t]) / kGridScale;
    }
    return seg;
}

CodeBank make_code_bank(const CodeSpec& spec, int num_segments) {
    spec.validate();
    if (num_segments < 1)
        throw std::invalid_argument("make_code_bank: num_segments must be >= 1");

    CodeBank bank;
    bank.spec = spec;
    bank.codes.resize(spec.num_codes);
    for (int i = 0; i < spec.num_codes; ++i) {
        bank.codes[i].fps = spec.fps;
        bank.codes[i].source_id = i;
        bank.codes[i].seg_begin = 0;
        bank.codes[i].seg_end = num_segments;
        bank.codes[i].samples.reserve(
            static_cast<std::size_t>(num_segments) * spec.segment_len);
    }
    for (int s = 0; s < num_segments; ++s) {
        CodeSegment seg = sample_segment(spec, s);
        for (int i = 0; i < spec.num_codes; ++i)
            bank.codes[i].samples.insert(bank.codes[i].samples.end(),
                                         seg.rows[i].begin(), seg.rows[i].end());
        bank.assignment_log.push_back(std::move(seg.log));
    }
    return bank;
}

std::vector<double> code_for_interval(const CodeSpec& spec, std::int64_t t0,
                                      std::int64_t t1, int source_id) {
    spec.validate();
    if (source_id < 0 || source_id >= spec.num_codes)
        throw std::invalid_argument("code_for_interval: source_id out of range");
    if (t0 < 0 || t1 <= t0)
        throw std::invalid_argument("code_for_interval: need t1 > t0 >= 0");

    const int n = spec.segment_len;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(t1 - t0));
    const std::int64_t s0 = t0 / n;
    const std::int64_t s1 = (t1 - 1) / n;
    for (std::int64_t s = s0; s <= s1; ++s) {
        const CodeSegment seg = sample_segment(spec, static_cast<int>(s));
        const std::int64_t seg_start = s * n;
        const std::int64_t lo = std::max<std::int64_t>(t0, seg_start);
        const std::int64_t hi = std::min<std::int64_t>(t1, seg_start + n);
        for (std::int64_t t = lo; t < hi; ++t)
            out.push_back(seg.rows[source_id][static_cast<std::size_t>(t - seg_start)]);
    }
    return out;
}

std::vector<double> code_for_interval(const CodeBank& bank, std::int64_t t0,
                                      std::int64_t t1, int source_id) {
    if (source_id < 0 || source_id >= static_cast<int>(bank.codes.size()))
        throw std::invalid_argument("code_for_interval: source_id out of range");
    if (t0 < 0 || t1 <= t0)
        throw std::invalid_argument("code_for_interval: need t1 > t0 >= 0");
    const auto& samples = bank.codes[source_id].samples;
    if (t1 <= static_cast<std::int64_t>(samples.size()))
        return std::vector<double>(samples.begin() + t0, samples.begin() + t1);
    return code_for_interval(bank.spec, t0, t1, source_id);
}

namespace {
// Stand-in flicker-sensitivity knots (freq Hz, relative sensitivity).
// Monotone rise toward 8-9 Hz; the modest (~3.6x) dynamic range keeps
// per-bin code power balanced enough that misaligned segments decorrelate.
const std::vector<std::pair<double, double>>& default_flicker_table() {
    static const std::vector<std::pair<double, double>> table = {
        {1.0, 0.7}, {2.0, 1.0}, {3.5, 1.5}, {5.0, 2.1},
        {6.5, 2.8}, {8.0, 3.6}, {10.0, 4.3}, {12.0, 4.8},
    };
    return table;
}
}  // namespace

double flicker_sensitivity(double freq_hz,
                           const std::vector<std::pair<double, double>>& table) {
    if (table.empty()) throw std::invalid_argument("flicker_sensitivity: empty table");
    if (freq_hz <= table.front().first) return table.front().second;
    if (freq_hz >= table.back().first) return table.back().second;
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (freq_hz <= table[i].first) {
            const auto [f0, s0] = table[i - 1];
            const auto [f1, s1] = table[i];
            const double u = (freq_hz - f0) / (f1 - f0);
            return s0 + u * (s1 - s0);
        }
    }
    return table.back().second;
}

double flicker_sensitivity(double freq_hz) {
    return flicker_sensitivity(freq_hz, default_flicker_table());
}

double flicker_weight(const CodeSpec& spec, double freq_hz) {
    if (freq_hz < spec.band_lo - 1e-12 || freq_hz > spec.band_hi + 1e-12)
        throw std::invalid_argument("flicker_weight: frequency outside passband");
    return spec.amplitude_scale / flicker_sensitivity(freq_hz);
}

void write_code_csv(const CodeBank& bank, std::ostream& out) {
    char buf[64];
    auto emit = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "# %s=%.17g\n", key, v);
        out << buf;
    };
    emit("fps", bank.spec.fps);
    out << "# segment_len=" << bank.spec.segment_len << "\n";
    emit("band_lo", bank.spec.band_lo);
    emit("band_hi", bank.spec.band_hi);
    out << "# num_codes=" << bank.spec.num_codes << "\n";
    out << "# master_seed=" << bank.spec.master_seed << "\n";
    emit("amplitude_scale", bank.spec.amplitude_scale);

    const std::int64_t frames = bank.num_frames();
    for (std::int64_t t = 0; t < frames; ++t) {
        for (std::size_t i = 0; i < bank.codes.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", bank.codes[i].samples[t]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

CodeBank read_code_csv(std::istream& in) {
    CodeBank bank;
    CodeSpec& spec = bank.spec;
    bool saw[7] = {};
    std::string line;
    long line_no = 0;
    std::size_t offset = 0;
    std::vector<std::vector<double>> rows;
    std::vector<long> row_lines;

    auto fail = [&](const std::string& msg) -> void {
        throw parse_error("code csv: " + msg, offset, line_no);
    };

    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const std::size_t eq = body.find('=');
            if (eq == std::string::npos) fail("malformed header line, expected key=value");
            std::string key = body.substr(0, eq);
            key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
            const std::string val = body.substr(eq + 1);
            try {
                if (key == "fps") { spec.fps = std::stod(val); saw[0] = true; }
                else if (key == "segment_len") { spec.segment_len = std::stoi(val); saw[1] = true; }
                else if (key == "band_lo") { spec.band_lo = std::stod(val); saw[2] = true; }
                else if (key == "band_hi") { spec.band_hi = std::stod(val); saw[3] = true; }
                else if (key == "num_codes") { spec.num_codes = std::stoi(val); saw[4] = true; }
                else if (key == "master_seed") { spec.master_seed = std::stoull(val); saw[5] = true; }
                else if (key == "amplitude_scale") { spec.amplitude_scale = std::stod(val); saw[6] = true; }
                else fail("unknown header key '" + key + "'");
            } catch (const parse_error&) {
                throw;
            } catch (const std::exception&) {
                fail("bad value for header key '" + key + "'");
            }
            continue;
        }
        // Sample row.
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string cell = line.substr(pos, comma - pos);
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                offset = line_start + pos;
                fail("bad sample value '" + cell + "'");
            }
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        rows.push_back(std::move(row));
        row_lines.push_back(line_no);
    }

    static const char* kKeys[7] = {"fps", "segment_len", "band_lo", "band_hi",
                                   "num_codes", "master_seed", "amplitude_scale"};
    for (int i = 0; i < 7; ++i)
        if (!saw[i]) fail(std::string("missing header key '") + kKeys[i] + "'");
    spec.validate();
    if (rows.empty()) fail("no samples");
    for (std::size_t r = 0; r < rows.size(); ++r)
        if (static_cast<int>(rows[r].size()) != spec.num_codes) {
            line_no = row_lines[r];
            fail("sample count mismatch: expected " + std::to_string(spec.num_codes) +
                 " values per row, got " + std::to_string(rows[r].size()));
        }

    bank.codes.resize(spec.num_codes);
    for (int i = 0; i < spec.num_codes; ++i) {
        bank.codes[i].fps = spec.fps;
        bank.codes[i].source_id = i;
        bank.codes[i].seg_begin = 0;
        bank.codes[i].seg_end = static_cast<int>(rows.size()) / spec.segment_len;
        bank.codes[i].samples.reserve(rows.size());
        for (const auto& row : rows) bank.codes[i].samples.push_back(row[i]);
    }
    return bank;
}

}  // namespace nci
