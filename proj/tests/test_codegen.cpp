#include "nci/codegen.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "nci/prng.hpp"
#include "nci/types.hpp"

using namespace nci;

namespace {

CodeSpec base_spec(int k = 1, std::uint64_t seed = 1) {
    CodeSpec s;
    s.fps = 30.0;
    s.segment_len = 128;
    s.band_lo = 2.0;
    s.band_hi = 9.0;
    s.num_codes = k;
    s.master_seed = seed;
    s.amplitude_scale = 0.005;
    return s;
}

// Direct DFT bin magnitude of a real segment (independent oracle, no FFT lib).
double bin_energy(const std::vector<double>& x, int bin) {
    std::complex<double> acc = 0.0;
    const double step = -2.0 * std::numbers::pi * bin / static_cast<double>(x.size());
    for (std::size_t t = 0; t < x.size(); ++t)
        acc += x[t] * std::exp(std::complex<double>(0.0, step * static_cast<double>(t)));
    return std::norm(acc);
}

}  // namespace

TEST_CASE("in-band bins are 9..38 for the default band") {
    std::vector<int> bins = base_spec().band_bins();
    REQUIRE(!bins.empty());
    CHECK(bins.front() == 9);
    CHECK(bins.back() == 38);
    CHECK(bins.size() == 30);
}

TEST_CASE("segment mean is zero and energy stays in band") {
    CodeSegment seg = sample_segment(base_spec(), 0);
    REQUIRE(seg.rows.size() == 1);
    const std::vector<double>& c = seg.rows[0];
    REQUIRE(c.size() == 128);

    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= 128.0;
    CHECK(std::abs(mean) < 1e-12);

    double total = 0.0, in_band = 0.0;
    for (int bin = 0; bin <= 64; ++bin) {
        double e = bin_energy(c, bin);
        total += e;
        if (bin >= 9 && bin <= 38) in_band += e;
    }
    REQUIRE(total > 0.0);
    CHECK((total - in_band) / total < 1e-9);
}

TEST_CASE("zero mean and band limits hold over 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CodeSpec s = base_spec(2, seed);
        CodeSegment seg = sample_segment(s, static_cast<int>(seed % 7));
        for (const std::vector<double>& c : seg.rows) {
            double mean = 0.0;
            for (double v : c) mean += v;
            CHECK(std::abs(mean / 128.0) <= 1e-9);
        }
    }
}

TEST_CASE("distinct codes are orthogonal over whole segments") {
    CodeSegment seg = sample_segment(base_spec(3, 77), 4);
    REQUIRE(seg.rows.size() == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (int t = 0; t < 128; ++t) {
                dot += seg.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] *
                       seg.rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
                ni += seg.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] *
                      seg.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
                nj += seg.rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)] *
                      seg.rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
            }
            CHECK(std::abs(dot) / std::sqrt(ni * nj) <= 1e-9);
        }
}

TEST_CASE("sum over codes is bit-identical for k in {1, 2, 3, 5}") {
    for (int segment : {0, 1, 9}) {
        CodeSegment ref = sample_segment(base_spec(1, 123), segment);
        for (int k : {2, 3, 5}) {
            CodeSegment seg = sample_segment(base_spec(k, 123), segment);
            for (int t = 0; t < 128; ++t) {
                double sum = 0.0;
                for (int i = 0; i < k; ++i) sum += seg.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
                CHECK(sum == ref.rows[0][static_cast<std::size_t>(t)]);
            }
        }
    }
}

TEST_CASE("misaligned self-correlation is small on average") {
    // Statistical decorrelation: mean over seeds of |c(tau:) . c(:-tau)| / c.c
    // for a random in-segment offset tau >= 1.
    Xoshiro256pp tau_rng(hash_seed({0xDEC0u, 0}));
    double acc = 0.0;
    const int trials = 1000;
    for (int seed = 0; seed < trials; ++seed) {
        CodeSegment seg = sample_segment(base_spec(1, static_cast<std::uint64_t>(seed) + 5000), 0);
        const std::vector<double>& c = seg.rows[0];
        const int tau = 1 + static_cast<int>(tau_rng.bounded(127));
        double dot = 0.0, energy = 0.0;
        for (int t = 0; t + tau < 128; ++t) dot += c[static_cast<std::size_t>(t + tau)] * c[static_cast<std::size_t>(t)];
        for (double v : c) energy += v * v;
        acc += std::abs(dot) / energy;
    }
    CHECK(acc / trials <= 0.1);
}

TEST_CASE("code_for_interval crops and concatenates segments") {
    CodeSpec s = base_spec(2, 9);

    std::vector<double> seg0 = sample_segment(s, 0).rows[1];
    std::vector<double> seg1 = sample_segment(s, 1).rows[1];

    std::vector<double> head = code_for_interval(s, 0, 128, 1);
    REQUIRE(head.size() == 128);
    CHECK(head == seg0);

    std::vector<double> mid = code_for_interval(s, 100, 200, 1);
    REQUIRE(mid.size() == 100);
    for (int i = 0; i < 28; ++i) CHECK(mid[static_cast<std::size_t>(i)] == seg0[static_cast<std::size_t>(100 + i)]);
    for (int i = 0; i < 72; ++i) CHECK(mid[static_cast<std::size_t>(28 + i)] == seg1[static_cast<std::size_t>(i)]);

    CHECK(code_for_interval(s, 100, 200, 1) == mid);  // determinism
    CHECK_THROWS_AS(code_for_interval(s, 100, 200, 2), std::invalid_argument);
    CHECK_THROWS_AS(code_for_interval(s, -1, 5, 0), std::invalid_argument);
}

TEST_CASE("bank generation matches on-demand intervals") {
    CodeSpec s = base_spec(3, 31);
    CodeBank bank = make_code_bank(s, 4);
    REQUIRE(bank.codes.size() == 3);
    REQUIRE(bank.num_frames() == 4 * 128);
    for (int i = 0; i < 3; ++i) {
        std::vector<double> direct = code_for_interval(s, 0, 4 * 128, i);
        CHECK(bank.codes[static_cast<std::size_t>(i)].samples == direct);
        CHECK(code_for_interval(bank, 37, 300, i) ==
              code_for_interval(s, 37, 300, i));
    }
    CHECK(bank.assignment_log.size() == 4);
}

TEST_CASE("flicker weight shape and knot identity") {
    CodeSpec s = base_spec();
    CHECK(flicker_weight(s, 5.0) > 0.0);
    CHECK(flicker_weight(s, 2.0) > flicker_weight(s, 9.0));

    s.amplitude_scale = 0.0;
    CHECK(flicker_weight(s, 5.5) == 0.0);

    // At a table knot the interpolation must return the knot value exactly.
    s.amplitude_scale = 0.005;
    CHECK(flicker_weight(s, 8.0) == 0.005 / flicker_sensitivity(8.0));
    CHECK(flicker_sensitivity(8.0) == 3.6);

    CHECK_THROWS_AS(flicker_weight(s, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(flicker_weight(s, 9.5), std::invalid_argument);
}

TEST_CASE("strictly positive amplitudes keep per-bin energy nonzero") {
    // Uniform[0.5m, 1.5m] never reaches zero, so every in-band bin carries energy.
    CodeSegment seg = sample_segment(base_spec(1, 4242), 2);
    for (int bin = 9; bin <= 38; ++bin) CHECK(bin_energy(seg.rows[0], bin) > 0.0);
}

TEST_CASE("csv round trip is lossless") {
    CodeSpec s = base_spec(2, 555);
    CodeBank bank = make_code_bank(s, 2);

    std::ostringstream out;
    write_code_csv(bank, out);
    std::istringstream in(out.str());
    CodeBank back = read_code_csv(in);

    CHECK(back.spec.fps == s.fps);
    CHECK(back.spec.segment_len == s.segment_len);
    CHECK(back.spec.num_codes == s.num_codes);
    CHECK(back.spec.master_seed == s.master_seed);
    REQUIRE(back.codes.size() == bank.codes.size());
    for (std::size_t i = 0; i < bank.codes.size(); ++i) {
        REQUIRE(back.codes[i].samples.size() == bank.codes[i].samples.size());
        for (std::size_t t = 0; t < bank.codes[i].samples.size(); ++t)
            CHECK(back.codes[i].samples[t] ==
                  doctest::Approx(bank.codes[i].samples[t]).epsilon(1e-9));
    }
}

TEST_CASE("csv parse errors carry context") {
    SUBCASE("valid header, empty body") {
        std::istringstream in(
            "# fps=30\n# segment_len=128\n# band_lo=2\n# band_hi=9\n# num_codes=1\n"
            "# master_seed=0\n# amplitude_scale=0.005\n");
        CHECK_THROWS_WITH_AS(read_code_csv(in), doctest::Contains("no samples"), parse_error);
    }
    SUBCASE("missing header key") {
        std::istringstream in("# fps=30\n0.001\n");
        CHECK_THROWS_AS(read_code_csv(in), parse_error);
    }
    SUBCASE("sample count mismatch names the line") {
        CodeBank bank = make_code_bank(base_spec(2, 1), 1);
        std::ostringstream out;
        write_code_csv(bank, out);
        std::string text = out.str();
        text += "0.001\n";  // one value on a row that needs two
        std::istringstream in(text);
        CHECK_THROWS_WITH_AS(read_code_csv(in), doctest::Contains("line"), parse_error);
    }
    SUBCASE("malformed number") {
        std::istringstream in(
            "# fps=30\n# segment_len=128\n# band_lo=2\n# band_hi=9\n# num_codes=1\n"
            "# master_seed=0\n# amplitude_scale=0.005\nnot_a_number\n");
        CHECK_THROWS_AS(read_code_csv(in), parse_error);
    }
}

TEST_CASE("spec validation rejects impossible configurations") {
    CodeSpec s = base_spec();
    s.num_codes = 31;  // only 30 in-band bins
    CHECK_THROWS_AS(s.validate(), config_error);

    s = base_spec();
    s.band_lo = 10.0;
    s.band_hi = 9.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = base_spec();
    s.segment_len = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    CHECK_THROWS_AS(sample_segment(base_spec(), -1), std::invalid_argument);
}
