// Command-line front end: every subcommand resolves its parameters (flags >
// NCI_* environment > defaults), runs one module pipeline, prints a one-line
// key=value summary on stdout, and records a replayable manifest with input
// and output hashes. Exit codes: 0 success, 2 inconclusive analysis, 1 error.

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "nci/codegen.hpp"
#include "nci/decode.hpp"
#include "nci/io_formats.hpp"
#include "nci/prng.hpp"
#include "nci/serial.hpp"
#include "nci/simulate.hpp"
#include "nci/snr.hpp"
#include "nci/spatial.hpp"
#include "nci/tamper.hpp"
#include "nci/temporal.hpp"
#include "nci/types.hpp"

namespace {

using namespace nci;

constexpr const char* kToolVersion = "nci 1.0.0";

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Ordered key = value record of one run; hashes make replays checkable.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> rows;

    void set(const std::string& key, const std::string& value) { rows.emplace_back(key, value); }
    void set(const std::string& key, double value) { set(key, fmt(value)); }
    void set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
    void hash_entry(const std::string& kind, const std::string& path, const std::string& bytes) {
        set(kind + "." + path, "fnv1a:" + hex64(fnv1a(bytes.data(), bytes.size())));
    }
    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw config_error("manifest: cannot open " + path);
        for (const auto& [k, v] : rows) out << k << " = " << v << "\n";
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open output file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw config_error("short write: " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// FSEQ or Y4M by extension; the raw bytes are hashed into the manifest.
FrameSequence load_video(const std::string& path, Manifest& m) {
    const std::string bytes = read_file(path);
    m.hash_entry("input", path, bytes);
    std::istringstream in(bytes);
    return ends_with(path, ".y4m") ? read_y4m(in) : read_fseq(in);
}

void store_video(const FrameSequence& v, const std::string& path, Manifest& m) {
    std::ostringstream out;
    write_fseq(v, out);
    const std::string bytes = std::move(out).str();
    write_file(path, bytes);
    m.hash_entry("output", path, bytes);
}

void store_image(const Image& im, int bit_depth, const std::string& path, Manifest& m) {
    std::ostringstream out;
    write_netpbm(im, bit_depth, out);
    const std::string bytes = std::move(out).str();
    write_file(path, bytes);
    m.hash_entry("output", path, bytes);
}

// --- shared flag groups ------------------------------------------------------

// Code parameters come either from a gen-code CSV (--codes) or from flags.
struct SpecArgs {
    CodeSpec spec;
    std::string codes_path;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--codes", codes_path, "code bank CSV; overrides the code flags");
        cmd->add_option("--seed", spec.master_seed, "master seed")->envname("NCI_SEED");
        cmd->add_option("--fps", spec.fps, "frames per second")->envname("NCI_FPS");
        cmd->add_option("--segment-len", spec.segment_len, "code segment length, frames")
            ->envname("NCI_SEGMENT_LEN");
        cmd->add_option("--band-lo", spec.band_lo, "passband low edge, Hz")->envname("NCI_BAND_LO");
        cmd->add_option("--band-hi", spec.band_hi, "passband high edge, Hz")->envname("NCI_BAND_HI");
        cmd->add_option("--num-codes", spec.num_codes, "number of simultaneous codes")
            ->envname("NCI_NUM_CODES");
        cmd->add_option("--amplitude", spec.amplitude_scale, "amplitude scale")
            ->envname("NCI_AMPLITUDE");
    }

    CodeSpec resolve(Manifest& m) const {
        CodeSpec s = spec;
        if (!codes_path.empty()) {
            const std::string bytes = read_file(codes_path);
            m.hash_entry("input", codes_path, bytes);
            std::istringstream in(bytes);
            s = read_code_csv(in).spec;
        }
        s.validate();
        m.set("param.seed", static_cast<std::int64_t>(s.master_seed));
        m.set("param.fps", s.fps);
        m.set("param.segment_len", std::int64_t{s.segment_len});
        m.set("param.band_lo", s.band_lo);
        m.set("param.band_hi", s.band_hi);
        m.set("param.num_codes", std::int64_t{s.num_codes});
        m.set("param.amplitude", s.amplitude_scale);
        return s;
    }
};

struct WindowArgs {
    std::int64_t t_center = -1;  // -1 = video midpoint
    int w = 450;
    int downsample = 1;
    std::int64_t offset = 0;  // code-timeline index of video frame 0

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--t-center", t_center, "window center frame (default: midpoint)");
        cmd->add_option("--window", w, "analysis window length, frames")->envname("NCI_WINDOW");
        cmd->add_option("--downsample", downsample, "spatial box-downsample factor");
        cmd->add_option("--offset", offset, "code frame aligned with video frame 0");
    }

    AnalysisWindow resolve(const FrameSequence& video, Manifest& m) const {
        AnalysisWindow win;
        win.t_center = t_center >= 0 ? t_center : video.t / 2;
        win.w = w;
        win.downsample = downsample;
        m.set("param.t_center", win.t_center);
        m.set("param.window", std::int64_t{win.w});
        m.set("param.downsample", std::int64_t{win.downsample});
        m.set("param.offset", offset);
        return win;
    }
};

// Comma-separated integer / double parsing with flag-name error context.
std::vector<double> parse_doubles(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string(flag) + ": malformed number '" + tok + "'");
        }
        if (used != tok.size())
            throw std::invalid_argument(std::string(flag) + ": malformed number '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
    return out;
}

std::vector<std::int64_t> parse_ints(const std::string& text, const char* flag) {
    std::vector<std::int64_t> out;
    for (double v : parse_doubles(text, flag)) {
        if (v != std::floor(v))
            throw std::invalid_argument(std::string(flag) + ": expected integer list");
        out.push_back(static_cast<std::int64_t>(v));
    }
    return out;
}

void print_summary(Manifest& m, const std::string& line) {
    std::cout << line << "\n";
    m.set("summary", line);
}

// --- selftest ----------------------------------------------------------------

struct Digest {
    std::uint64_t h = 0xCBF29CE484222325ull;
    void add(const void* p, std::size_t n) { h = fnv1a(p, n, h); }
    template <typename T>
    void add_vec(const std::vector<T>& v) {
        add(v.data(), v.size() * sizeof(T));
    }
};

SceneModel selftest_scene() {
    SceneModel sc;
    sc.base = Image(24, 20, 1);
    Image alpha(24, 20, 1);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 20; ++x) {
            sc.base.at(y, x, 0) = 0.25f + 0.4f * static_cast<float>(y) / 23.0f;
            alpha.at(y, x, 0) = 0.1f + 0.7f * static_cast<float>(x) / 19.0f;
        }
    sc.transport.push_back(alpha);
    Sprite sp;
    sp.image = Image(4, 4, 1, 0.8f);
    for (int t = 0; t < 96; ++t) sp.path.push_back({(t / 6) % 20, (t / 4) % 16});
    sc.sprites.push_back(sp);
    return sc;
}

int run_selftest(Manifest& m) {
    bool all_ok = true;
    Digest total;
    auto stage = [&](const char* name, std::uint64_t h, bool ok) {
        std::cout << "stage=" << name << " hash=" << hex64(h) << " ok=" << (ok ? 1 : 0) << "\n";
        total.add(&h, sizeof h);
        all_ok = all_ok && ok;
    };

    // Code construction invariants and the k-sum identity.
    {
        CodeSpec spec;
        spec.master_seed = 2024;
        spec.num_codes = 3;
        CodeBank bank = make_code_bank(spec, 3);
        Digest d;
        bool ok = true;
        for (const CodeSignal& cs : bank.codes) {
            d.add_vec(cs.samples);
            for (int seg = 0; seg < 3; ++seg) {
                double mean = 0.0;
                for (int j = 0; j < spec.segment_len; ++j)
                    mean += cs.samples[static_cast<std::size_t>(seg * spec.segment_len + j)];
                ok = ok && std::abs(mean / spec.segment_len) <= 1e-9;
            }
        }
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                double dot = 0.0, na = 0.0, nb = 0.0;
                for (std::size_t i = 0; i < bank.codes[0].samples.size(); ++i) {
                    dot += bank.codes[a].samples[i] * bank.codes[b].samples[i];
                    na += bank.codes[a].samples[i] * bank.codes[a].samples[i];
                    nb += bank.codes[b].samples[i] * bank.codes[b].samples[i];
                }
                ok = ok && std::abs(dot) / std::sqrt(na * nb) <= 1e-9;
            }
        CodeSpec one = spec;
        one.num_codes = 1;
        std::vector<double> ref = code_for_interval(one, 0, bank.num_frames(), 0);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            double sum = 0.0;
            for (int k = 0; k < 3; ++k) sum += bank.codes[k].samples[i];
            ok = ok && sum == ref[i];
        }
        stage("codes", d.h, ok);
    }

    // Renderer against its serial twin, noise and quantization on.
    CodeSpec rspec;
    rspec.master_seed = 7;
    NoiseModel rnoise;
    rnoise.read_std = 0.003;
    rnoise.photon_coeff = 0.008;
    rnoise.quant_bits = 8;
    rnoise.noise_seed = 5;
    SceneModel scene = selftest_scene();
    scene.gamma = 0.4545;
    FrameSequence video = render(scene, rspec, rnoise, 0, 96);
    {
        FrameSequence twin = serial::render(scene, rspec, rnoise, 0, 96);
        Digest d;
        d.add_vec(video.data);
        stage("render", d.h, video.data == twin.data);
    }

    // Bilateral residual against its serial twin.
    {
        FrameSequence res = bilateral_residual(video);
        FrameSequence twin = serial::bilateral_residual(video);
        Digest d;
        d.add_vec(res.data);
        stage("bilateral", d.h, res.data == twin.data);
    }

    // Noiseless decode exactness and the serial twin at both downsamplings.
    {
        SceneModel flat;
        flat.base = Image(16, 16, 1, 0.3f);
        Image alpha(16, 16, 1);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) alpha.at(y, x, 0) = 0.1f + 0.05f * static_cast<float>(x);
        flat.transport.push_back(alpha);
        NoiseModel none;
        none.quant_bits = 0;
        FrameSequence clean = render(flat, rspec, none, 0, 128);
        std::vector<double> code = code_for_interval(rspec, 0, 128, 0);
        Digest d;
        bool ok = true;
        for (int ds : {1, 2}) {
            AnalysisWindow win;
            win.t_center = 64;
            win.w = 128;
            win.downsample = ds;
            CodeImage ci = code_image(clean, code, win);
            CodeImage twin = serial::code_image(clean, code, win);
            ok = ok && ci.values.data == twin.values.data;
            if (ds == 1)
                for (int y = 0; y < 16; ++y)
                    for (int x = 0; x < 16; ++x) {
                        const double truth = alpha.at(y, x, 0);
                        ok = ok && std::abs(ci.values.at(y, x, 0) - truth) / truth <= 1e-6;
                    }
            d.add_vec(ci.values.data);
        }
        stage("decode", d.h, ok);
    }

    // FFT correlation against the direct reference.
    std::vector<double> code512 = code_for_interval(rspec, 0, 512, 0);
    {
        std::vector<double> trace = spatial_mean_trace(video);
        std::vector<double> fast = ncc_scan(trace, code512, 0, 400);
        std::vector<double> direct = serial::ncc_scan_direct(trace, code512, 0, 400);
        bool ok = true;
        for (std::size_t i = 0; i < fast.size(); ++i)
            ok = ok && std::abs(fast[i] - direct[i]) <= 1e-6;
        Digest d;
        d.add_vec(fast);
        stage("ncc", d.h, ok);
    }

    // A planted cut must appear as exactly one ~30-frame discontinuity.
    {
        SceneModel flat;
        flat.base = Image(8, 8, 1, 0.35f);
        flat.transport.push_back(Image(8, 8, 1, 0.5f));
        NoiseModel none;
        none.quant_bits = 0;
        FrameSequence clean = render(flat, rspec, none, 0, 288);
        EditLog log;
        FrameSequence cutv = cut(clean, 96, 30, 0, log);
        AlignmentMatrix mat = alignment_matrix(cutv, code512);
        AlignmentCurve curve = extract_alignment_curve(mat);
        bool ok = curve.discontinuities.size() == 1;
        if (ok) {
            const std::int64_t jump = curve.discontinuities[0].second;
            ok = jump >= 29 && jump <= 31;
        }
        Digest d;
        d.add_vec(mat.scores);
        stage("alignment", d.h, ok);

        std::vector<double> long_code = code_for_interval(rspec, 0, 1024, 0);
        SpeedScanResult ss = speed_scan(spatial_mean_trace(clean), long_code);
        Digest ds;
        for (auto [rho, score] : ss.score_curve) {
            ds.add(&rho, sizeof rho);
            ds.add(&score, sizeof score);
        }
        stage("speed", ds.h, std::abs(std::log(ss.rho)) <= 1.5 * std::log(1.01));
    }

    // Tamper chain replay and text round trip.
    {
        EditLog log;
        FrameSequence step = cut(video, 20, 10, 2, log);
        step = splice(step, {{40, 86}, {0, 40}}, log);
        step = retime(step, 0.8, 0, 0, log);
        std::ostringstream text;
        write_edit_log(log, text);
        std::istringstream in(text.str());
        EditLog back = read_edit_log(in);
        FrameSequence replay = apply_edits(video, back);
        Digest d;
        d.add_vec(step.data);
        stage("tamper", d.h, replay.data == step.data);
    }

    // Container formats: FSEQ bit-exact, NetPBM exact, Y4M reference vector.
    {
        std::ostringstream out;
        write_fseq(video, out);
        std::istringstream in(out.str());
        FrameSequence back = read_fseq(in);
        bool ok = back.data == video.data;

        Image im = video.frame_image(0);
        std::ostringstream pgm;
        write_netpbm(im, 16, pgm);
        std::istringstream pin(pgm.str());
        Image pback = read_netpbm(pin);
        for (std::size_t i = 0; i < im.size(); ++i) {
            const float q = std::round(im.data[i] * 65535.0f) / 65535.0f;
            ok = ok && pback.data[i] == q;
        }

        const std::string y4m =
            "YUV4MPEG2 W2 H2 F30:1 Ip A1:1 C444\nFRAME\n" +
            std::string(4, static_cast<char>(128)) + std::string(8, static_cast<char>(128));
        std::istringstream yin(y4m);
        FrameSequence gray = read_y4m(yin);
        for (float v : gray.data) ok = ok && std::abs(v - 128.0 / 255.0) <= 1e-3;

        Digest d;
        d.add(out.str().data(), out.str().size());
        stage("formats", d.h, ok);
    }

    // SNR prediction against a quick Monte-Carlo measurement.
    {
        SnrModel model{0.006, 0.0};
        SceneModel flat;
        flat.base = Image(8, 8, 1, 0.4f);
        flat.transport.push_back(Image(8, 8, 1, 0.5f));
        NoiseModel nm;
        nm.read_std = model.a;
        nm.quant_bits = 0;
        std::vector<double> code = code_for_interval(rspec, 0, 128, 0);
        double ss = 0.0;
        for (double v : code) ss += v * v;
        const double rms_r = std::sqrt(ss / 128.0) * 0.5;
        AnalysisWindow win;
        win.t_center = 64;
        win.w = 128;
        std::vector<CodeImage> trials;
        Digest d;
        for (int s = 0; s < 8; ++s) {
            nm.noise_seed = 300 + static_cast<std::uint64_t>(s);
            trials.push_back(code_image(render(flat, rspec, nm, 0, 128), code, win));
            d.add_vec(trials.back().values.data);
        }
        const double measured = measure_snr_db(trials);
        const double predicted = predict_snr_db(model, rms_r, 0.4, 128, 1);
        stage("snr", d.h, std::abs(measured - predicted) <= 3.0);
    }

    std::cout << "selftest_hash=" << hex64(total.h) << " ok=" << (all_ok ? 1 : 0) << "\n";
    m.set("selftest_hash", hex64(total.h));
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-coded illumination toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    std::string manifest_path = "nci-run.manifest";
    app.add_option("--threads", threads, "worker threads (0 = runtime default)")
        ->envname("NCI_THREADS");
    app.add_option("--manifest", manifest_path, "run manifest path");

    // gen-code
    auto* cmd_gen = app.add_subcommand("gen-code", "generate a code bank CSV");
    SpecArgs gen_spec;
    gen_spec.add_flags(cmd_gen);
    int gen_segments = 4;
    std::string gen_out;
    cmd_gen->add_option("--segments", gen_segments, "number of code segments");
    cmd_gen->add_option("-o,--out", gen_out, "output CSV path")->required();

    // render
    auto* cmd_render = app.add_subcommand("render", "render a coded video from a scene directory");
    SpecArgs render_spec;
    render_spec.add_flags(cmd_render);
    std::string render_scene, render_out;
    std::int64_t render_t0 = 0;
    int render_frames = 0;
    NoiseModel render_noise;
    cmd_render->add_option("--scene", render_scene, "scene directory (scene.txt)")->required();
    cmd_render->add_option("--t0", render_t0, "absolute start frame on the code timeline");
    cmd_render->add_option("--frames", render_frames, "frame count")->required();
    cmd_render->add_option("--noise-a", render_noise.read_std, "read-noise std");
    cmd_render->add_option("--noise-b", render_noise.photon_coeff, "photon-noise coefficient");
    cmd_render->add_option("--quant-bits", render_noise.quant_bits, "quantization bits (0 = off)");
    cmd_render->add_option("--noise-seed", render_noise.noise_seed, "noise stream seed");
    cmd_render->add_option("-o,--out", render_out, "output video (.fseq)")->required();

    // tamper
    auto* cmd_tamper = app.add_subcommand("tamper", "apply one edit or replay an edit log");
    std::string tamper_in, tamper_out, tamper_log, tamper_edits;
    std::string tamper_cut, tamper_splice, tamper_retime, tamper_patch, tamper_rect, tamper_span;
    cmd_tamper->add_option("--in", tamper_in, "input video")->required();
    cmd_tamper->add_option("-o,--out", tamper_out, "output video (.fseq)")->required();
    cmd_tamper->add_option("--log", tamper_log, "write the edit log here");
    cmd_tamper->add_option("--edits", tamper_edits, "replay an existing edit-log file");
    cmd_tamper->add_option("--cut", tamper_cut, "t_start,n_removed[,crossfade]");
    cmd_tamper->add_option("--splice", tamper_splice, "segment list a:b,c:d,...");
    cmd_tamper->add_option("--retime", tamper_retime, "rho[,r0,r1]");
    cmd_tamper->add_option("--composite", tamper_patch, "patch video (.fseq) to paste");
    cmd_tamper->add_option("--rect", tamper_rect, "composite top-left y,x");
    cmd_tamper->add_option("--span", tamper_span, "composite frame span t0,t1");

    // decode
    auto* cmd_decode = app.add_subcommand("decode", "recover a code image");
    SpecArgs decode_spec;
    decode_spec.add_flags(cmd_decode);
    WindowArgs decode_win;
    decode_win.add_flags(cmd_decode);
    std::string decode_in, decode_out;
    int decode_source = 0;
    bool decode_transient = false, decode_residual = false;
    double decode_sigma = 0.05, decode_sigma_r = 0.05;
    int decode_radius = 15;
    cmd_decode->add_option("--in", decode_in, "input video")->required();
    cmd_decode->add_option("--source", decode_source, "code source id");
    cmd_decode->add_flag("--transient", decode_transient, "transient-weighted estimate");
    cmd_decode->add_flag("--residual", decode_residual, "estimate on bilateral residuals");
    cmd_decode->add_option("--sigma", decode_sigma, "transient weight sigma");
    cmd_decode->add_option("--sigma-r", decode_sigma_r, "bilateral range sigma");
    cmd_decode->add_option("--radius", decode_radius, "bilateral temporal radius");
    cmd_decode->add_option("-o,--out", decode_out, "output base path (.pgm/.ppm + .txt)")
        ->required();

    // align
    auto* cmd_align = app.add_subcommand("align", "register a video against the code timeline");
    SpecArgs align_spec;
    align_spec.add_flags(cmd_align);
    std::string align_in, align_out;
    int align_source = 0, align_patch = 0;
    std::int64_t align_lo = 0, align_hi = 1000;
    double align_threshold = kConfidenceThreshold, align_beta = 4.0;
    cmd_align->add_option("--in", align_in, "input video")->required();
    cmd_align->add_option("--source", align_source, "code source id");
    cmd_align->add_option("--lo", align_lo, "search range low edge, frames");
    cmd_align->add_option("--hi", align_hi, "search range high edge, frames");
    cmd_align->add_option("--threshold", align_threshold, "confidence threshold");
    cmd_align->add_option("--patch-size", align_patch, "patch-weighted mode tile size (0 = global)");
    cmd_align->add_option("--beta", align_beta, "patch soft-max sharpness");
    cmd_align->add_option("-o,--out", align_out, "patch weight map output (.pgm)");

    // align-matrix
    auto* cmd_matrix = app.add_subcommand("align-matrix", "windowed alignment matrix and curve");
    SpecArgs matrix_spec;
    matrix_spec.add_flags(cmd_matrix);
    std::string matrix_in, matrix_out, matrix_heatmap, matrix_curve;
    int matrix_source = 0, matrix_window = 90, matrix_hop = 15;
    std::int64_t matrix_range = -1, matrix_code_frames = 0;
    double matrix_jump = 2.0, matrix_floor = 1.2;
    cmd_matrix->add_option("--in", matrix_in, "input video")->required();
    cmd_matrix->add_option("--source", matrix_source, "code source id");
    cmd_matrix->add_option("--col-window", matrix_window, "column window, frames");
    cmd_matrix->add_option("--col-hop", matrix_hop, "column hop, frames");
    cmd_matrix->add_option("--offset-range", matrix_range, "max code offset (-1 = all)");
    cmd_matrix->add_option("--code-frames", matrix_code_frames, "code timeline length (0 = auto)");
    cmd_matrix->add_option("--jump-threshold", matrix_jump, "discontinuity threshold, frames");
    cmd_matrix->add_option("--confidence-floor", matrix_floor, "per-column confidence floor");
    cmd_matrix->add_option("-o,--out", matrix_out, "matrix CSV path");
    cmd_matrix->add_option("--heatmap", matrix_heatmap, "8-bit PGM heatmap path");
    cmd_matrix->add_option("--curve", matrix_curve, "curve/discontinuity text path");

    // speed-scan
    auto* cmd_speed = app.add_subcommand("speed-scan", "detect retiming by spectral matching");
    SpecArgs speed_spec;
    speed_spec.add_flags(cmd_speed);
    std::string speed_in, speed_out;
    int speed_source = 0;
    double speed_lo = 0.5, speed_hi = 2.0, speed_step = 1.01;
    std::int64_t speed_code_frames = 0;
    cmd_speed->add_option("--in", speed_in, "input video")->required();
    cmd_speed->add_option("--source", speed_source, "code source id");
    cmd_speed->add_option("--rho-lo", speed_lo, "grid low edge");
    cmd_speed->add_option("--rho-hi", speed_hi, "grid high edge");
    cmd_speed->add_option("--rho-step", speed_step, "geometric grid step");
    cmd_speed->add_option("--code-frames", speed_code_frames, "code timeline length (0 = auto)");
    cmd_speed->add_option("-o,--out", speed_out, "score curve CSV path");

    // mask
    auto* cmd_mask = app.add_subcommand("mask", "flag bright pixels that are dark in the code image");
    SpecArgs mask_spec;
    mask_spec.add_flags(cmd_mask);
    WindowArgs mask_win;
    mask_win.add_flags(cmd_mask);
    std::string mask_in, mask_out;
    int mask_source = 0;
    std::int64_t mask_frame = -1;
    bool mask_transient = false;
    double mask_bright = 0.25, mask_floor = -1.0, mask_minw = 0.5;
    double mask_noise_a = -1.0, mask_noise_b = -1.0;
    cmd_mask->add_option("--in", mask_in, "input video")->required();
    cmd_mask->add_option("--source", mask_source, "code source id");
    cmd_mask->add_option("--frame", mask_frame, "frame to inspect (default: window center)");
    cmd_mask->add_flag("--transient", mask_transient, "transient-weighted decode");
    cmd_mask->add_option("--bright-thresh", mask_bright, "luminance gate");
    cmd_mask->add_option("--code-floor", mask_floor, "explicit |code| floor");
    cmd_mask->add_option("--noise-a", mask_noise_a, "read-noise std for the default floor");
    cmd_mask->add_option("--noise-b", mask_noise_b, "photon coefficient for the default floor");
    cmd_mask->add_option("--min-weight", mask_minw, "minimum transient weight");
    cmd_mask->add_option("-o,--out", mask_out, "output base (.pbm, _score.pgm, _montage.ppm)")
        ->required();

    // fit-noise
    auto* cmd_fit = app.add_subcommand("fit-noise", "fit std = a + b*sqrt(L) from flat fields");
    std::vector<std::string> fit_flats;
    std::string fit_out;
    cmd_fit->add_option("--flats", fit_flats, "flat-field videos (>= 3 distinct levels)")
        ->required()
        ->expected(-3);
    cmd_fit->add_option("-o,--out", fit_out, "write 'a = .. / b = ..' here");

    // predict-snr
    auto* cmd_snr = app.add_subcommand("predict-snr", "decode-SNR model predictions");
    double snr_a = 0.0, snr_b = 0.0;
    std::string snr_L = "0.3", snr_rms = "0.005", snr_w = "450", snr_M = "4", snr_out;
    cmd_snr->add_option("--a", snr_a, "read-noise std")->required();
    cmd_snr->add_option("--b", snr_b, "photon-noise coefficient")->required();
    cmd_snr->add_option("--L", snr_L, "brightness list");
    cmd_snr->add_option("--rms", snr_rms, "code rms * r list");
    cmd_snr->add_option("--w", snr_w, "window length list");
    cmd_snr->add_option("--M", snr_M, "averaged-sample count list");
    cmd_snr->add_option("-o,--out", snr_out, "prediction table CSV path");

    // selftest
    auto* cmd_self = app.add_subcommand("selftest", "deterministic property battery");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (threads > 0) omp_set_num_threads(threads);

        Manifest m;
        m.set("tool", kToolVersion);
        std::string argline;
        for (int i = 1; i < argc; ++i) {
            if (i > 1) argline += ' ';
            argline += argv[i];
        }
        m.set("argv", argline);
        m.set("param.threads", std::int64_t{threads});

        int status = 0;

        if (*cmd_gen) {
            m.set("command", "gen-code");
            CodeSpec spec = gen_spec.resolve(m);
            m.set("param.segments", std::int64_t{gen_segments});
            CodeBank bank = make_code_bank(spec, gen_segments);
            std::ostringstream out;
            write_code_csv(bank, out);
            write_file(gen_out, out.str());
            m.hash_entry("output", gen_out, out.str());
            print_summary(m, "command=gen-code codes=" + std::to_string(spec.num_codes) +
                                 " segments=" + std::to_string(gen_segments) +
                                 " frames=" + std::to_string(bank.num_frames()) +
                                 " out=" + gen_out);
        } else if (*cmd_render) {
            m.set("command", "render");
            CodeSpec spec = render_spec.resolve(m);
            render_noise.validate();
            SceneModel scene = load_scene(render_scene);
            m.set("param.scene", render_scene);
            m.set("param.t0", render_t0);
            m.set("param.frames", std::int64_t{render_frames});
            m.set("param.noise_a", render_noise.read_std);
            m.set("param.noise_b", render_noise.photon_coeff);
            m.set("param.quant_bits", std::int64_t{render_noise.quant_bits});
            m.set("param.noise_seed", static_cast<std::int64_t>(render_noise.noise_seed));
            FrameSequence v = render(scene, spec, render_noise, render_t0, render_frames);
            store_video(v, render_out, m);
            print_summary(m, "command=render frames=" + std::to_string(v.t) + " h=" +
                                 std::to_string(v.h) + " w=" + std::to_string(v.w) +
                                 " c=" + std::to_string(v.c) + " out=" + render_out);
        } else if (*cmd_tamper) {
            m.set("command", "tamper");
            FrameSequence v = load_video(tamper_in, m);
            const int ops = int(!tamper_edits.empty()) + int(!tamper_cut.empty()) +
                            int(!tamper_splice.empty()) + int(!tamper_retime.empty()) +
                            int(!tamper_patch.empty());
            if (ops != 1)
                throw std::invalid_argument(
                    "tamper: pass exactly one of --edits, --cut, --splice, --retime, --composite");
            EditLog log;
            FrameSequence out;
            if (!tamper_edits.empty()) {
                const std::string bytes = read_file(tamper_edits);
                m.hash_entry("input", tamper_edits, bytes);
                std::istringstream in(bytes);
                log = read_edit_log(in);
                out = apply_edits(v, log);
            } else if (!tamper_cut.empty()) {
                std::vector<std::int64_t> p = parse_ints(tamper_cut, "--cut");
                if (p.size() != 2 && p.size() != 3)
                    throw std::invalid_argument("--cut: expected t_start,n_removed[,crossfade]");
                out = cut(v, p[0], p[1], p.size() == 3 ? static_cast<int>(p[2]) : 0, log);
            } else if (!tamper_splice.empty()) {
                std::vector<std::pair<std::int64_t, std::int64_t>> segs;
                std::istringstream in(tamper_splice);
                std::string tok;
                while (std::getline(in, tok, ',')) {
                    const std::size_t colon = tok.find(':');
                    if (colon == std::string::npos)
                        throw std::invalid_argument("--splice: expected a:b,c:d,...");
                    segs.emplace_back(parse_ints(tok.substr(0, colon), "--splice")[0],
                                      parse_ints(tok.substr(colon + 1), "--splice")[0]);
                }
                out = splice(v, segs, log);
            } else if (!tamper_retime.empty()) {
                std::vector<double> p = parse_doubles(tamper_retime, "--retime");
                if (p.size() != 1 && p.size() != 3)
                    throw std::invalid_argument("--retime: expected rho[,r0,r1]");
                out = retime(v, p[0], p.size() == 3 ? static_cast<std::int64_t>(p[1]) : 0,
                             p.size() == 3 ? static_cast<std::int64_t>(p[2]) : 0, log);
            } else {
                if (tamper_rect.empty() || tamper_span.empty())
                    throw std::invalid_argument("--composite: requires --rect and --span");
                FrameSequence patch = load_video(tamper_patch, m);
                std::vector<std::int64_t> rect = parse_ints(tamper_rect, "--rect");
                std::vector<std::int64_t> span = parse_ints(tamper_span, "--span");
                if (rect.size() != 2) throw std::invalid_argument("--rect: expected y,x");
                if (span.size() != 2) throw std::invalid_argument("--span: expected t0,t1");
                out = composite(v, patch, static_cast<int>(rect[0]), static_cast<int>(rect[1]),
                                span[0], span[1], log);
            }
            store_video(out, tamper_out, m);
            if (!tamper_log.empty()) {
                std::ostringstream text;
                write_edit_log(log, text);
                write_file(tamper_log, text.str());
                m.hash_entry("output", tamper_log, text.str());
            }
            print_summary(m, "command=tamper frames_in=" + std::to_string(v.t) +
                                 " frames_out=" + std::to_string(out.t) +
                                 " edits=" + std::to_string(log.edits.size()) +
                                 " out=" + tamper_out);
        } else if (*cmd_decode) {
            m.set("command", "decode");
            CodeSpec spec = decode_spec.resolve(m);
            FrameSequence v = load_video(decode_in, m);
            AnalysisWindow win = decode_win.resolve(v, m);
            m.set("param.source", std::int64_t{decode_source});
            const ResolvedWindow rw = resolve_window(win, v.t);
            std::vector<double> code = code_for_interval(
                spec, decode_win.offset + rw.t0, decode_win.offset + rw.t0 + rw.len,
                decode_source);
            CodeImage ci;
            if (decode_residual) {
                FrameSequence res = bilateral_residual(v, decode_sigma_r, decode_radius);
                ci = decode_transient
                         ? transient_filtered_code_image(res, v, code, win, decode_sigma)
                         : code_image(res, code, win);
            } else {
                ci = decode_transient ? transient_filtered_code_image(v, code, win, decode_sigma)
                                      : code_image(v, code, win);
            }
            ci.source_id = decode_source;
            export_code_image(ci, decode_out);
            const char* ext = ci.values.c == 3 ? ".ppm" : ".pgm";
            m.hash_entry("output", decode_out + ext, read_file(decode_out + ext));
            m.hash_entry("output", decode_out + ".txt", read_file(decode_out + ".txt"));
            std::size_t invalid = 0;
            for (std::size_t i = 0; i < ci.values.size(); ++i)
                if (!ci.sample_valid(i)) ++invalid;
            print_summary(m, "command=decode window_t0=" + std::to_string(ci.window_t0) +
                                 " window_len=" + std::to_string(ci.window_len) +
                                 " invalid=" + std::to_string(invalid) + " out=" + decode_out);
        } else if (*cmd_align) {
            m.set("command", "align");
            CodeSpec spec = align_spec.resolve(m);
            FrameSequence v = load_video(align_in, m);
            m.set("param.source", std::int64_t{align_source});
            m.set("param.lo", align_lo);
            m.set("param.hi", align_hi);
            m.set("param.threshold", align_threshold);
            std::vector<double> code =
                code_for_interval(spec, 0, align_hi + v.t + 1, align_source);
            RegisterResult r;
            if (align_patch > 0) {
                PatchRegisterResult p = patch_weighted_register(v, code, align_patch, align_lo,
                                                                align_hi, align_threshold,
                                                                align_beta);
                r = p.reg;
                if (!align_out.empty()) store_image(p.weight_map, 16, align_out, m);
            } else {
                r = global_register(v, code, align_lo, align_hi, align_threshold);
            }
            print_summary(m, "command=align offset=" + std::to_string(r.offset) +
                                 " peak=" + fmt(r.peak) + " confidence=" + fmt(r.confidence) +
                                 " conclusive=" + (r.conclusive ? std::string("1")
                                                                : std::string("0")));
            status = r.conclusive ? 0 : 2;
        } else if (*cmd_matrix) {
            m.set("command", "align-matrix");
            CodeSpec spec = matrix_spec.resolve(m);
            FrameSequence v = load_video(matrix_in, m);
            std::int64_t code_frames = matrix_code_frames;
            if (code_frames <= 0)
                code_frames = matrix_range >= 0 ? matrix_range + matrix_window : v.t + 512;
            std::vector<double> code = code_for_interval(spec, 0, code_frames, matrix_source);
            AlignmentMatrix mat =
                alignment_matrix(v, code, matrix_window, matrix_hop, matrix_range);
            AlignmentCurve curve = extract_alignment_curve(mat, matrix_jump, matrix_floor);

            if (!matrix_out.empty()) {
                std::ostringstream out;
                out << "# col_window = " << mat.col_window << "\n# col_hop = " << mat.col_hop
                    << "\n# offset_lo = " << mat.offset_lo << "\n";
                char buf[32];
                for (int o = 0; o < mat.num_offsets; ++o) {
                    out << (mat.offset_lo + o);
                    for (int j = 0; j < mat.num_cols; ++j) {
                        std::snprintf(buf, sizeof buf, ",%.9g", mat.score(o, j));
                        out << buf;
                    }
                    out << "\n";
                }
                write_file(matrix_out, out.str());
                m.hash_entry("output", matrix_out, out.str());
            }
            if (!matrix_heatmap.empty()) {
                Image hm(mat.num_offsets, mat.num_cols, 1);
                for (int o = 0; o < mat.num_offsets; ++o)
                    for (int j = 0; j < mat.num_cols; ++j)
                        hm.at(o, j, 0) = static_cast<float>(0.5 * (mat.score(o, j) + 1.0));
                store_image(hm, 8, matrix_heatmap, m);
            }
            if (!matrix_curve.empty()) {
                std::ostringstream out;
                for (int j = 0; j < mat.num_cols; ++j)
                    out << "col " << j << " frame " << j * mat.col_hop << " offset "
                        << curve.best_offset[static_cast<std::size_t>(j)] << " confidence "
                        << fmt(curve.confidence[static_cast<std::size_t>(j)]) << " confident "
                        << int(curve.confident[static_cast<std::size_t>(j)]) << "\n";
                for (auto [col, jump] : curve.discontinuities)
                    out << "discontinuity col " << col << " jump " << jump << "\n";
                write_file(matrix_curve, out.str());
                m.hash_entry("output", matrix_curve, out.str());
            }
            print_summary(m, "command=align-matrix cols=" + std::to_string(mat.num_cols) +
                                 " offsets=" + std::to_string(mat.num_offsets) +
                                 " discontinuities=" +
                                 std::to_string(curve.discontinuities.size()));
        } else if (*cmd_speed) {
            m.set("command", "speed-scan");
            CodeSpec spec = speed_spec.resolve(m);
            FrameSequence v = load_video(speed_in, m);
            std::int64_t code_frames = speed_code_frames;
            if (code_frames <= 0)
                code_frames =
                    static_cast<std::int64_t>(std::ceil(double(v.t) * speed_hi)) + 130;
            std::vector<double> code = code_for_interval(spec, 0, code_frames, speed_source);
            SpeedScanResult r = speed_scan(v, code, speed_lo, speed_hi, speed_step);
            // The spectral ratio is flat across a 1% grid; conclusiveness comes
            // from the time-domain lock at the detected speed.
            std::vector<double> trace = spatial_mean_trace(v);
            const auto rn = static_cast<std::int64_t>(
                std::floor(double(code.size() - 1) / r.rho) + 1.0);
            std::vector<double> rcode =
                resample_code(code, r.rho, static_cast<std::size_t>(rn));
            RegisterResult lock = global_register(
                trace, rcode, 0, std::max<std::int64_t>(rn - v.t, 0), kConfidenceThreshold);
            if (!speed_out.empty()) {
                std::ostringstream out;
                out << "rho,score\n";
                char buf[64];
                for (auto [rho, score] : r.score_curve) {
                    std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", rho, score);
                    out << buf;
                }
                write_file(speed_out, out.str());
                m.hash_entry("output", speed_out, out.str());
            }
            print_summary(m, "command=speed-scan rho=" + fmt(r.rho) + " offset=" +
                                 std::to_string(r.offset) + " confidence=" + fmt(r.confidence) +
                                 " lock_confidence=" + fmt(lock.confidence) + " conclusive=" +
                                 (lock.conclusive ? std::string("1") : std::string("0")));
            status = lock.conclusive ? 0 : 2;
        } else if (*cmd_mask) {
            m.set("command", "mask");
            CodeSpec spec = mask_spec.resolve(m);
            FrameSequence v = load_video(mask_in, m);
            AnalysisWindow win = mask_win.resolve(v, m);
            const ResolvedWindow rw = resolve_window(win, v.t);
            std::vector<double> code = code_for_interval(
                spec, mask_win.offset + rw.t0, mask_win.offset + rw.t0 + rw.len, mask_source);
            CodeImage ci = mask_transient
                               ? transient_filtered_code_image(v, code, win)
                               : code_image(v, code, win);
            ci.source_id = mask_source;

            const std::int64_t frame_idx = mask_frame >= 0 ? mask_frame : win.t_center;
            if (frame_idx < 0 || frame_idx >= v.t)
                throw std::invalid_argument("--frame: outside the video");
            Image frame = spatial_downsample(v.frame_image(static_cast<int>(frame_idx)),
                                             win.downsample);

            double floor = mask_floor;
            if (floor < 0.0) {
                if (mask_noise_a < 0.0 || mask_noise_b < 0.0)
                    throw std::invalid_argument(
                        "mask: no noise estimate; pass --code-floor or --noise-a/--noise-b");
                double mean = 0.0;
                for (float x : frame.data) mean += x;
                mean /= double(frame.size());
                double ss = 0.0;
                for (double cv : code) ss += cv * cv;
                const double rms = std::sqrt(ss / double(code.size()));
                floor = default_code_floor(mask_noise_a, mask_noise_b, mean, rms, rw.len,
                                           win.downsample * win.downsample);
            }
            m.set("param.code_floor", floor);
            ManipulationMask mm = manipulation_mask(frame, ci, mask_bright, floor, mask_minw);

            std::ostringstream pbm;
            write_pbm(mm.mask, frame.h, frame.w, pbm);
            write_file(mask_out + ".pbm", pbm.str());
            m.hash_entry("output", mask_out + ".pbm", pbm.str());
            store_image(mm.score_map, 8, mask_out + "_score.pgm", m);
            store_image(side_by_side_export(frame, {ci}, mm), 8, mask_out + "_montage.ppm", m);

            int flagged = 0;
            for (std::uint8_t b : mm.mask) flagged += b;
            print_summary(m, "command=mask flagged=" + std::to_string(flagged) + " total=" +
                                 std::to_string(mm.mask.size()) + " floor=" + fmt(floor) +
                                 " out=" + mask_out);
        } else if (*cmd_fit) {
            m.set("command", "fit-noise");
            std::vector<FrameSequence> flats;
            for (const std::string& path : fit_flats) flats.push_back(load_video(path, m));
            NoiseModel fit = fit_noise_from_flats(flats);
            if (!fit_out.empty()) {
                std::string text = "a = " + fmt(fit.read_std) + "\nb = " +
                                   fmt(fit.photon_coeff) + "\n";
                write_file(fit_out, text);
                m.hash_entry("output", fit_out, text);
            }
            print_summary(m, "command=fit-noise a=" + fmt(fit.read_std) +
                                 " b=" + fmt(fit.photon_coeff) +
                                 " flats=" + std::to_string(flats.size()));
        } else if (*cmd_snr) {
            m.set("command", "predict-snr");
            SnrModel model{snr_a, snr_b};
            std::vector<double> Ls = parse_doubles(snr_L, "--L");
            std::vector<double> rmss = parse_doubles(snr_rms, "--rms");
            std::vector<int> ws, Ms;
            for (std::int64_t v : parse_ints(snr_w, "--w")) ws.push_back(static_cast<int>(v));
            for (std::int64_t v : parse_ints(snr_M, "--M")) Ms.push_back(static_cast<int>(v));
            m.set("param.a", snr_a);
            m.set("param.b", snr_b);
            if (!snr_out.empty()) {
                std::ostringstream out;
                write_prediction_table_csv(model, Ls, rmss, ws, Ms, out);
                write_file(snr_out, out.str());
                m.hash_entry("output", snr_out, out.str());
            }
            const std::size_t rows = Ls.size() * rmss.size() * ws.size() * Ms.size();
            std::string summary = "command=predict-snr rows=" + std::to_string(rows);
            if (rows == 1)
                summary += " snr_db=" + fmt(predict_snr_db(model, rmss[0], Ls[0], ws[0], Ms[0]));
            if (!snr_out.empty()) summary += " out=" + snr_out;
            print_summary(m, summary);
        } else if (*cmd_self) {
            m.set("command", "selftest");
            status = run_selftest(m);
        }

        m.write(manifest_path);
        return status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
