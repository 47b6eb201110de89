#include "nci/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nci/io_formats.hpp"
#include "nci/prng.hpp"

namespace nci {

namespace {
constexpr std::uint64_t kNoiseTag = 0xF0;
}

void SceneModel::validate() const {
    if (base.h <= 0 || base.w <= 0 || base.c <= 0)
        throw std::invalid_argument("scene: empty base image");
    if (transport.empty())
        throw std::invalid_argument("scene: at least one transport image required");
    for (const Image& a : transport)
        if (!a.same_shape(base))
            throw std::invalid_argument("scene: transport image shape mismatch");
    for (const Sprite& s : sprites) {
        if (s.image.c != base.c)
            throw std::invalid_argument("scene: sprite channel count mismatch");
        if (s.path.empty())
            throw std::invalid_argument("scene: sprite has empty path");
    }
    if (gamma < 0.0)
        throw std::invalid_argument("scene: gamma must be >= 0");
}

void NoiseModel::validate() const {
    if (read_std < 0.0 || photon_coeff < 0.0)
        throw std::invalid_argument("noise: a and b must be >= 0");
    if (quant_bits < 0 || quant_bits > 16)
        throw std::invalid_argument("noise: quant_bits must be in [0, 16]");
}

double NoiseModel::sigma(double brightness) const {
    return read_std + photon_coeff * std::sqrt(std::max(brightness, 0.0));
}

FrameSequence render(const SceneModel& scene, const CodeSpec& spec,
                     const NoiseModel& noise, std::int64_t t0, int t_count) {
    scene.validate();
    noise.validate();
    spec.validate();
    if (t_count <= 0) throw std::invalid_argument("render: t_count must be >= 1");
    const int k = static_cast<int>(scene.transport.size());
    if (k != spec.num_codes)
        throw std::invalid_argument("render: transport image count != num_codes");

    std::vector<std::vector<double>> codes(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) codes[i] = code_for_interval(spec, t0, t0 + t_count, i);

    // Headroom check: the brightest possible coded frame should stay near 1.
    double worst = 0.0;
    {
        std::vector<double> peak(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < k; ++i)
            for (double v : codes[i]) peak[i] = std::max(peak[i], std::abs(v));
        for (std::size_t p = 0; p < scene.base.size(); ++p) {
            double v = scene.base.data[p];
            for (int i = 0; i < k; ++i) v += peak[i] * scene.transport[i].data[p];
            worst = std::max(worst, v);
        }
        if (worst > 1.1)
            std::fprintf(stderr, "render: warning: peak coded brightness %.3f exceeds 1.1\n",
                         worst);
    }

    const int h = scene.base.h, w = scene.base.w, c = scene.base.c;
    FrameSequence out(t_count, h, w, c, spec.fps);
    out.provenance = "render";
    const bool noisy = noise.read_std > 0.0 || noise.photon_coeff > 0.0;
    const double levels = noise.quant_bits > 0 ? double((1 << noise.quant_bits) - 1) : 0.0;
    const bool encode = scene.gamma > 0.0 && scene.gamma != 1.0;

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < t_count; ++t) {
        float* frame = out.frame(t);
        for (std::size_t p = 0; p < scene.base.size(); ++p) {
            double v = scene.base.data[p];
            for (int i = 0; i < k; ++i)
                v += codes[i][static_cast<std::size_t>(t)] * scene.transport[i].data[p];
            frame[p] = static_cast<float>(v);
        }
        for (const Sprite& s : scene.sprites) {
            const auto& pos = s.path[std::min<std::size_t>(t, s.path.size() - 1)];
            for (int sy = 0; sy < s.image.h; ++sy) {
                int y = pos.first + sy;
                if (y < 0 || y >= h) continue;
                for (int sx = 0; sx < s.image.w; ++sx) {
                    int x = pos.second + sx;
                    if (x < 0 || x >= w) continue;
                    for (int ch = 0; ch < c; ++ch)
                        frame[(static_cast<std::size_t>(y) * w + x) * c + ch] =
                            s.image.at(sy, sx, ch);
                }
            }
        }
        if (noisy) {
            Xoshiro256pp rng(hash_seed(
                {noise.noise_seed, kNoiseTag, static_cast<std::uint64_t>(t0 + t)}));
            for (std::size_t p = 0; p < scene.base.size(); ++p) {
                double n = rng.normal();
                frame[p] = static_cast<float>(frame[p] + noise.sigma(frame[p]) * n);
            }
        }
        for (std::size_t p = 0; p < scene.base.size(); ++p) {
            double v = std::clamp(static_cast<double>(frame[p]), 0.0, 1.0);
            if (encode) v = std::pow(v, scene.gamma);
            if (levels > 0.0) v = std::round(v * levels) / levels;
            frame[p] = static_cast<float>(v);
        }
    }
    return out;
}

NoiseModel fit_noise_from_flats(const std::vector<FrameSequence>& flats) {
    struct Point {
        double mean, std;
    };
    std::vector<Point> pts;
    for (const FrameSequence& seq : flats) {
        if (seq.t < 2) throw std::invalid_argument("fit_noise: sequence needs >= 2 frames");
        const std::size_t n = seq.frame_stride();
        double mean_acc = 0.0, std_acc = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double m = 0.0;
            for (int t = 0; t < seq.t; ++t) m += seq.data[seq.frame_stride() * t + p];
            m /= seq.t;
            double ss = 0.0;
            for (int t = 0; t < seq.t; ++t) {
                double d = seq.data[seq.frame_stride() * t + p] - m;
                ss += d * d;
            }
            mean_acc += m;
            std_acc += std::sqrt(ss / (seq.t - 1));
        }
        pts.push_back({mean_acc / double(n), std_acc / double(n)});
    }

    // Require three distinct brightness levels for a stable line fit.
    std::vector<double> means;
    for (const Point& p : pts) {
        bool dup = false;
        for (double m : means)
            if (std::abs(m - p.mean) < 1e-6) dup = true;
        if (!dup) means.push_back(p.mean);
    }
    if (means.size() < 3)
        throw config_error("fit_noise: need flats at >= 3 distinct brightness levels");

    // Least squares for std = a + b*sqrt(mean).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const Point& p : pts) {
        double x = std::sqrt(std::max(p.mean, 0.0));
        sx += x;
        sy += p.std;
        sxx += x * x;
        sxy += x * p.std;
    }
    const double n = double(pts.size());
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-12)
        throw config_error("fit_noise: degenerate brightness spread");
    NoiseModel model;
    model.photon_coeff = (n * sxy - sx * sy) / det;
    model.read_std = (sy - model.photon_coeff * sx) / n;
    // Tiny negative values from noise in the fit are clamped to the model domain.
    model.read_std = std::max(model.read_std, 0.0);
    model.photon_coeff = std::max(model.photon_coeff, 0.0);
    model.quant_bits = 0;
    return model;
}

namespace {

Image load_netpbm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("scene: cannot open image '" + path.string() + "'");
    return read_netpbm(in);
}

std::vector<std::pair<int, int>> parse_path(const std::string& text) {
    std::vector<std::pair<int, int>> path;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        std::size_t comma = tok.find(',');
        if (comma == std::string::npos)
            throw config_error("scene: sprite path entry '" + tok + "' is not y,x");
        path.emplace_back(std::stoi(tok.substr(0, comma)), std::stoi(tok.substr(comma + 1)));
    }
    if (path.empty()) throw config_error("scene: empty sprite path");
    return path;
}

}  // namespace

SceneModel load_scene(const std::string& dir) {
    const std::filesystem::path root(dir);
    std::ifstream in(root / "scene.txt");
    if (!in) throw config_error("scene: missing " + (root / "scene.txt").string());

    std::map<std::string, std::string> kv;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw parse_error("scene: expected key = value", 0, line_no);
            continue;
        }
        auto trim = [](std::string s) {
            std::size_t b = s.find_first_not_of(" \t\r");
            std::size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    SceneModel scene;
    auto it = kv.find("base");
    if (it == kv.end()) throw config_error("scene: missing 'base' key");
    scene.base = load_netpbm_file(root / it->second);

    for (int i = 0;; ++i) {
        auto ti = kv.find("transport." + std::to_string(i));
        if (ti == kv.end()) break;
        scene.transport.push_back(load_netpbm_file(root / ti->second));
    }
    if (scene.transport.empty()) throw config_error("scene: missing 'transport.0' key");

    if (auto gi = kv.find("gamma"); gi != kv.end()) scene.gamma = std::stod(gi->second);

    for (int i = 0;; ++i) {
        auto im = kv.find("sprite." + std::to_string(i) + ".image");
        if (im == kv.end()) break;
        auto pa = kv.find("sprite." + std::to_string(i) + ".path");
        if (pa == kv.end())
            throw config_error("scene: sprite." + std::to_string(i) + " missing path");
        scene.sprites.push_back({load_netpbm_file(root / im->second), parse_path(pa->second)});
    }

    scene.validate();
    return scene;
}

void save_scene(const SceneModel& scene, const std::string& dir) {
    scene.validate();
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    auto dump = [&](const Image& im, const std::string& name) {
        std::ofstream out(root / name, std::ios::binary);
        write_netpbm(im, 16, out);
        if (!out) throw std::runtime_error("scene: cannot write " + (root / name).string());
    };

    std::ofstream txt(root / "scene.txt");
    txt << "# scene description\n";
    const char* base_ext = scene.base.c == 1 ? ".pgm" : ".ppm";
    dump(scene.base, std::string("base") + base_ext);
    txt << "base = base" << base_ext << "\n";
    for (std::size_t i = 0; i < scene.transport.size(); ++i) {
        std::string name = "transport" + std::to_string(i) + base_ext;
        dump(scene.transport[i], name);
        txt << "transport." << i << " = " << name << "\n";
    }
    if (scene.gamma > 0.0) txt << "gamma = " << scene.gamma << "\n";
    for (std::size_t i = 0; i < scene.sprites.size(); ++i) {
        const char* ext = scene.sprites[i].image.c == 1 ? ".pgm" : ".ppm";
        std::string name = "sprite" + std::to_string(i) + ext;
        dump(scene.sprites[i].image, name);
        txt << "sprite." << i << ".image = " << name << "\n";
        txt << "sprite." << i << ".path =";
        for (auto [y, x] : scene.sprites[i].path) txt << " " << y << "," << x;
        txt << "\n";
    }
    if (!txt) throw std::runtime_error("scene: cannot write scene.txt");
}

}  // namespace nci
