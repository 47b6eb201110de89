#ifndef NCI_SIMULATE_HPP
#define NCI_SIMULATE_HPP

// Analytic coded-video simulator: per-frame brightness is the uncoded base
// plus each code sample times its per-pixel transport image, with optional
// moving sprites, camera noise, clipping, gamma encode, and quantization.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nci/codegen.hpp"
#include "nci/types.hpp"

namespace nci {

struct Sprite {
    Image image;                             // opaque patch, scene channel count
    std::vector<std::pair<int, int>> path;   // (y, x) top-left per local frame
};

struct SceneModel {
    Image base;                    // uncoded term L(x), values in [0, 1]
    std::vector<Image> transport;  // per-source transfer coefficients alpha_i(x)
    std::vector<Sprite> sprites;
    double gamma = 0.0;            // encode exponent; 0 or 1 = linear

    // Throws std::invalid_argument on shape mismatch or bad gamma.
    void validate() const;
};

struct NoiseModel {
    double read_std = 0.0;      // a, brightness units
    double photon_coeff = 0.0;  // b, brightness^(1/2) units
    int quant_bits = 8;         // 0 disables quantization
    std::uint64_t noise_seed = 0;

    void validate() const;  // a, b >= 0; quant_bits in [0, 16]
    // Per-sample noise std at clean brightness L: a + b*sqrt(max(L, 0)).
    double sigma(double brightness) const;
};

// Renders t_count frames starting at absolute frame t0 of the bank timeline.
// Pipeline per frame: base + sum_i c_i(t)*alpha_i -> sprites -> Gaussian noise
// with per-pixel std a + b*sqrt(clean) -> clip to [0,1] -> gamma encode ->
// quantize. Per-frame noise streams are seeded from (noise_seed, absolute
// frame index), so output is independent of evaluation order.
FrameSequence render(const SceneModel& scene, const CodeSpec& spec,
                     const NoiseModel& noise, std::int64_t t0, int t_count);

// Least-squares fit of std = a + b*sqrt(mean) over temporally static flat
// fields at distinct brightness levels (at least three required).
NoiseModel fit_noise_from_flats(const std::vector<FrameSequence>& flats);

// Scene directory: <dir>/scene.txt with "key = value" lines referencing
// NetPBM images (paths relative to the directory):
//   base = base.pgm              required
//   transport.N = alphaN.pgm     N = 0..k-1, at least one
//   gamma = 0.4545               optional
//   sprite.N.image = patch.ppm   optional
//   sprite.N.path = y0,x0 y1,x1 ...   one pair per frame
SceneModel load_scene(const std::string& dir);
void save_scene(const SceneModel& scene, const std::string& dir);

}  // namespace nci

#endif
