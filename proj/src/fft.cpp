#include "nci/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace nci::fft {

namespace {

// FFTW plan creation is not thread-safe; execution via the new-array API is.
std::mutex g_plan_mutex;

constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

fftw_plan plan_r2c_1d(std::size_t n) {
    static std::map<std::size_t, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                       reinterpret_cast<fftw_complex*>(out.data()), kFlags);
    if (!p) throw std::runtime_error("fftw: plan creation failed");
    cache.emplace(n, p);
    return p;
}

fftw_plan plan_c2r_1d(std::size_t n) {
    static std::map<std::size_t, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> in(n / 2 + 1);
    std::vector<double> out(n);
    fftw_plan p = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                       reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                       kFlags);
    if (!p) throw std::runtime_error("fftw: plan creation failed");
    cache.emplace(n, p);
    return p;
}

fftw_plan plan_r2c_2d(int h, int w) {
    static std::map<std::pair<int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find({h, w});
    if (it != cache.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(h) * w);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * (w / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_2d(h, w, in.data(),
                                       reinterpret_cast<fftw_complex*>(out.data()), kFlags);
    if (!p) throw std::runtime_error("fftw: plan creation failed");
    cache.emplace(std::make_pair(h, w), p);
    return p;
}

fftw_plan plan_c2r_2d(int h, int w) {
    static std::map<std::pair<int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find({h, w});
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> in(static_cast<std::size_t>(h) * (w / 2 + 1));
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    fftw_plan p = fftw_plan_dft_c2r_2d(h, w, reinterpret_cast<fftw_complex*>(in.data()),
                                       out.data(), kFlags);
    if (!p) throw std::runtime_error("fftw: plan creation failed");
    cache.emplace(std::make_pair(h, w), p);
    return p;
}

}  // namespace

std::size_t good_size(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void rfft(const double* in, std::size_t n, std::complex<double>* out) {
    fftw_plan p = plan_r2c_1d(n);
    std::vector<double> scratch(in, in + n);  // r2c may not modify input, but stay safe
    fftw_execute_dft_r2c(p, scratch.data(), reinterpret_cast<fftw_complex*>(out));
}

std::vector<std::complex<double>> rfft(const std::vector<double>& in) {
    std::vector<std::complex<double>> out(in.size() / 2 + 1);
    rfft(in.data(), in.size(), out.data());
    return out;
}

void irfft(const std::complex<double>* in, std::size_t n, double* out) {
    fftw_plan p = plan_c2r_1d(n);
    // c2r overwrites its input buffer; work on a copy.
    std::vector<std::complex<double>> scratch(in, in + n / 2 + 1);
    fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(scratch.data()), out);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

void rfft2(const double* in, int h, int w, std::complex<double>* out) {
    fftw_plan p = plan_r2c_2d(h, w);
    std::vector<double> scratch(in, in + static_cast<std::size_t>(h) * w);
    fftw_execute_dft_r2c(p, scratch.data(), reinterpret_cast<fftw_complex*>(out));
}

void irfft2(const std::complex<double>* in, int h, int w, double* out) {
    fftw_plan p = plan_c2r_2d(h, w);
    std::vector<std::complex<double>> scratch(in, in + static_cast<std::size_t>(h) * (w / 2 + 1));
    fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(scratch.data()), out);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (std::size_t i = 0, n = static_cast<std::size_t>(h) * w; i < n; ++i) out[i] *= inv;
}

std::vector<double> cross_correlate(const std::vector<double>& kernel,
                                    const std::vector<double>& signal) {
    if (kernel.empty() || signal.size() < kernel.size())
        throw std::invalid_argument("cross_correlate: kernel longer than signal");
    const std::size_t n = good_size(signal.size() + kernel.size());
    std::vector<double> a(n, 0.0), b(n, 0.0);
    std::copy(kernel.begin(), kernel.end(), a.begin());
    std::copy(signal.begin(), signal.end(), b.begin());

    std::vector<std::complex<double>> fa(n / 2 + 1), fb(n / 2 + 1);
    rfft(a.data(), n, fa.data());
    rfft(b.data(), n, fb.data());
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] = std::conj(fa[i]) * fb[i];

    std::vector<double> full(n);
    irfft(fa.data(), n, full.data());
    full.resize(signal.size() - kernel.size() + 1);
    return full;
}

}  // namespace nci::fft
