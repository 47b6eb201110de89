#ifndef NCI_FFT_HPP
#define NCI_FFT_HPP

// Thin FFTW3 wrappers with a mutex-guarded plan cache. Plans are created with
// FFTW_ESTIMATE | FFTW_UNALIGNED so results are deterministic across runs and
// the new-array execute functions accept any buffer.

#include <complex>
#include <cstddef>
#include <vector>

namespace nci::fft {

// Smallest power of two >= n.
std::size_t good_size(std::size_t n);

// Forward real-to-complex transform; out has n/2 + 1 bins.
void rfft(const double* in, std::size_t n, std::complex<double>* out);
std::vector<std::complex<double>> rfft(const std::vector<double>& in);

// Inverse, normalized by 1/n (irfft(rfft(x)) == x up to rounding).
void irfft(const std::complex<double>* in, std::size_t n, double* out);

// 2-D variants for h x w row-major rasters; out is h x (w/2 + 1).
void rfft2(const double* in, int h, int w, std::complex<double>* out);
void irfft2(const std::complex<double>* in, int h, int w, double* out);

// r[o] = sum_t kernel[t] * signal[t + o] for o in [0, len(signal) - len(kernel)],
// computed by zero-padded FFT. Matches the direct sum within ~1e-12 relative.
std::vector<double> cross_correlate(const std::vector<double>& kernel,
                                    const std::vector<double>& signal);

}  // namespace nci::fft

#endif
