#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace skdv {

using Complex = std::complex<double>;

/// Real-to-complex / complex-to-real FFTW plans for one transform length.
///
/// Plans are created once (planner calls are serialized through a global
/// mutex) and executed through the new-array interface, which FFTW documents
/// as thread-safe. Instances are obtained through `FftPlan::get(n)` and shared.
class FftPlan {
public:
    static std::shared_ptr<const FftPlan> get(std::size_t n) {
        static std::mutex cache_mutex;
        static std::map<std::size_t, std::shared_ptr<const FftPlan>> cache;
        std::lock_guard lock(cache_mutex);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
        auto plan = std::shared_ptr<const FftPlan>(new FftPlan(n));
        cache.emplace(n, plan);
        return plan;
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    ~FftPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    std::size_t size() const { return n_; }
    std::size_t spectrum_size() const { return n_ / 2 + 1; }

    /// Unnormalized forward DFT: out_m = sum_j in_j exp(-2 pi i j m / n).
    void forward(std::span<const double> in, std::span<Complex> out) const {
        check(in.size() == n_ && out.size() == spectrum_size());
        // FFTW does not modify the input of an r2c transform.
        fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()));
    }

    /// Inverse DFT including the 1/n factor. `in` is left untouched.
    void backward(std::span<const Complex> in, std::span<double> out) const {
        check(in.size() == spectrum_size() && out.size() == n_);
        thread_local std::vector<Complex> scratch;
        scratch.assign(in.begin(), in.end());
        fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(scratch.data()),
                             out.data());
        const double scale = 1.0 / static_cast<double>(n_);
        for (double& v : out) v *= scale;
    }

    std::vector<Complex> forward(std::span<const double> in) const {
        std::vector<Complex> out(spectrum_size());
        forward(in, out);
        return out;
    }

    std::vector<double> backward(std::span<const Complex> in) const {
        std::vector<double> out(n_);
        backward(in, out);
        return out;
    }

private:
    explicit FftPlan(std::size_t n) : n_(n) {
        std::vector<double> real(n);
        std::vector<Complex> spec(n / 2 + 1);
        std::lock_guard lock(planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(),
                                        reinterpret_cast<fftw_complex*>(spec.data()), flags);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                         reinterpret_cast<fftw_complex*>(spec.data()),
                                         real.data(), flags);
        if (!forward_ || !backward_) throw std::runtime_error("fftw: plan creation failed");
    }

    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    static void check(bool ok) {
        if (!ok) throw std::invalid_argument("fft: buffer size mismatch");
    }

    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace skdv
