#include "gcnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "gcnn/dsp.hpp"
#include "gcnn/errors.hpp"

namespace gcnn {

namespace {

constexpr double kF0Min = 50.0;
constexpr double kF0Max = 500.0;
constexpr double kVoicingThreshold = 0.45;
constexpr int kLpcOrder = 8;

double mel_of_hz(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double hz_of_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular mel filterbank over power-spectrum bins [0, nfft/2].
std::vector<std::vector<double>> mel_bank(int nfilt, int nfft, int rate, double fmax) {
    const int nbins = nfft / 2 + 1;
    const double mel_lo = mel_of_hz(0.0);
    const double mel_hi = mel_of_hz(fmax);
    std::vector<double> edges(static_cast<std::size_t>(nfilt) + 2);
    for (int i = 0; i < nfilt + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            hz_of_mel(mel_lo + (mel_hi - mel_lo) * i / (nfilt + 1));
    std::vector<std::vector<double>> bank(static_cast<std::size_t>(nfilt),
                                          std::vector<double>(static_cast<std::size_t>(nbins), 0.0));
    for (int j = 0; j < nfilt; ++j) {
        const double lo = edges[static_cast<std::size_t>(j)];
        const double mid = edges[static_cast<std::size_t>(j) + 1];
        const double hi = edges[static_cast<std::size_t>(j) + 2];
        for (int k = 0; k < nbins; ++k) {
            const double f = static_cast<double>(k) * rate / nfft;
            double w = 0.0;
            if (f > lo && f < mid)
                w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi)
                w = (hi - f) / (hi - mid);
            bank[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = w;
        }
    }
    return bank;
}

struct Levinson {
    std::vector<double> a;  // a[1..p], A(z) = 1 - sum a_k z^-k
    bool ok = false;
};

Levinson levinson_durbin(const std::vector<double>& r, int p) {
    Levinson out;
    out.a.assign(static_cast<std::size_t>(p) + 1, 0.0);
    if (r[0] <= 1e-12) return out;
    double err = r[0];
    std::vector<double> a(static_cast<std::size_t>(p) + 1, 0.0), prev;
    for (int i = 1; i <= p; ++i) {
        double acc = r[static_cast<std::size_t>(i)];
        for (int j = 1; j < i; ++j)
            acc -= a[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(i - j)];
        const double k = acc / err;
        prev = a;
        a[static_cast<std::size_t>(i)] = k;
        for (int j = 1; j < i; ++j)
            a[static_cast<std::size_t>(j)] =
                prev[static_cast<std::size_t>(j)] - k * prev[static_cast<std::size_t>(i - j)];
        err *= (1.0 - k * k);
        if (err <= 0.0) return out;
    }
    out.a = a;
    out.ok = true;
    return out;
}

/// Chebyshev-series evaluation of a deflated symmetric LSP polynomial
/// f[0..p] (palindromic, order p = 2m) at omega.
double lsp_poly_eval(const std::vector<double>& f, int m, double omega) {
    double acc = f[static_cast<std::size_t>(m)] * 0.5;
    for (int k = 0; k < m; ++k)
        acc += f[static_cast<std::size_t>(k)] * std::cos(static_cast<double>(m - k) * omega);
    return acc;
}

/// LSP frequencies (fraction of Nyquist, ascending) from LPC coefficients.
/// Returns false when root isolation fails.
bool lsp_from_lpc(const std::vector<double>& a, int p, std::vector<double>& lsp) {
    // Polynomial form pa[0..p], pa[0] = 1, pa[k] = -a[k].
    std::vector<double> pa(static_cast<std::size_t>(p) + 1);
    pa[0] = 1.0;
    for (int k = 1; k <= p; ++k) pa[static_cast<std::size_t>(k)] = -a[static_cast<std::size_t>(k)];

    std::vector<double> P(static_cast<std::size_t>(p) + 2), Q(static_cast<std::size_t>(p) + 2);
    for (int i = 0; i <= p + 1; ++i) {
        const double lo = (i <= p) ? pa[static_cast<std::size_t>(i)] : 0.0;
        const double hi = (p + 1 - i <= p && p + 1 - i >= 0) ? pa[static_cast<std::size_t>(p + 1 - i)] : 0.0;
        P[static_cast<std::size_t>(i)] = lo + hi;
        Q[static_cast<std::size_t>(i)] = lo - hi;
    }
    // Deflate P by (1 + z^-1) and Q by (1 - z^-1); both become order p.
    std::vector<double> fp(static_cast<std::size_t>(p) + 1), fq(static_cast<std::size_t>(p) + 1);
    fp[0] = P[0];
    fq[0] = Q[0];
    for (int i = 1; i <= p; ++i) {
        fp[static_cast<std::size_t>(i)] = P[static_cast<std::size_t>(i)] - fp[static_cast<std::size_t>(i) - 1];
        fq[static_cast<std::size_t>(i)] = Q[static_cast<std::size_t>(i)] + fq[static_cast<std::size_t>(i) - 1];
    }
    const int m = p / 2;

    auto find_roots = [&](const std::vector<double>& f, std::vector<double>& roots) {
        const int grid = 512;
        double prev_w = 1e-4;
        double prev_v = lsp_poly_eval(f, m, prev_w);
        for (int i = 1; i <= grid; ++i) {
            const double w = M_PI * i / grid;
            const double v = lsp_poly_eval(f, m, w);
            if ((prev_v < 0.0) != (v < 0.0)) {
                double lo = prev_w, hi = w;
                double vlo = prev_v;
                for (int it = 0; it < 40; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double vm = lsp_poly_eval(f, m, mid);
                    if ((vlo < 0.0) != (vm < 0.0)) {
                        hi = mid;
                    } else {
                        lo = mid;
                        vlo = vm;
                    }
                }
                roots.push_back(0.5 * (lo + hi));
            }
            prev_w = w;
            prev_v = v;
        }
    };

    std::vector<double> rp, rq;
    find_roots(fp, rp);
    find_roots(fq, rq);
    if (static_cast<int>(rp.size()) != m || static_cast<int>(rq.size()) != m) return false;
    lsp.clear();
    lsp.reserve(static_cast<std::size_t>(p));
    for (int i = 0; i < m; ++i) {
        lsp.push_back(rq[static_cast<std::size_t>(i)] / M_PI);
        lsp.push_back(rp[static_cast<std::size_t>(i)] / M_PI);
    }
    std::sort(lsp.begin(), lsp.end());
    return true;
}

struct PitchResult {
    double f0 = 0.0;       // Hz, 0 when unvoiced
    double voicing = 0.0;  // [0, 1]
    bool voiced = false;
    double period_samples = 0.0;
};

/// Normalized cross-correlation pitch over lag range [rate/F0max, rate/F0min].
PitchResult estimate_pitch(const std::vector<double>& x, int rate) {
    PitchResult res;
    const int w = static_cast<int>(x.size());
    std::vector<double> csum(static_cast<std::size_t>(w) + 1, 0.0);
    for (int i = 0; i < w; ++i)
        csum[static_cast<std::size_t>(i) + 1] =
            csum[static_cast<std::size_t>(i)] + x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    if (csum[static_cast<std::size_t>(w)] <= 1e-14) return res;

    const int lag_min = std::max(2, static_cast<int>(std::floor(rate / kF0Max)));
    const int lag_max = std::min(w - 2, static_cast<int>(std::ceil(rate / kF0Min)));
    if (lag_max <= lag_min) return res;

    std::vector<double> nccf(static_cast<std::size_t>(lag_max) + 1, 0.0);
    for (int lag = lag_min; lag <= lag_max; ++lag) {
        const int n = w - lag;
        double num = 0.0;
        const double* p0 = x.data();
        const double* p1 = x.data() + lag;
        for (int t = 0; t < n; ++t) num += p0[t] * p1[t];
        const double e0 = csum[static_cast<std::size_t>(n)];
        const double e1 = csum[static_cast<std::size_t>(w)] - csum[static_cast<std::size_t>(lag)];
        const double den = std::sqrt(e0 * e1);
        nccf[static_cast<std::size_t>(lag)] = den > 1e-14 ? num / den : 0.0;
    }

    double best = -1.0;
    for (int lag = lag_min; lag <= lag_max; ++lag)
        best = std::max(best, nccf[static_cast<std::size_t>(lag)]);
    if (best <= 0.0) return res;

    // Smallest local maximum close to the global one avoids octave-down errors.
    int pick = -1;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
        const double v = nccf[static_cast<std::size_t>(lag)];
        const bool local_max =
            (lag == lag_min || v >= nccf[static_cast<std::size_t>(lag) - 1]) &&
            (lag == lag_max || v >= nccf[static_cast<std::size_t>(lag) + 1]);
        if (local_max && v >= best - 0.01) {
            pick = lag;
            break;
        }
    }
    if (pick < 0) return res;

    double lag_refined = pick;
    if (pick > lag_min && pick < lag_max) {
        const double ym = nccf[static_cast<std::size_t>(pick) - 1];
        const double y0 = nccf[static_cast<std::size_t>(pick)];
        const double yp = nccf[static_cast<std::size_t>(pick) + 1];
        const double denom = ym - 2.0 * y0 + yp;
        if (std::abs(denom) > 1e-12) {
            const double delta = 0.5 * (ym - yp) / denom;
            if (std::abs(delta) <= 1.0) lag_refined += delta;
        }
    }

    res.voicing = std::clamp(best, 0.0, 1.0);
    double f0 = static_cast<double>(rate) / lag_refined;
    f0 = std::clamp(f0, kF0Min, kF0Max);
    if (res.voicing >= kVoicingThreshold) {
        res.voiced = true;
        res.f0 = f0;
        res.period_samples = static_cast<double>(rate) / f0;
    }
    return res;
}

struct VoiceQuality {
    double jitter_local = 0.0;
    double jitter_ddp = 0.0;
    double shimmer_local = 0.0;
};

/// Pitch-mark based jitter/shimmer within one frame. Marks are positive
/// peaks roughly one period apart, refined with parabolic interpolation.
VoiceQuality jitter_shimmer(const std::vector<double>& x, double period) {
    VoiceQuality vq;
    const int w = static_cast<int>(x.size());
    if (period <= 2.0 || period >= w) return vq;

    auto peak_in = [&](int lo, int hi, double& pos, double& amp) -> bool {
        lo = std::max(1, lo);
        hi = std::min(w - 2, hi);
        if (hi < lo) return false;
        int best = lo;
        for (int i = lo; i <= hi; ++i)
            if (x[static_cast<std::size_t>(i)] > x[static_cast<std::size_t>(best)]) best = i;
        const double ym = x[static_cast<std::size_t>(best) - 1];
        const double y0 = x[static_cast<std::size_t>(best)];
        const double yp = x[static_cast<std::size_t>(best) + 1];
        const double denom = ym - 2.0 * y0 + yp;
        double d = 0.0;
        if (std::abs(denom) > 1e-12) d = std::clamp(0.5 * (ym - yp) / denom, -1.0, 1.0);
        pos = best + d;
        amp = y0 - 0.25 * (ym - yp) * d;
        return true;
    };

    std::vector<double> marks, amps;
    double pos = 0.0, amp = 0.0;
    if (!peak_in(0, static_cast<int>(std::ceil(1.5 * period)), pos, amp)) return vq;
    marks.push_back(pos);
    amps.push_back(amp);
    while (true) {
        const int lo = static_cast<int>(std::floor(marks.back() + 0.7 * period));
        const int hi = static_cast<int>(std::ceil(marks.back() + 1.3 * period));
        if (lo >= w - 2) break;
        if (!peak_in(lo, hi, pos, amp)) break;
        if (pos <= marks.back() + 1.0) break;
        marks.push_back(pos);
        amps.push_back(amp);
    }
    const int n = static_cast<int>(marks.size());
    if (n < 3) return vq;

    std::vector<double> periods(static_cast<std::size_t>(n) - 1);
    for (int i = 0; i + 1 < n; ++i)
        periods[static_cast<std::size_t>(i)] = marks[static_cast<std::size_t>(i) + 1] - marks[static_cast<std::size_t>(i)];
    double mean_p = 0.0;
    for (double p : periods) mean_p += p;
    mean_p /= static_cast<double>(periods.size());
    if (mean_p <= 0.0) return vq;

    double dsum = 0.0;
    for (std::size_t i = 1; i < periods.size(); ++i)
        dsum += std::abs(periods[i] - periods[i - 1]);
    if (periods.size() > 1)
        vq.jitter_local = dsum / static_cast<double>(periods.size() - 1) / mean_p;

    if (periods.size() >= 3) {
        double ddsum = 0.0;
        for (std::size_t i = 1; i + 1 < periods.size(); ++i)
            ddsum += std::abs((periods[i + 1] - periods[i]) - (periods[i] - periods[i - 1]));
        vq.jitter_ddp = ddsum / static_cast<double>(periods.size() - 2) / mean_p;
    }

    double mean_a = 0.0;
    for (double a : amps) mean_a += std::abs(a);
    mean_a /= static_cast<double>(n);
    if (mean_a > 1e-12) {
        double asum = 0.0;
        for (int i = 1; i < n; ++i)
            asum += std::abs(std::abs(amps[static_cast<std::size_t>(i)]) -
                             std::abs(amps[static_cast<std::size_t>(i) - 1]));
        vq.shimmer_local = asum / static_cast<double>(n - 1) / mean_a;
    }
    return vq;
}

}  // namespace

const std::array<std::string, LldRowLayout::kBaseRows>& LldRowLayout::row_names() {
    static const std::array<std::string, kBaseRows> names = [] {
        std::array<std::string, kBaseRows> n;
        int i = 0;
        n[static_cast<std::size_t>(i++)] = "loudness";
        for (int k = 0; k < kNumMfcc; ++k) n[static_cast<std::size_t>(i++)] = "mfcc[" + std::to_string(k) + "]";
        for (int k = 0; k < kNumLogMel; ++k) n[static_cast<std::size_t>(i++)] = "logMelBand[" + std::to_string(k) + "]";
        for (int k = 0; k < kNumLsp; ++k) n[static_cast<std::size_t>(i++)] = "lspFreq[" + std::to_string(k) + "]";
        n[static_cast<std::size_t>(i++)] = "f0_envelope";
        n[static_cast<std::size_t>(i++)] = "voicing_prob";
        n[static_cast<std::size_t>(i++)] = "f0_final";
        n[static_cast<std::size_t>(i++)] = "jitter_local";
        n[static_cast<std::size_t>(i++)] = "jitter_ddp";
        n[static_cast<std::size_t>(i++)] = "shimmer_local";
        return n;
    }();
    return names;
}

std::vector<std::vector<float>> frame_signal(const AudioClip& clip, const FrameConfig& cfg) {
    if (cfg.hop_ms > cfg.frame_ms || cfg.hop_ms <= 0)
        throw ConfigError("hop must be in (0, frame]");
    const int w = cfg.frame_ms * clip.sample_rate / 1000;
    const int h = cfg.hop_ms * clip.sample_rate / 1000;
    const std::vector<double> win = dsp::hamming(static_cast<std::size_t>(w));
    const std::size_t len = clip.samples.size();

    std::size_t count = 1;
    if (len >= static_cast<std::size_t>(w))
        count = (len - static_cast<std::size_t>(w)) / static_cast<std::size_t>(h) + 1;

    std::vector<std::vector<float>> frames(count);
    for (std::size_t f = 0; f < count; ++f) {
        const std::size_t start = f * static_cast<std::size_t>(h);
        auto& frame = frames[f];
        frame.resize(static_cast<std::size_t>(w));
        for (int i = 0; i < w; ++i) {
            const std::size_t gi = start + static_cast<std::size_t>(i);
            const double s = gi < len ? static_cast<double>(clip.samples[gi]) : 0.0;
            frame[static_cast<std::size_t>(i)] = static_cast<float>(s * win[static_cast<std::size_t>(i)]);
        }
    }
    return frames;
}

FeatureMatrix extract_lld(const std::vector<std::vector<float>>& frames, int sample_rate,
                          const FrameConfig& cfg) {
    if (frames.empty()) throw EmptyInputError("no frames");
    const int w = cfg.frame_ms * sample_rate / 1000;
    const int nfft = static_cast<int>(dsp::next_pow2(std::max<std::size_t>(512, static_cast<std::size_t>(w))));
    const int nbins = nfft / 2 + 1;
    const double fmax = std::min(8000.0, sample_rate / 2.0);

    const std::vector<double> win = dsp::hamming(static_cast<std::size_t>(w));
    const auto mfcc_bank = mel_bank(26, nfft, sample_rate, fmax);
    const auto logmel_bank = mel_bank(LldRowLayout::kNumLogMel, nfft, sample_rate, fmax);

    // Orthonormal DCT-II rows for MFCC.
    const int nfilt = 26;
    std::vector<double> dct(static_cast<std::size_t>(LldRowLayout::kNumMfcc) * nfilt);
    for (int i = 0; i < LldRowLayout::kNumMfcc; ++i) {
        const double scale = i == 0 ? std::sqrt(1.0 / nfilt) : std::sqrt(2.0 / nfilt);
        for (int j = 0; j < nfilt; ++j)
            dct[static_cast<std::size_t>(i) * nfilt + static_cast<std::size_t>(j)] =
                scale * std::cos(M_PI * i * (j + 0.5) / nfilt);
    }

    const int tcount = static_cast<int>(frames.size());
    FeatureMatrix out;
    out.rows = LldRowLayout::kBaseRows;
    out.cols = tcount;
    out.v.assign(static_cast<std::size_t>(out.rows) * tcount, 0.0f);

    std::vector<std::complex<double>> spec(static_cast<std::size_t>(nfft));
    std::vector<double> power(static_cast<std::size_t>(nbins));
    std::vector<double> raw(static_cast<std::size_t>(w));
    double f0_env = 0.0;

    for (int t = 0; t < tcount; ++t) {
        const auto& frame = frames[static_cast<std::size_t>(t)];
        double energy = 0.0;
        for (int i = 0; i < w; ++i) {
            const double wi = win[static_cast<std::size_t>(i)];
            const double v = wi > 1e-6 ? frame[static_cast<std::size_t>(i)] / wi
                                       : frame[static_cast<std::size_t>(i)];
            raw[static_cast<std::size_t>(i)] = v;
            energy += v * v;
        }
        const double rms = std::sqrt(energy / w);
        out.at(0, t) = static_cast<float>(std::log1p(rms * 1e4));

        if (energy <= 1e-14) {
            // Degenerate frame: defined fallbacks, no NaNs downstream.
            const double log_floor = std::log(1e-10);
            for (int k = 0; k < LldRowLayout::kNumMfcc; ++k) {
                double c = 0.0;
                for (int j = 0; j < nfilt; ++j)
                    c += dct[static_cast<std::size_t>(k) * nfilt + static_cast<std::size_t>(j)] * log_floor;
                out.at(1 + k, t) = static_cast<float>(c);
            }
            for (int k = 0; k < LldRowLayout::kNumLogMel; ++k)
                out.at(1 + LldRowLayout::kNumMfcc + k, t) = static_cast<float>(log_floor);
            for (int k = 0; k < LldRowLayout::kNumLsp; ++k)
                out.at(1 + LldRowLayout::kNumMfcc + LldRowLayout::kNumLogMel + k, t) =
                    static_cast<float>((k + 1) / 9.0);
            out.at(32, t) = static_cast<float>(f0_env);
            continue;
        }

        for (int i = 0; i < nfft; ++i)
            spec[static_cast<std::size_t>(i)] = i < w ? frame[static_cast<std::size_t>(i)] : 0.0;
        dsp::fft(spec, false);
        for (int k = 0; k < nbins; ++k) power[static_cast<std::size_t>(k)] = std::norm(spec[static_cast<std::size_t>(k)]);

        // MFCC 0..14
        std::vector<double> logmel26(static_cast<std::size_t>(nfilt));
        for (int j = 0; j < nfilt; ++j) {
            double e = 0.0;
            const auto& fb = mfcc_bank[static_cast<std::size_t>(j)];
            for (int k = 0; k < nbins; ++k) e += fb[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
            logmel26[static_cast<std::size_t>(j)] = std::log(std::max(e, 1e-10));
        }
        for (int i = 0; i < LldRowLayout::kNumMfcc; ++i) {
            double c = 0.0;
            for (int j = 0; j < nfilt; ++j)
                c += dct[static_cast<std::size_t>(i) * nfilt + static_cast<std::size_t>(j)] * logmel26[static_cast<std::size_t>(j)];
            out.at(1 + i, t) = static_cast<float>(c);
        }

        // 8 log-mel bands
        for (int j = 0; j < LldRowLayout::kNumLogMel; ++j) {
            double e = 0.0;
            const auto& fb = logmel_bank[static_cast<std::size_t>(j)];
            for (int k = 0; k < nbins; ++k) e += fb[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
            out.at(1 + LldRowLayout::kNumMfcc + j, t) = static_cast<float>(std::log(std::max(e, 1e-10)));
        }

        // LSP from LPC
        std::vector<double> r(static_cast<std::size_t>(kLpcOrder) + 1, 0.0);
        for (int lag = 0; lag <= kLpcOrder; ++lag) {
            double acc = 0.0;
            for (int i = 0; i + lag < w; ++i)
                acc += static_cast<double>(frame[static_cast<std::size_t>(i)]) *
                       frame[static_cast<std::size_t>(i + lag)];
            r[static_cast<std::size_t>(lag)] = acc;
        }
        r[0] *= 1.0 + 1e-6;  // tiny ridge keeps near-singular tone frames stable
        const Levinson lev = levinson_durbin(r, kLpcOrder);
        std::vector<double> lsp;
        bool have_lsp = lev.ok && lsp_from_lpc(lev.a, kLpcOrder, lsp);
        for (int k = 0; k < LldRowLayout::kNumLsp; ++k) {
            const double v = have_lsp ? lsp[static_cast<std::size_t>(k)] : (k + 1) / 9.0;
            out.at(1 + LldRowLayout::kNumMfcc + LldRowLayout::kNumLogMel + k, t) =
                static_cast<float>(v);
        }

        // Pitch and voice quality on the de-windowed frame
        const PitchResult pr = estimate_pitch(raw, sample_rate);
        if (pr.voiced) f0_env = pr.f0;
        out.at(32, t) = static_cast<float>(f0_env);
        out.at(33, t) = static_cast<float>(pr.voicing);
        out.at(34, t) = static_cast<float>(pr.f0);
        if (pr.voiced) {
            const VoiceQuality vq = jitter_shimmer(raw, pr.period_samples);
            out.at(35, t) = static_cast<float>(vq.jitter_local);
            out.at(36, t) = static_cast<float>(vq.jitter_ddp);
            out.at(37, t) = static_cast<float>(vq.shimmer_local);
        }
    }
    return out;
}

FeatureMatrix append_deltas(const FeatureMatrix& base) {
    if (base.cols < 1) throw EmptyInputError("empty matrix");
    FeatureMatrix out;
    out.rows = base.rows * 2;
    out.cols = base.cols;
    out.v.assign(static_cast<std::size_t>(out.rows) * out.cols, 0.0f);
    std::copy(base.v.begin(), base.v.end(), out.v.begin());
    const int T = base.cols;
    auto clamped = [&](int r, int t) { return base.at(r, std::clamp(t, 0, T - 1)); };
    for (int r = 0; r < base.rows; ++r) {
        for (int t = 0; t < T; ++t) {
            const double d = (1.0 * (clamped(r, t + 1) - clamped(r, t - 1)) +
                              2.0 * (clamped(r, t + 2) - clamped(r, t - 2))) /
                             10.0;
            out.at(base.rows + r, t) = static_cast<float>(d);
        }
    }
    return out;
}

FeatureMatrix assemble_feature_matrix(const FeatureMatrix& lld, int target_cols,
                                      const RowStats* stats) {
    if (lld.cols < 1) throw EmptyInputError("empty matrix");
    FeatureMatrix out;
    out.rows = lld.rows;
    out.cols = target_cols;
    out.v.assign(static_cast<std::size_t>(out.rows) * target_cols, 0.0f);
    const int valid = std::min(lld.cols, target_cols);
    for (int r = 0; r < lld.rows; ++r) {
        float mean = 0.0f, inv = 1.0f;
        if (stats) {
            mean = stats->mean[static_cast<std::size_t>(r)];
            inv = 1.0f / std::max(stats->stddev[static_cast<std::size_t>(r)], 1e-6f);
        }
        for (int t = 0; t < valid; ++t) out.at(r, t) = (lld.at(r, t) - mean) * inv;
    }
    return out;
}

RowStats compute_fold_stats(const std::vector<const FeatureMatrix*>& matrices) {
    if (matrices.empty()) throw EmptyInputError("no matrices");
    const int rows = matrices.front()->rows;
    RowStats st;
    st.mean.assign(static_cast<std::size_t>(rows), 0.0f);
    st.stddev.assign(static_cast<std::size_t>(rows), 0.0f);
    std::vector<double> sum(static_cast<std::size_t>(rows), 0.0), sq(static_cast<std::size_t>(rows), 0.0);
    std::size_t count = 0;
    for (const FeatureMatrix* m : matrices) {
        if (m->rows != rows) throw ShapeMismatchError("row count mismatch");
        for (int r = 0; r < rows; ++r) {
            for (int t = 0; t < m->cols; ++t) {
                const double v = m->at(r, t);
                sum[static_cast<std::size_t>(r)] += v;
                sq[static_cast<std::size_t>(r)] += v * v;
            }
        }
        count += static_cast<std::size_t>(m->cols);
    }
    for (int r = 0; r < rows; ++r) {
        const double mean = sum[static_cast<std::size_t>(r)] / static_cast<double>(count);
        const double var = std::max(0.0, sq[static_cast<std::size_t>(r)] / static_cast<double>(count) - mean * mean);
        st.mean[static_cast<std::size_t>(r)] = static_cast<float>(mean);
        st.stddev[static_cast<std::size_t>(r)] = static_cast<float>(std::sqrt(var));
    }
    return st;
}

FeatureMatrix extract_features(const AudioClip& clip, const FrameConfig& cfg) {
    const auto frames = frame_signal(clip, cfg);
    FeatureMatrix lld = extract_lld(frames, clip.sample_rate, cfg);
    FeatureMatrix full = append_deltas(lld);
    for (float& x : full.v)
        if (!std::isfinite(x)) x = 0.0f;
    return full;
}

void write_feature_cache(const std::string& path, const FeatureMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write feature cache: " + path);
    out.write("LLDC", 4);
    const uint32_t version = 1, rows = static_cast<uint32_t>(m.rows), cols = static_cast<uint32_t>(m.cols);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    out.write(reinterpret_cast<const char*>(m.v.data()),
              static_cast<std::streamsize>(m.v.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path);
}

FeatureMatrix read_feature_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open feature cache: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LLDC", 4) != 0)
        throw UnsupportedFormatError(path + ": bad feature cache magic");
    uint32_t version = 0, rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    if (!in || version != 1) throw UnsupportedFormatError(path + ": bad cache version");
    FeatureMatrix m;
    m.rows = static_cast<int>(rows);
    m.cols = static_cast<int>(cols);
    m.v.resize(static_cast<std::size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(m.v.data()),
            static_cast<std::streamsize>(m.v.size() * sizeof(float)));
    if (!in) throw UnsupportedFormatError(path + ": truncated cache");
    return m;
}

}  // namespace gcnn
