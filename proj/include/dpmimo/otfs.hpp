// SPDX-License-Identifier: Apache-2.0
//
// dpmimo - dual-polarized MIMO link-level simulation for rail tunnels
// Copyright (C) 2026 The dpmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#ifndef DPMIMO_OTFS_HPP
#define DPMIMO_OTFS_HPP

#include "dpmimo/common.hpp"

#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include <optional>
#include <span>
#include <vector>

// OTFS modulation on an M x N delay-Doppler grid (M delay bins, N Doppler bins) and the
// matching time-domain and effective delay-Doppler channel matrices.
//
// All DFT matrices are unitary. Grids are stored M x N and vectorized column-major, so the
// vector index of grid point (delay m, Doppler n) is m + n M.

namespace dpmimo::otfs
{
    using DDGrid = CMat;
    using TFGrid = CMat;

    enum class CpMode
    {
        per_block, // one CP of N_CP samples in front of each length-M block
        frame      // a single CP of N_CP samples in front of the whole MN-sample frame
    };

    enum class Pulse
    {
        rectangular,
        raised_cosine
    };

    struct OtfsFrameConfig
    {
        int delay_bins = 128;                  // M
        int doppler_bins = 16;                 // N
        double subcarrier_spacing = 156250.0;  // Hz
        int cp_length = 0;                     // samples
        CpMode cp_mode = CpMode::per_block;

        int mn() const { return delay_bins * doppler_bins; }
        double symbol_duration() const { return 1.0 / subcarrier_spacing; }
        double sample_period() const { return 1.0 / (delay_bins * subcarrier_spacing); }
        double delay_resolution() const { return sample_period(); }
        double doppler_resolution() const { return subcarrier_spacing / doppler_bins; }

        // Serialized frame length including CP samples.
        int frame_length() const { return cp_mode == CpMode::per_block ? (delay_bins + cp_length) * doppler_bins : mn() + cp_length; }

        void validate() const
        {
            if (delay_bins < 1)
                throw std::invalid_argument("frame.delay_bins must be >= 1");
            if (doppler_bins < 1)
                throw std::invalid_argument("frame.doppler_bins must be >= 1");
            if (cp_length < 0)
                throw std::invalid_argument("frame.cp_length must be >= 0");
            if (!(subcarrier_spacing > 0.0))
                throw std::invalid_argument("frame.subcarrier_spacing must be > 0");
        }
    };

    inline void check_grid(const CMat &x, const OtfsFrameConfig &f)
    {
        if (x.rows() != f.delay_bins || x.cols() != f.doppler_bins)
            throw std::invalid_argument("grid dimensions do not match the frame");
    }

    // Unitary DFT matrix, entry (a, b) = exp(-j 2 pi a b / n) / sqrt(n).
    inline CMat dft_matrix(int n)
    {
        if (n < 1)
            throw std::invalid_argument("DFT size must be >= 1");
        CMat f(n, n);
        const double s = 1.0 / std::sqrt(static_cast<double>(n));
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                f(a, b) = s * expj(-two_pi * static_cast<double>((static_cast<long long>(a) * b) % n) / n);
        return f;
    }

    // ---------- Transforms ----------

    inline TFGrid isfft(const DDGrid &x)
    {
        return dft_matrix(static_cast<int>(x.rows())) * x * dft_matrix(static_cast<int>(x.cols())).adjoint();
    }

    inline DDGrid sfft(const TFGrid &y)
    {
        return dft_matrix(static_cast<int>(y.rows())).adjoint() * y * dft_matrix(static_cast<int>(y.cols()));
    }

    inline CMat heisenberg(const TFGrid &x_tf, Pulse pulse = Pulse::rectangular)
    {
        if (pulse != Pulse::rectangular)
            throw std::invalid_argument("unsupported pulse");
        return dft_matrix(static_cast<int>(x_tf.rows())).adjoint() * x_tf;
    }

    inline CVec add_cp(const CMat &x_t, int cp_length, CpMode mode = CpMode::per_block)
    {
        if (cp_length < 0)
            throw std::invalid_argument("CP length must be >= 0");
        const Eigen::Index m = x_t.rows();
        const Eigen::Index n = x_t.cols();
        if (mode == CpMode::per_block)
        {
            if (cp_length > m)
                throw std::invalid_argument("CP longer than a block");
            CVec out((m + cp_length) * n);
            for (Eigen::Index c = 0; c < n; ++c)
            {
                out.segment(c * (m + cp_length), cp_length) = x_t.col(c).tail(cp_length);
                out.segment(c * (m + cp_length) + cp_length, m) = x_t.col(c);
            }
            return out;
        }
        if (cp_length > m * n)
            throw std::invalid_argument("CP longer than the frame");
        const CVec v = x_t.reshaped();
        CVec out(m * n + cp_length);
        out << v.tail(cp_length), v;
        return out;
    }

    inline CMat remove_cp(const CVec &r, int m, int n, int cp_length, CpMode mode = CpMode::per_block)
    {
        if (mode == CpMode::per_block)
        {
            if (r.size() != static_cast<Eigen::Index>(m + cp_length) * n)
                throw std::invalid_argument("received length does not match (M + N_CP) N");
            CMat out(m, n);
            for (int c = 0; c < n; ++c)
                out.col(c) = r.segment(static_cast<Eigen::Index>(c) * (m + cp_length) + cp_length, m);
            return out;
        }
        if (r.size() != static_cast<Eigen::Index>(m) * n + cp_length)
            throw std::invalid_argument("received length does not match MN + N_CP");
        return r.tail(static_cast<Eigen::Index>(m) * n).reshaped(m, n);
    }

    inline TFGrid wigner_receive(const CVec &r, const OtfsFrameConfig &f)
    {
        return dft_matrix(f.delay_bins) * remove_cp(r, f.delay_bins, f.doppler_bins, f.cp_length, f.cp_mode);
    }

    // Transmit chain: DD grid -> serialized samples with CP.
    inline CVec modulate(const DDGrid &x, const OtfsFrameConfig &f)
    {
        check_grid(x, f);
        return add_cp(heisenberg(isfft(x)), f.cp_length, f.cp_mode);
    }

    inline DDGrid demodulate(const CVec &r, const OtfsFrameConfig &f)
    {
        return sfft(wigner_receive(r, f));
    }

    // ---------- Channel matrices ----------

    // One grid-quantized path: delay in samples, Doppler in bins of delta_f / N.
    struct DDTap
    {
        cplx gain = 1.0;
        int delay_idx = 0;
        int doppler_idx = 0;
    };

    inline int default_cp_length(std::span<const DDTap> taps)
    {
        int l_max = 0;
        for (const auto &t : taps)
            l_max = std::max(l_max, t.delay_idx);
        return l_max + 1;
    }

    inline int mod(long long a, long long n)
    {
        const long long r = a % n;
        return static_cast<int>(r < 0 ? r + n : r);
    }

    inline void check_taps(std::span<const DDTap> taps, const OtfsFrameConfig &f)
    {
        f.validate();
        for (const auto &t : taps)
        {
            if (t.delay_idx < 0)
                throw std::invalid_argument("negative tap delay");
            if (t.delay_idx > f.cp_length)
                throw std::invalid_argument("CP too short");
            if (t.delay_idx >= f.delay_bins)
                throw std::invalid_argument("tap delay exceeds the delay grid");
        }
    }

    // Cyclic delay by l samples: within each block (per-block CP) or over the frame.
    inline CMat delay_permutation(int l, const OtfsFrameConfig &f)
    {
        const int m = f.delay_bins;
        const int mn = f.mn();
        CMat p = CMat::Zero(mn, mn);
        for (int i = 0; i < mn; ++i)
        {
            const int src = f.cp_mode == CpMode::frame ? mod(i - l, mn) : (i / m) * m + mod(i % m - l, m);
            p(i, src) = 1.0;
        }
        return p;
    }

    inline CMat doppler_diagonal(int k, const OtfsFrameConfig &f)
    {
        const int mn = f.mn();
        CVec d(mn);
        for (int i = 0; i < mn; ++i)
            d(i) = expj(two_pi * mod(static_cast<long long>(k) * i, mn) / mn);
        return d.asDiagonal();
    }

    inline CMat time_channel_matrix(std::span<const DDTap> taps, const OtfsFrameConfig &f)
    {
        check_taps(taps, f);
        CMat h = CMat::Zero(f.mn(), f.mn());
        for (const auto &t : taps)
            h += t.gain * delay_permutation(t.delay_idx, f) * doppler_diagonal(t.doppler_idx, f);
        return h;
    }

    // Sparse entries of the effective DD channel: row (Doppler a, delay m) receives from column
    // ((a - k) mod N, (m - l) mod M).
    template <typename Visit>
    void for_each_dd_entry(const DDTap &t, const OtfsFrameConfig &f, Visit &&visit)
    {
        const int m_bins = f.delay_bins;
        const int n_bins = f.doppler_bins;
        const int mn = f.mn();
        for (int a = 0; a < n_bins; ++a)
            for (int m = 0; m < m_bins; ++m)
            {
                const int ms = mod(m - t.delay_idx, m_bins);
                double phase = two_pi * mod(static_cast<long long>(t.doppler_idx) * ms, mn) / mn;
                if (f.cp_mode == CpMode::frame && m < t.delay_idx)
                    phase -= two_pi * a / n_bins;
                visit(m + a * m_bins, ms + mod(a - t.doppler_idx, n_bins) * m_bins, t.gain * expj(phase));
            }
    }

    using SparseCMat = Eigen::SparseMatrix<cplx>;

    inline SparseCMat dd_shift_operator(int delay_idx, int doppler_idx, const OtfsFrameConfig &f)
    {
        std::vector<Eigen::Triplet<cplx>> trip;
        trip.reserve(static_cast<size_t>(f.mn()));
        for_each_dd_entry(DDTap{1.0, delay_idx, doppler_idx}, f,
                          [&](int r, int c, cplx v) { trip.emplace_back(r, c, v); });
        SparseCMat t(f.mn(), f.mn());
        t.setFromTriplets(trip.begin(), trip.end());
        return t;
    }

    struct EffectiveChannel
    {
        std::vector<DDTap> taps;
        SparseCMat sparse;
        std::optional<CMat> dense;
        int n_paths = 0;
    };

    inline CMat dense_effective(std::span<const DDTap> taps, const OtfsFrameConfig &f)
    {
        const CMat fn = dft_matrix(f.doppler_bins);
        const CMat im = CMat::Identity(f.delay_bins, f.delay_bins);
        const CMat fwd = Eigen::kroneckerProduct(fn, im);
        const CMat inv = Eigen::kroneckerProduct(CMat(fn.adjoint()), im);
        CMat h = CMat::Zero(f.mn(), f.mn());
        for (const auto &t : taps)
            h += t.gain * (fwd * delay_permutation(t.delay_idx, f) * inv) *
                 (fwd * doppler_diagonal(t.doppler_idx, f) * inv);
        return h;
    }

    inline EffectiveChannel effective_dd_channel(std::span<const DDTap> taps, const OtfsFrameConfig &f,
                                                 bool with_dense = false)
    {
        check_taps(taps, f);
        EffectiveChannel e;
        e.taps.assign(taps.begin(), taps.end());
        e.n_paths = static_cast<int>(taps.size());
        std::vector<Eigen::Triplet<cplx>> trip;
        trip.reserve(taps.size() * static_cast<size_t>(f.mn()));
        for (const auto &t : taps)
            for_each_dd_entry(t, f, [&](int r, int c, cplx v) { trip.emplace_back(r, c, v); });
        e.sparse.resize(f.mn(), f.mn());
        e.sparse.setFromTriplets(trip.begin(), trip.end());
        if (with_dense)
            e.dense = dense_effective(taps, f);
        return e;
    }

    // Y_DD of a noiseless frame passed through the taps, without forming any matrix.
    inline DDGrid apply_dd_channel(std::span<const DDTap> taps, const DDGrid &x, const OtfsFrameConfig &f)
    {
        check_grid(x, f);
        check_taps(taps, f);
        DDGrid y = DDGrid::Zero(f.delay_bins, f.doppler_bins);
        for (const auto &t : taps)
            for_each_dd_entry(t, f, [&](int r, int c, cplx v)
                              { y(r % f.delay_bins, r / f.delay_bins) += v * x(c % f.delay_bins, c / f.delay_bins); });
        return y;
    }
} // namespace dpmimo::otfs

#endif
