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


#include "catch_amalgamated.hpp"

#include "dpmimo/otfs.hpp"

using namespace dpmimo;
using namespace dpmimo::otfs;
using Catch::Matchers::WithinAbs;

namespace
{
    OtfsFrameConfig frame(int m, int n, int cp = 0, CpMode mode = CpMode::per_block)
    {
        OtfsFrameConfig f;
        f.delay_bins = m;
        f.doppler_bins = n;
        f.cp_length = cp;
        f.cp_mode = mode;
        return f;
    }

    // Direct double sum: X_TF(p, q) = sum_{m,a} X(m, a) e^{-j2pi pm/M} e^{+j2pi qa/N} / sqrt(MN).
    CMat isfft_direct(const CMat &x)
    {
        const auto m_n = x.rows();
        const auto n_n = x.cols();
        CMat y = CMat::Zero(m_n, n_n);
        for (Eigen::Index p = 0; p < m_n; ++p)
            for (Eigen::Index q = 0; q < n_n; ++q)
                for (Eigen::Index m = 0; m < m_n; ++m)
                    for (Eigen::Index a = 0; a < n_n; ++a)
                        y(p, q) += x(m, a) * expj(-two_pi * static_cast<double>(p * m) / static_cast<double>(m_n) +
                                                  two_pi * static_cast<double>(q * a) / static_cast<double>(n_n));
        return y / std::sqrt(static_cast<double>(m_n * n_n));
    }

    CMat sfft_direct(const CMat &y)
    {
        const auto m_n = y.rows();
        const auto n_n = y.cols();
        CMat x = CMat::Zero(m_n, n_n);
        for (Eigen::Index m = 0; m < m_n; ++m)
            for (Eigen::Index a = 0; a < n_n; ++a)
                for (Eigen::Index p = 0; p < m_n; ++p)
                    for (Eigen::Index q = 0; q < n_n; ++q)
                        x(m, a) += y(p, q) * expj(two_pi * static_cast<double>(p * m) / static_cast<double>(m_n) -
                                                  two_pi * static_cast<double>(q * a) / static_cast<double>(n_n));
        return x / std::sqrt(static_cast<double>(m_n * n_n));
    }

    // Sample-domain reference: Doppler rotation on the payload, CP insertion, linear convolution,
    // CP removal and demodulation, without any channel matrix.
    CMat sample_domain(const CMat &x_dd, std::span<const DDTap> taps, const OtfsFrameConfig &f)
    {
        const int mn = f.mn();
        const CVec payload = heisenberg(isfft(x_dd)).reshaped();
        CVec r = CVec::Zero(f.frame_length());
        for (const auto &t : taps)
        {
            CVec rotated(mn);
            for (int i = 0; i < mn; ++i)
                rotated(i) = payload(i) * expj(two_pi * static_cast<double>(t.doppler_idx) * i / mn);
            const CVec s = add_cp(rotated.reshaped(f.delay_bins, f.doppler_bins), f.cp_length, f.cp_mode);
            for (Eigen::Index n = t.delay_idx; n < s.size(); ++n)
                r(n) += t.gain * s(n - t.delay_idx);
        }
        return demodulate(r, f);
    }

    std::vector<DDTap> random_taps(Rng &rng, int count, const OtfsFrameConfig &f, int max_delay)
    {
        std::vector<DDTap> taps;
        while (static_cast<int>(taps.size()) < count)
        {
            DDTap t;
            t.gain = complex_normal(rng);
            t.delay_idx = static_cast<int>(rng() % static_cast<std::uint64_t>(max_delay + 1));
            t.doppler_idx = static_cast<int>(rng() % static_cast<std::uint64_t>(f.doppler_bins)) - f.doppler_bins / 2;
            const bool dup = std::any_of(taps.begin(), taps.end(), [&](const DDTap &o)
                                         { return o.delay_idx == t.delay_idx && mod(o.doppler_idx - t.doppler_idx, f.doppler_bins) == 0; });
            if (!dup)
                taps.push_back(t);
        }
        return taps;
    }

    double max_abs(const CMat &m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
} // namespace

TEST_CASE("ISFFT and SFFT against direct sums", "[otfs][transform]")
{
    Rng rng(1);
    CHECK(max_abs(isfft(CMat::Zero(8, 4))) == 0.0);
    CHECK(max_abs(sfft(CMat::Zero(8, 4))) == 0.0);

    CMat delta = CMat::Zero(8, 4);
    delta(0, 0) = 1.0;
    CHECK(max_abs(isfft(delta).array() - 1.0 / std::sqrt(32.0)) < 1e-15);

    const CMat x = complex_normal_matrix(rng, 8, 4);
    CHECK(max_abs(isfft(x) - isfft_direct(x)) < 1e-10);
    CHECK(max_abs(sfft(x) - sfft_direct(x)) < 1e-10);
    CHECK_THAT(isfft(x).norm(), WithinAbs(x.norm(), 1e-12));

    const CMat y = complex_normal_matrix(rng, 16, 8);
    CHECK(max_abs(sfft(isfft(y)) - y) < 1e-12);
    CHECK(max_abs(isfft(sfft(y)) - y) < 1e-12);
}

TEST_CASE("Heisenberg transform with a rectangular pulse", "[otfs][transform]")
{
    Rng rng(2);
    const CMat x = complex_normal_matrix(rng, 8, 4);
    CHECK(max_abs(heisenberg(isfft(x)) - x * dft_matrix(4).adjoint()) < 1e-12);
    CHECK(max_abs(heisenberg(CMat::Zero(8, 4))) == 0.0);
    CHECK_THROWS_WITH(heisenberg(x, Pulse::raised_cosine), "unsupported pulse");
}

TEST_CASE("Cyclic prefix insertion and removal", "[otfs][cp]")
{
    Rng rng(3);
    const CMat x = complex_normal_matrix(rng, 4, 3);

    const CVec v0 = add_cp(x, 0);
    CHECK(max_abs(v0 - x.reshaped()) == 0.0);
    CHECK(max_abs(remove_cp(v0, 4, 3, 0) - x) == 0.0);

    const CVec v = add_cp(x, 2);
    REQUIRE(v.size() == 18);
    for (int c = 0; c < 3; ++c)
    {
        CHECK(v(c * 6 + 0) == x(2, c));
        CHECK(v(c * 6 + 1) == x(3, c));
    }
    CHECK(max_abs(remove_cp(v, 4, 3, 2) - x) == 0.0);

    const CVec w = add_cp(x, 3, CpMode::frame);
    REQUIRE(w.size() == 15);
    CHECK(max_abs(w.head(3) - x.reshaped().tail(3)) == 0.0);
    CHECK(max_abs(remove_cp(w, 4, 3, 3, CpMode::frame) - x) == 0.0);

    CHECK_THROWS(remove_cp(v.head(17), 4, 3, 2));
    CHECK_THROWS(remove_cp(w, 4, 3, 2, CpMode::frame));
    CHECK_THROWS(add_cp(x, -1));
    CHECK_THROWS(wigner_receive(v.head(10), frame(4, 3, 2)));
}

TEST_CASE("Modem loopback is the identity", "[otfs][loopback]")
{
    Rng rng(4);
    for (auto [m, n] : {std::pair{8, 4}, std::pair{16, 8}, std::pair{128, 16}})
        for (CpMode mode : {CpMode::per_block, CpMode::frame})
        {
            const auto f = frame(m, n, 3, mode);
            const CMat x = complex_normal_matrix(rng, m, n);
            CHECK(max_abs(demodulate(modulate(x, f), f) - x) < 1e-10);
            CHECK(max_abs(wigner_receive(modulate(x, f), f) - isfft(x)) < 1e-10);
        }
    const auto f = frame(8, 4, 1);
    CHECK(max_abs(demodulate(CVec::Zero(f.frame_length()), f)) == 0.0);

    const CMat x = complex_normal_matrix(rng, 8, 4);
    const std::vector<DDTap> unit{DDTap{}};
    CHECK(max_abs(sample_domain(x, unit, f) - x) < 1e-10);
}

TEST_CASE("Time-domain channel matrix", "[otfs][channel]")
{
    const auto f = frame(4, 2, 1, CpMode::frame);
    const std::vector<DDTap> unit{DDTap{}};
    CHECK(max_abs(time_channel_matrix(unit, f) - CMat::Identity(8, 8)) == 0.0);

    const std::vector<DDTap> shift{DDTap{1.0, 1, 0}};
    const CMat p = time_channel_matrix(shift, f);
    CMat expect = CMat::Zero(8, 8);
    for (int i = 1; i < 8; ++i)
        expect(i, i - 1) = 1.0;
    expect(0, 7) = 1.0;
    CHECK(max_abs(p - expect) == 0.0);

    CMat pp = CMat::Identity(8, 8);
    for (int i = 0; i < 8; ++i)
        pp = delay_permutation(1, f) * pp;
    CHECK(max_abs(pp - CMat::Identity(8, 8)) == 0.0);
    const CMat dd = doppler_diagonal(3, f);
    CHECK(max_abs(dd * dd.adjoint() - CMat::Identity(8, 8)) < 1e-14);

    const std::vector<DDTap> too_long{DDTap{1.0, 2, 0}};
    CHECK_THROWS_WITH(time_channel_matrix(too_long, f), "CP too short");
}

TEST_CASE("Time-domain channel matrix against sample-domain propagation", "[otfs][channel]")
{
    Rng rng(5);
    for (CpMode mode : {CpMode::per_block, CpMode::frame})
    {
        const auto f = frame(8, 4, 3, mode);
        const auto taps = random_taps(rng, 2, f, 3);
        const CMat x_t = complex_normal_matrix(rng, 8, 4);
        CVec r = CVec::Zero(f.frame_length());
        for (const auto &t : taps)
        {
            CVec rotated(32);
            for (int i = 0; i < 32; ++i)
                rotated(i) = x_t.reshaped()(i) * expj(two_pi * t.doppler_idx * i / 32.0);
            const CVec s = add_cp(rotated.reshaped(8, 4), 3, mode);
            for (Eigen::Index n = t.delay_idx; n < s.size(); ++n)
                r(n) += t.gain * s(n - t.delay_idx);
        }
        const CVec got = remove_cp(r, 8, 4, 3, mode).reshaped();
        CHECK(max_abs(got - time_channel_matrix(taps, f) * x_t.reshaped()) < 1e-10);
    }
}

TEST_CASE("Effective DD channel", "[otfs][channel]")
{
    Rng rng(6);
    const auto f = frame(8, 4, 3);
    const std::vector<DDTap> unit{DDTap{}};
    const auto id = effective_dd_channel(unit, f, true);
    CHECK(max_abs(*id.dense - CMat::Identity(32, 32)) < 1e-12);
    CHECK(max_abs(CMat(id.sparse) - CMat::Identity(32, 32)) == 0.0);

    for (CpMode mode : {CpMode::per_block, CpMode::frame})
        for (int l = 1; l <= 4; ++l)
        {
            auto fm = f;
            fm.cp_mode = mode;
            const auto taps = random_taps(rng, l, fm, 3);
            const auto e = effective_dd_channel(taps, fm, true);
            CHECK(e.n_paths == l);
            const CMat &d = *e.dense;
            CHECK(max_abs(d - CMat(e.sparse)) < 1e-12);
            const auto nz = (d.cwiseAbs().array() > 1e-9).cast<int>();
            CHECK(nz.rowwise().sum().minCoeff() == l);
            CHECK(nz.rowwise().sum().maxCoeff() == l);
            CHECK(nz.colwise().sum().minCoeff() == l);
            CHECK(nz.colwise().sum().maxCoeff() == l);

            const CMat x = complex_normal_matrix(rng, 8, 4);
            CHECK(max_abs(apply_dd_channel(taps, x, fm).reshaped() - d * x.reshaped()) < 1e-12);
        }
}

TEST_CASE("DD channel equals the sample-domain pipeline", "[otfs][channel]")
{
    Rng rng(7);
    for (CpMode mode : {CpMode::per_block, CpMode::frame})
    {
        const auto f = frame(8, 4, 3, mode);
        double worst = 0.0;
        for (int frame_idx = 0; frame_idx < 50; ++frame_idx)
        {
            const auto taps = random_taps(rng, 3, f, 3);
            const CMat x = complex_normal_matrix(rng, 8, 4);
            const CVec expect = effective_dd_channel(taps, f).sparse * x.reshaped();
            const CVec got = sample_domain(x, taps, f).reshaped();
            worst = std::max(worst, (got - expect).norm() / expect.norm());
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("Unitary DD transforms keep white noise white", "[otfs][noise]")
{
    const CMat fn = dft_matrix(4);
    const CMat w = Eigen::kroneckerProduct(CMat(fn.adjoint()), CMat::Identity(8, 8)).eval();
    CHECK(max_abs(w * w.adjoint() - CMat::Identity(32, 32)) < 1e-14);
}

TEST_CASE("Frame configuration checks", "[otfs][config]")
{
    OtfsFrameConfig f;
    CHECK(f.mn() == 2048);
    CHECK_THAT(f.delay_resolution(), WithinAbs(1.0 / 20e6, 1e-18));
    CHECK(default_cp_length(std::vector<DDTap>{DDTap{1.0, 3, 0}, DDTap{1.0, 1, 2}}) == 4);
    f.delay_bins = 0;
    CHECK_THROWS(f.validate());
    CHECK_THROWS(check_grid(CMat::Zero(3, 3), frame(8, 4)));
}
