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

#include "dpmimo/estimation.hpp"

#include <set>

using namespace dpmimo;
using namespace dpmimo::est;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
    otfs::OtfsFrameConfig frame(int m, int n)
    {
        otfs::OtfsFrameConfig f;
        f.delay_bins = m;
        f.doppler_bins = n;
        return f;
    }

    struct Instance
    {
        Dictionary d;
        CVec h;
        std::vector<int> grid_support;
    };

    Instance make_instance(Rng &rng, int m, int n, int paths, double xpr_db, int antennas = 1)
    {
        const auto f = frame(m, n);
        const auto grid = make_grid(std::min(4, m), std::min(2, (n - 1) / 2));
        const CMat p = orthogonal_pilots(rng, f.mn(), 2);
        Instance in;
        in.d = build_dictionary(p.col(0), p.col(1), grid, CMat::Identity(antennas, antennas),
                                Eigen::Matrix2d::Ones(), f);
        in.h = random_sparse_channel(rng, in.d, paths, db_to_linear(xpr_db), &in.grid_support);
        return in;
    }

    std::set<int> nonzero(const CVec &h)
    {
        std::set<int> s;
        for (Eigen::Index i = 0; i < h.size(); ++i)
            if (h(i) != 0.0)
                s.insert(static_cast<int>(i));
        return s;
    }

    bool contains(const std::vector<int> &support, const std::set<int> &needed)
    {
        return std::all_of(needed.begin(), needed.end(), [&](int c)
                           { return std::binary_search(support.begin(), support.end(), c); });
    }
} // namespace

TEST_CASE("Dictionary from identity shift and identity correlation", "[est][dictionary]")
{
    Rng rng(1);
    const auto f = frame(4, 2);
    const CMat p = orthogonal_pilots(rng, 8, 2);
    const std::vector<GridPoint> grid{{0, 0}};
    const auto d = build_dictionary(p.col(0), p.col(1), grid, CMat::Identity(1, 1), Eigen::Matrix2d::Ones(), f);
    REQUIRE(d.phi.rows() == 16);
    REQUIRE(d.phi.cols() == 4);
    const CVec z = CVec::Zero(8);
    auto stacked = [](const CVec &a, const CVec &b)
    {
        CVec v(a.size() + b.size());
        v << a, b;
        return v;
    };
    CHECK((d.phi.col(d.column(pair_index(Pol::V, Pol::V), 0, 0)) - stacked(p.col(0), z)).norm() < 1e-15);
    CHECK((d.phi.col(d.column(pair_index(Pol::H, Pol::H), 0, 0)) - stacked(z, p.col(1))).norm() < 1e-15);
    CHECK((d.phi.col(d.column(pair_index(Pol::V, Pol::H), 0, 0)) - stacked(p.col(1), z)).norm() < 1e-15);
    CHECK((d.phi.col(d.column(pair_index(Pol::H, Pol::V), 0, 0)) - stacked(z, p.col(0))).norm() < 1e-15);
    CHECK(d.atoms.size() == 4);
}

TEST_CASE("Orthogonal pilots give a block-diagonal Gram matrix", "[est][dictionary]")
{
    Rng rng(2);
    const CMat p = orthogonal_pilots(rng, 32, 4);
    CHECK((p.adjoint() * p - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS(orthogonal_pilots(rng, 3, 4));

    const auto f = frame(8, 4);
    const std::vector<GridPoint> grid{{0, 0}};
    const CMat q = orthogonal_pilots(rng, 32, 2);
    const auto d = build_dictionary(q.col(0), q.col(1), grid, CMat::Identity(1, 1), Eigen::Matrix2d::Ones(), f);
    const CMat g = d.phi.adjoint() * d.phi;
    CHECK((g - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Dictionary correlation computed factor by factor", "[est][dictionary]")
{
    Rng rng(3);
    const auto f = frame(4, 4);
    const auto grid = make_grid(2, 1);
    const CMat p = orthogonal_pilots(rng, 16, 2);
    const CMat a = complex_normal_matrix(rng, 3, 3);
    const CMat r = a * a.adjoint() + 0.1 * CMat::Identity(3, 3);
    Eigen::Matrix2d eta;
    eta << 1.0, 0.5, 0.25, 0.8;
    const auto d = build_dictionary(p.col(0), p.col(1), grid, r, eta, f);
    CHECK(d.phi.cols() == 4 * 3 * static_cast<Eigen::Index>(grid.size()));
    CHECK((d.spatial_root * d.spatial_root - r).norm() < 1e-10);

    const CVec y = complex_normal_vector(rng, d.phi.rows());
    const CVec fast = d.phi.adjoint() * y;
    for (int b = 0; b < 4; ++b)
    {
        const PolPair pp = pair_order[static_cast<size_t>(b)];
        const CVec &psi = pp.tx == Pol::V ? CVec(p.col(0)) : CVec(p.col(1));
        for (size_t g = 0; g < grid.size(); ++g)
        {
            const CVec shifted =
                std::sqrt(eta(index(pp.rx), index(pp.tx))) * (otfs::dd_shift_operator(grid[g].delay_idx, grid[g].doppler_idx, [&] {
                    auto ff = f;
                    ff.cp_length = f.delay_bins - 1;
                    return ff;
                }()) * psi);
            for (int ant = 0; ant < 3; ++ant)
            {
                cplx acc = 0.0;
                const CVec col = d.spatial_root.col(ant);
                for (int i = 0; i < 16; ++i)
                    acc += std::conj(shifted(i)) *
                           col.dot(y.segment(index(pp.rx) * d.view_rows + i * 3, 3));
                CHECK(std::abs(acc - fast(d.column(b, static_cast<int>(g), ant))) < 1e-10);
            }
        }
    }

    CMat bad = CMat::Identity(3, 3);
    bad(2, 2) = -1.0;
    CHECK_THROWS(build_dictionary(p.col(0), p.col(1), grid, bad, eta, f));
}

TEST_CASE("Observation model", "[est][observe]")
{
    Rng rng(4);
    auto in = make_instance(rng, 8, 4, 2, 8.0);
    CHECK(observe(CVec::Zero(in.d.phi.cols()), in.d, 0.0, rng).norm() == 0.0);

    CVec one = CVec::Zero(in.d.phi.cols());
    one(5) = cplx(0.3, -1.2);
    CHECK((observe(one, in.d, 0.0, rng) - one(5) * in.d.phi.col(5)).norm() < 1e-14);

    double ratio = 0.0;
    for (int i = 0; i < 1000; ++i)
    {
        const CVec clean = in.d.phi * in.h;
        const double nz = noise_power_for_snr(clean, 20.0);
        ratio += (observe(in.h, in.d, nz, rng) - clean).squaredNorm() / clean.squaredNorm();
    }
    CHECK_THAT(ratio / 1000, WithinRel(0.01, 0.03));
}

TEST_CASE("PASCE recovers a single atom", "[est][pasce]")
{
    Rng rng(5);
    auto in = make_instance(rng, 8, 4, 1, 8.0);
    for (int c : {0, 7, 33})
    {
        const CVec y = in.d.phi.col(c);
        PasceParams p;
        p.sparsity = 1;
        p.epsilon = 1e-12;
        const auto e = pasce(y, in.d, p);
        CHECK(std::binary_search(e.support.begin(), e.support.end(), c));
        CHECK((y - in.d.phi * e.h_s).norm() < 1e-10 * y.norm());
    }
}

TEST_CASE("Noiseless sparse recovery with an incoherent dictionary", "[est][pasce][omp]")
{
    int exact = 0;
    for (int seed = 0; seed < 100; ++seed)
    {
        Rng rng(derive_seed(6, 0, static_cast<std::uint64_t>(seed)));
        auto in = make_instance(rng, 16, 8, 3, 8.0);
        if (seed == 0)
            CHECK(coherence(in.d.phi) < 0.3);
        const CVec y = in.d.phi * in.h;
        PasceParams p;
        p.epsilon = 1e-9;
        const auto e = pasce(y, in.d, p);
        const auto o = omp_baseline(y, in.d, 16, 1e-9);
        const bool ok = contains(e.support, nonzero(in.h)) && nmse(e.h_s, in.h) < 1e-6 && nmse(o.h_s, in.h) < 1e-6;
        exact += ok;

        for (size_t i = 1; i < e.residual_history.size(); ++i)
            CHECK(e.residual_history[i] <= e.residual_history[i - 1] + 1e-9);
        for (size_t i = 1; i < e.step_history.size(); ++i)
            CHECK(e.step_history[i] <= e.step_history[i - 1]);
        for (int s : e.step_history)
            CHECK(s >= 1);
    }
    CHECK(exact == 100);
}

TEST_CASE("PASCE inner-product count is twice that of OMP per iteration", "[est][pasce]")
{
    Rng rng(7);
    auto in = make_instance(rng, 8, 4, 4, 8.0);
    const CVec y = in.d.phi * in.h;
    PasceParams p;
    p.epsilon = 1e-9;
    const auto e = pasce(y, in.d, p);
    const auto o = omp_baseline(y, in.d, 16, 1e-9);
    CHECK(o.inner_products == o.iterations * in.d.phi.cols());
    const double ratio = (static_cast<double>(e.inner_products) / e.iterations) /
                         (static_cast<double>(o.inner_products) / o.iterations);
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 2.5);
}

TEST_CASE("PASCE support contains every per-polarization top atom", "[est][pasce]")
{
    Rng rng(8);
    auto in = make_instance(rng, 8, 4, 3, 8.0);
    const CVec y = in.d.phi * in.h + complex_normal_vector(rng, in.d.phi.rows(), 1e-4);
    PasceParams p;
    p.sparsity = 2;
    p.max_iter = 1;
    const auto e = pasce(y, in.d, p);
    for (Pol pol : {Pol::V, Pol::H})
    {
        CVec view = CVec::Zero(y.size());
        view.segment(index(pol) * in.d.view_rows, in.d.view_rows) =
            y.segment(index(pol) * in.d.view_rows, in.d.view_rows);
        for (int c : top_indices((in.d.phi.adjoint() * view).cwiseAbs(), 2))
            CHECK(std::binary_search(e.support.begin(), e.support.end(), c));
    }
}

TEST_CASE("Unregularized PASCE on a rank-deficient support", "[est][pasce]")
{
    Rng rng(9);
    const auto f = frame(8, 4);
    const CMat p = orthogonal_pilots(rng, 32, 1);
    const auto grid = make_grid(2, 1);
    // Identical pilots on both ports make co- and cross-polar atoms coincide.
    const auto d = build_dictionary(p.col(0), p.col(0), grid, CMat::Identity(1, 1), Eigen::Matrix2d::Ones(), f);
    const CVec y = d.phi.col(0);
    PasceParams params;
    CHECK_THROWS_WITH(pasce(y, d, params), "regularization required");
    params.reg = 1e-3;
    CHECK_NOTHROW(pasce(y, d, params));
}

TEST_CASE("Estimator ordering at 20 dB with four paths", "[est][benchmark]")
{
    double a = 0.0, b = 0.0, c = 0.0;
    for (int seed = 0; seed < 100; ++seed)
    {
        Rng rng(derive_seed(10, 0, static_cast<std::uint64_t>(seed)));
        auto in = make_instance(rng, 8, 4, 4, 8.0);
        const CVec clean = in.d.phi * in.h;
        const double nz = noise_power_for_snr(clean, 20.0);
        const CVec y = observe(in.h, in.d, nz, rng);
        const double floor = std::sqrt(static_cast<double>(y.size()) * nz);
        PasceParams p;
        p.reg = nz;
        p.residual_floor = floor;
        a += nmse(pasce(y, in.d, p).h_s, in.h);
        b += nmse(omp_baseline(y, in.d, 16, p.epsilon, floor).h_s, in.h);
        c += nmse(sfs_baseline(y, in.d, 0.75).h_s, in.h);
    }
    CHECK(a <= b);
    CHECK(b <= c);
}

TEST_CASE("OMP and SFS baselines", "[est][baselines]")
{
    Rng rng(11);
    auto in = make_instance(rng, 8, 4, 2, 8.0);
    const CVec y1 = 2.0 * in.d.phi.col(9);
    const auto o = omp_baseline(y1, in.d, 1, 1e-9);
    CHECK(o.support == std::vector<int>{9});
    CHECK(std::abs(o.h_s(9) - 2.0) < 1e-12);
    CHECK_THROWS(omp_baseline(y1, in.d, 0));

    const CVec y = in.d.phi * in.h;
    const auto all = sfs_baseline(y, in.d, 0.0);
    CHECK(all.support.size() == static_cast<size_t>(in.d.phi.cols()));
    CHECK(nmse(all.h_s, in.h) < 1e-12);

    const CVec strong = 10.0 * in.d.phi.col(17) + complex_normal_vector(rng, y.size(), 1e-4);
    const auto top = sfs_baseline(strong, in.d, 0.99);
    CHECK(std::binary_search(top.support.begin(), top.support.end(), 17));
    CHECK(std::abs(top.h_s(17) - 10.0) < 0.05);

    CHECK_THROWS_WITH(sfs_baseline(CVec::Zero(y.size()), in.d, 0.5), "over-suppression");
    CHECK_THROWS(sfs_baseline(y, in.d, 1.0));
}

TEST_CASE("Estimate and error covariances", "[est][covariance]")
{
    const double p = 0.7, s2 = 0.3;
    const int tau = 4, k = 3;
    const std::vector<CMat> eye(static_cast<size_t>(k), CMat::Identity(5, 5));
    const auto cov = estimate_covariances(eye, p, tau, s2);
    const double g = p * tau / (k * p * tau + s2);
    for (const auto &c : cov)
    {
        CHECK((c.gamma - g * CMat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((c.c_err - (1.0 - g) * CMat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
    }

    Rng rng(12);
    const CMat a = complex_normal_matrix(rng, 4, 4);
    const CMat r = a * a.adjoint() + 0.5 * CMat::Identity(4, 4);
    const std::vector<CMat> one{r};
    const auto lim = estimate_covariances(one, 1.0, 1, 1e-12);
    CHECK((lim[0].gamma - r).norm() < 1e-9 * r.norm());
    CHECK(lim[0].c_err.norm() < 1e-9 * r.norm());

    const auto none = estimate_covariances(one, 0.0, 1, 1.0);
    CHECK(none[0].gamma.norm() == 0.0);
    CHECK((none[0].c_err - r).norm() < 1e-15);

    for (int i = 0; i < 20; ++i)
    {
        const CMat b = complex_normal_matrix(rng, 4, 2);
        std::vector<CMat> rs{b * b.adjoint(), CMat(complex_normal_matrix(rng, 4, 4) * complex_normal_matrix(rng, 4, 4).adjoint())};
        rs[1] = rs[1] * rs[1].adjoint();
        for (const auto &c : estimate_covariances(rs, 1.0, 2, 0.1))
        {
            CHECK((c.c_err - c.c_err.adjoint()).norm() < 1e-12);
            Eigen::SelfAdjointEigenSolver<CMat> es(c.c_err);
            CHECK(es.eigenvalues().minCoeff() > -1e-10);
        }
    }

    const std::vector<CMat> zero{CMat::Zero(3, 3)};
    CHECK_THROWS(estimate_covariances(zero, 1.0, 1, 0.0));
}

TEST_CASE("NMSE", "[est][nmse]")
{
    Rng rng(13);
    const CVec h = complex_normal_vector(rng, 10);
    CHECK(nmse(h, h) == 0.0);
    CHECK_THAT(nmse(CVec::Zero(10), h), WithinAbs(1.0, 1e-15));
    CHECK_THAT(nmse(1.05 * h, h), WithinRel(0.0025, 1e-10));
    CHECK_THROWS(nmse(h, CVec::Zero(10)));
    CHECK_THROWS(nmse(h.head(3), h));
}
