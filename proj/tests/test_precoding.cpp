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

#include "dpmimo/precoding.hpp"

#include <array>

using namespace dpmimo;
using namespace dpmimo::precoding;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
    std::vector<Realization> rayleigh_ensemble(Rng &rng, int n, int ma, int k, double err_var = 0.0)
    {
        std::vector<Realization> out;
        out.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
        {
            Realization r;
            r.h_true = complex_normal_matrix(rng, ma, 2 * k);
            r.h_est = r.h_true;
            if (err_var > 0.0)
                r.h_est += complex_normal_matrix(rng, ma, 2 * k, err_var);
            out.push_back(std::move(r));
        }
        return out;
    }

    // Exhaustive joint detection over all QPSK hypotheses.
    CVec ml_detect(const CVec &y, const CMat &h, const RVec &p)
    {
        const auto pts = Constellation::qpsk().points;
        const int ns = static_cast<int>(h.cols());
        int total = 1;
        for (int s = 0; s < ns; ++s)
            total *= 4;
        CVec best(ns), x(ns);
        double dmin = std::numeric_limits<double>::infinity();
        for (int c = 0; c < total; ++c)
        {
            int code = c;
            for (int s = 0; s < ns; ++s)
            {
                x(s) = std::sqrt(p(s)) * pts[static_cast<size_t>(code % 4)];
                code /= 4;
            }
            const double d = (y - h * x).squaredNorm();
            if (d < dmin)
            {
                dmin = d;
                best = x.cwiseQuotient(p.cwiseSqrt().cast<cplx>());
            }
        }
        return best;
    }

    StreamStatistics scaled_identity(int ma, double r, double g, double c)
    {
        return {r * CMat::Identity(ma, ma), g * CMat::Identity(ma, ma), c * CMat::Identity(ma, ma)};
    }
} // namespace

TEST_CASE("MMSE combiner reductions", "[precoding]")
{
    const double p = 2.0, sigma2 = 0.5;
    const cplx h(0.7, -1.1);
    CMat hm(1, 2);
    hm << h, 0.0;
    PowerAllocation pw{RVec(2), RVec::Constant(2, p), sigma2, sigma2};
    pw.ul << p, 0.0;
    const auto v = mmse_combiner(hm, pw);
    CHECK(std::abs(v.vectors(0, 0) - h / (p * std::norm(h) + sigma2)) < 1e-14);

    Rng rng(3);
    const CMat hr = complex_normal_matrix(rng, 4, 4);
    const auto big = mmse_combiner(hr, PowerAllocation::equal(2, 1.0, 1e9));
    for (int s = 0; s < 4; ++s)
    {
        const CVec d = big.vectors.col(s) * 1e9;
        CHECK((d - hr.col(s)).norm() / hr.col(s).norm() < 1e-6);
    }

    const auto pw2 = PowerAllocation::equal(2, 1.5, 0.3);
    const auto sol = mmse_combiner(hr, pw2);
    CMat r = 1.5 * hr * hr.adjoint();
    r.diagonal().array() += 0.3;
    const CMat oracle = r.inverse() * hr;
    CHECK((sol.vectors - oracle).norm() / oracle.norm() < 1e-10);

    CMat bad(3, 3);
    CHECK_THROWS_AS(mmse_combiner(bad, pw2), std::invalid_argument);
}

TEST_CASE("MR precoder normalization", "[precoding]")
{
    Rng rng(5);
    const CMat h1 = complex_normal_matrix(rng, 6, 2);
    const auto pw = PowerAllocation::equal(1, 2.0, 1.0);
    const auto w = mr_precoder(h1, pw);
    for (int s = 0; s < 2; ++s)
    {
        CHECK_THAT(w.normalization(s), WithinRel(std::sqrt(2.0 / h1.col(s).squaredNorm()), 1e-14));
        CHECK_THAT(w.vectors.col(s).norm(), WithinRel(std::sqrt(2.0), 1e-12));
    }

    const CMat gam = 0.8 * CMat::Identity(4, 4);
    const std::vector<CMat> gammas(4, gam);
    const auto w2 = mr_precoder(complex_normal_matrix(rng, 4, 4), PowerAllocation::equal(2, 1.0, 1.0), gammas);
    for (int s = 1; s < 4; ++s)
        CHECK_THAT(w2.normalization(s), WithinRel(w2.normalization(0), 1e-15));

    // trace(Gamma) against a sample average of |h|^2
    const CMat a = complex_normal_matrix(rng, 4, 4);
    const CMat g = a * a.adjoint() / 4.0;
    const Eigen::LLT<CMat> llt(g);
    double acc = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        acc += (llt.matrixL() * complex_normal_vector(rng, 4)).squaredNorm();
    CHECK_THAT(acc / n, WithinRel(g.trace().real(), 0.02));

    CHECK_THROWS_AS(mr_precoder(CMat::Zero(4, 2), pw), std::domain_error);
    CHECK_THROWS_AS(mr_precoder(h1, pw, std::vector<CMat>(3, gam)), std::invalid_argument);
}

TEST_CASE("ZF precoder nulls crosstalk", "[precoding]")
{
    Rng rng(8);
    const CMat h = complex_normal_matrix(rng, 4, 4);
    const auto pw = PowerAllocation::equal(2, 1.0, 1.0);
    const auto w = zf_precoder(h, pw);
    for (int s = 0; s < 4; ++s)
        for (int t = 0; t < 4; ++t)
            if (s != t)
                CHECK(std::abs(h.col(t).dot(w.vectors.col(s))) / w.vectors.col(s).norm() < 1e-8);
    for (int s = 0; s < 4; ++s)
        CHECK_THAT(w.vectors.col(s).norm(), WithinRel(1.0, 1e-12));

    CHECK_THROWS_WITH(zf_precoder(complex_normal_matrix(rng, 3, 4), pw), "ZF infeasible");
    CMat dup = h;
    dup.col(3) = dup.col(1);
    CHECK_THROWS_WITH(zf_precoder(dup, pw), "ZF infeasible");

    // orthogonal columns: ZF points along MR
    CMat q = Eigen::HouseholderQR<CMat>(complex_normal_matrix(rng, 6, 4)).householderQ() * CMat::Identity(6, 4);
    for (int s = 0; s < 4; ++s)
        q.col(s) *= 0.5 + s;
    const auto zf = zf_precoder(q, pw);
    const auto mr = mr_precoder(q, pw);
    for (int s = 0; s < 4; ++s)
    {
        const CVec a = zf.vectors.col(s).normalized();
        const CVec b = mr.vectors.col(s).normalized();
        CHECK(std::abs(std::abs(a.dot(b)) - 1.0) < 1e-12);
    }
}

TEST_CASE("Uplink decomposition degeneracies", "[precoding]")
{
    CMat h = CMat::Zero(4, 2);
    h(0, 0) = {1.0, 0.5};
    h(2, 1) = {-0.3, 0.8};
    std::vector<Realization> ens(50, Realization{h, h});
    Rng rng(1);
    const auto pw = PowerAllocation::equal(1, 1.0, 0.1);
    for (Scheme sc : {Scheme::mmse, Scheme::mr, Scheme::zf})
    {
        const auto rep = uplink_receive(ens, sc, pw, rng);
        for (const auto &b : rep.simulated)
        {
            CHECK(b.est_error < 1e-20);
            CHECK(b.mui == 0.0);
            CHECK(b.xpc < 1e-20);
            CHECK(b.noise > 0.0);
        }
    }
    CHECK_THROWS_AS(uplink_receive({}, Scheme::mr, pw, rng), std::invalid_argument);
}

TEST_CASE("Uplink SINR simulation agrees with the moment formula", "[precoding]")
{
    Rng rng(12);
    const auto ens = rayleigh_ensemble(rng, 40000, 4, 2, 0.05);
    const auto pw = PowerAllocation::equal(2, 1.0, 0.1);
    for (Scheme sc : {Scheme::mmse, Scheme::mr})
    {
        const auto rep = uplink_receive(ens, sc, pw, rng);
        for (size_t s = 0; s < 4; ++s)
        {
            CHECK_THAT(rep.simulated[s].sinr(), WithinRel(rep.formula[s].sinr(), 0.03));
            CHECK_THAT(rep.simulated[s].total(), WithinRel(rep.received_power(static_cast<Eigen::Index>(s)), 0.01));
            const auto &b = rep.simulated[s];
            CHECK(b.desired >= 0.0);
            CHECK(b.est_error >= 0.0);
            CHECK(b.mui >= 0.0);
            CHECK(b.xpc >= 0.0);
        }
    }
}

TEST_CASE("Downlink decomposition", "[precoding]")
{
    CMat h = CMat::Zero(4, 2);
    h(1, 0) = {0.9, 0.2};
    h(3, 1) = {0.1, -1.3};
    std::vector<Realization> one(20, Realization{h, h});
    Rng rng(4);
    const auto pw = PowerAllocation::equal(1, 1.0, 0.1);
    const auto rep = downlink_receive(one, Scheme::mr, pw, rng);
    for (const auto &b : rep.simulated)
    {
        CHECK(b.mui == 0.0);
        CHECK(b.est_error < 1e-20);
        CHECK(b.xpc == 0.0);
    }

    const auto ens = rayleigh_ensemble(rng, 10000, 4, 2);
    const auto pw2 = PowerAllocation::equal(2, 1.0, 0.1);
    const auto zf = downlink_receive(ens, Scheme::zf, pw2, rng);
    for (const auto &b : zf.formula)
        CHECK(b.mui < 1e-12 * b.desired);

    const auto noisy = rayleigh_ensemble(rng, 40000, 4, 2, 0.05);
    for (Scheme sc : {Scheme::mmse, Scheme::mr, Scheme::zf})
    {
        const auto r = downlink_receive(noisy, sc, pw2, rng);
        for (size_t s = 0; s < 4; ++s)
        {
            CHECK_THAT(r.simulated[s].sinr(), WithinRel(r.formula[s].sinr(), 0.03));
            CHECK_THAT(r.simulated[s].total(), WithinRel(r.received_power(static_cast<Eigen::Index>(s)), 0.01));
        }
    }
}

TEST_CASE("Closed-form spectral efficiency", "[precoding]")
{
    const int ma = 8;
    const double a = 1.3, g = 0.9, c = 0.4, sigma2 = 0.2;
    RVec p(4);
    p << 1.0, 0.5, 2.0, 1.5;
    const std::vector<StreamStatistics> st(4, scaled_identity(ma, a, g, c));
    const double pl = prelog(10, 200);
    CHECK_THAT(pl, WithinAbs(0.95, 1e-15));

    const RVec ul = se_uplink_closed(p, st, sigma2, pl);
    const RVec dl = se_downlink_closed(p, st, sigma2, pl);
    for (int u = 0; u < 2; ++u)
    {
        double hu = 0.0, hd = 0.0;
        for (int q = 0; q < 2; ++q)
        {
            const double ps = p(2 * u + q);
            // (1/M) tr(R Gamma R) = a^2 g ; (1/M) tr Gamma = g ; (1/M) tr C = c
            const double iu = ps * 1.0 * a * a * g / ((1.0 + g) * (1.0 + g));
            hu += std::log2(1.0 + ps * g * g / (iu + ps * c + sigma2));
            const double id = ps * 1.0 * a * a * g * ma / (g * ma);
            hd += std::log2(1.0 + ps * g * g / (id + c + sigma2));
        }
        CHECK_THAT(ul(u), WithinAbs(pl * hu, 1e-12));
        CHECK_THAT(dl(u), WithinAbs(pl * hd, 1e-12));
    }

    // perfect CSI, no interference
    const std::vector<StreamStatistics> single(2, scaled_identity(ma, 1.0, g, 0.0));
    const RVec p1 = RVec::Constant(2, 3.0);
    const double ref = pl * 2.0 * std::log2(1.0 + 3.0 * g * g / sigma2);
    CHECK_THAT(se_uplink_closed(p1, single, sigma2, pl)(0), WithinAbs(ref, 1e-12));
    CHECK_THAT(se_downlink_closed(p1, single, sigma2, pl)(0), WithinAbs(ref, 1e-12));

    CHECK(prelog(50, 50) == 0.0);
    CHECK(se_uplink_closed(p, st, sigma2, prelog(50, 50)).isZero());
    CHECK(se_downlink_closed(p, st, sigma2, prelog(50, 50)).isZero());
    CHECK_THROWS_AS(prelog(60, 50), std::invalid_argument);
    CHECK_THROWS_AS(se_uplink_closed(p.head(3), st, sigma2, pl), std::invalid_argument);
}

TEST_CASE("Interference covariance", "[precoding]")
{
    Rng rng(21);
    const CMat h = complex_normal_matrix(rng, 4, 6);
    const std::array<int, 1> single{1};
    const CMat r1 = interference_covariance(h, single, 1, Pol::V, 2.0, 0.3);
    CHECK((r1 - 0.3 * CMat::Identity(4, 4)).norm() < 1e-15);

    const std::array<int, 2> two{0, 2};
    const CMat r2 = interference_covariance(h, two, 0, Pol::H, 1.0, 0.3);
    CHECK((r2 - r2.adjoint()).norm() < 1e-14);
    const Eigen::SelfAdjointEigenSolver<CMat> es(r2);
    CHECK(es.eigenvalues().minCoeff() >= 0.3 - 1e-12);

    const std::array<int, 3> all{0, 1, 2};
    const CMat r3 = interference_covariance(h, all, 2, Pol::V, 1.0, 0.01);
    CHECK(Eigen::LLT<CMat>(r3).info() == Eigen::Success);

    CHECK_THROWS_AS(interference_covariance(h, two, 1, Pol::V, 1.0, 0.3), std::invalid_argument);
}

TEST_CASE("PADIC single-user and orthogonal cases", "[precoding]")
{
    Rng rng(2);
    const auto qpsk = Constellation::qpsk();
    const CMat h = complex_normal_matrix(rng, 4, 2);
    const auto pw = PowerAllocation::equal(1, 1.0, 1e-12);
    for (int trial = 0; trial < 20; ++trial)
    {
        CVec x(2);
        x << qpsk_symbol(rng), qpsk_symbol(rng);
        const CVec y = h * x;
        for (Scheme sc : {Scheme::mmse, Scheme::mr, Scheme::zf})
        {
            const auto d = padic(y, h, pw, sc);
            if (sc != Scheme::mr)
                CHECK((d.symbols - x).norm() < 1e-12);
            if (sc != Scheme::mr)
                CHECK(d.residual.norm() < 1e-10);
            CHECK(d.order == std::vector<int>{0});
        }
    }

    // orthogonal users: decisions are per-stream matched-filter slices regardless of order
    CMat q = Eigen::HouseholderQR<CMat>(complex_normal_matrix(rng, 8, 4)).householderQ() * CMat::Identity(8, 4);
    const auto pw2 = PowerAllocation::equal(2, 1.0, 0.05);
    for (double scale : {0.5, 2.0})
    {
        CMat hs = q;
        hs.col(2) *= scale;
        hs.col(3) *= scale;
        for (int trial = 0; trial < 50; ++trial)
        {
            CVec x(4);
            for (int s = 0; s < 4; ++s)
                x(s) = qpsk_symbol(rng);
            const CVec y = hs * x + complex_normal_vector(rng, 8, 0.05);
            const auto d = padic(y, hs, pw2, Scheme::mmse);
            CHECK(d.order == (scale > 1.0 ? std::vector<int>{1, 0} : std::vector<int>{0, 1}));
            for (int s = 0; s < 4; ++s)
                CHECK(d.symbols(s) == qpsk.slice(hs.col(s).dot(y) / hs.col(s).squaredNorm()));
        }
    }

    CHECK_THROWS_AS(padic(CVec::Zero(3), h, pw, Scheme::mmse), std::invalid_argument);
    CHECK_THROWS_AS(parse_scheme("mmse-sic"), std::invalid_argument);
}

TEST_CASE("PADIC agrees with joint ML detection at 30 dB", "[precoding]")
{
    Rng rng(2024);
    const int frames = 1000, ma = 4, k = 2;
    const double sigma2 = db_to_linear(-30.0);
    const auto pw = PowerAllocation::equal(k, 1.0, sigma2);
    int agree = 0, total = 0;
    RVec stage = RVec::Zero(k + 1);
    for (int f = 0; f < frames; ++f)
    {
        const CMat h = complex_normal_matrix(rng, ma, 2 * k);
        CVec x(2 * k);
        for (int s = 0; s < 2 * k; ++s)
            x(s) = qpsk_symbol(rng);
        const CVec y = h * x + complex_normal_vector(rng, ma, sigma2);
        const auto d = padic(y, h, pw, Scheme::mmse);
        const CVec ml = ml_detect(y, h, pw.ul);
        for (int s = 0; s < 2 * k; ++s, ++total)
            agree += std::abs(d.symbols(s) - ml(s)) < 1e-9 ? 1 : 0;
        stage(0) += y.squaredNorm();
        for (int i = 0; i < k; ++i)
            stage(i + 1) += d.per_stage_power[static_cast<size_t>(i)];
    }
    CHECK(static_cast<double>(agree) / total >= 0.99);
    for (int i = 0; i < k; ++i)
        CHECK(stage(i + 1) <= stage(i));
}

TEST_CASE("Monte-Carlo spectral efficiency", "[precoding]")
{
    Rng rng(77);
    const auto ens = rayleigh_ensemble(rng, 400, 8, 2, 0.02);
    const auto pw = PowerAllocation::equal(2, 1.0, 0.01);
    const auto a = se_monte_carlo(ens, pw, Scheme::mmse, 0.9);
    const auto b = se_monte_carlo(ens, pw, Scheme::mmse, 0.9);
    CHECK(a.mean == b.mean);
    CHECK(a.sum_ci95 == b.sum_ci95);
    CHECK(a.trials == 400);
    CHECK(a.sum_ci95 > 0.0);

    const auto mr = se_monte_carlo(ens, pw, Scheme::mr, 0.9);
    const auto zf = se_monte_carlo(ens, pw, Scheme::zf, 0.9);
    CHECK(a.sum_mean >= mr.sum_mean);
    CHECK(a.sum_mean >= zf.sum_mean);

    // perfect CSI, single user, orthogonal ports: 1 bit per 3 dB per polarization at high SNR
    CMat h = CMat::Zero(4, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    const std::vector<Realization> one(1, Realization{h, h});
    const double s1 = se_monte_carlo(one, PowerAllocation::equal(1, 1e6, 1.0), Scheme::mmse, 1.0).sum_mean;
    const double s2 = se_monte_carlo(one, PowerAllocation::equal(1, 2e6, 1.0), Scheme::mmse, 1.0).sum_mean;
    CHECK_THAT(s2 - s1, WithinAbs(2.0, 1e-5));

    // prelog bound with the single-stream SNR
    for (const auto &r : ens)
    {
        const RVec se = padic_se(r, pw, Scheme::mmse, 0.9);
        for (int u = 0; u < 2; ++u)
        {
            double bound = 0.0;
            for (int q = 0; q < 2; ++q)
                bound += std::log2(1.0 + pw.ul(2 * u + q) * r.h_true.col(2 * u + q).squaredNorm() / pw.noise_ul);
            CHECK(se(u) <= 0.9 * bound + 1e-9);
        }
    }
    CHECK_THROWS_AS(se_monte_carlo({}, pw, Scheme::mr, 1.0), std::invalid_argument);
}
