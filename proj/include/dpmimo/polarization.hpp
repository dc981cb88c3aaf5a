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


#ifndef DPMIMO_POLARIZATION_HPP
#define DPMIMO_POLARIZATION_HPP

#include "dpmimo/common.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <limits>
#include <span>
#include <vector>

// Dual-polarized channel algebra: XPD / XPC statistics, polarization correlation,
// condition numbers and assembly of the per-user 2 x 2M_a channel.
//
// A 2x2 polarization block is indexed (rx port, tx port) with V = 0, H = 1, so
// (0,0) = VV, (0,1) = VH, (1,0) = HV, (1,1) = HH.

namespace dpmimo::pol
{
    // 2 x 2M_a channel of one user; columns (2m, 2m+1) hold the block of antenna m.
    struct DualPolChannel
    {
        CMat matrix;
        int user = 0;
        int antennas = 0;

        Mat2c block(int m) const
        {
            if (m < 0 || m >= antennas)
                throw std::out_of_range("antenna index out of range");
            return matrix.block<2, 2>(0, 2 * m);
        }
    };

    struct PolarizationProfile
    {
        cplx rho_t = 0.0;
        cplx rho_r = 0.0;
        Eigen::Matrix2d xpd_matrix = Eigen::Matrix2d::Ones(); // amplitude template, Hadamard-applied

        void validate() const
        {
            if (std::abs(rho_t) > 1.0 + 1e-12)
                throw std::invalid_argument("polarization.rho_t must satisfy |rho| <= 1");
            if (std::abs(rho_r) > 1.0 + 1e-12)
                throw std::invalid_argument("polarization.rho_r must satisfy |rho| <= 1");
            if ((xpd_matrix.array() < 0.0).any() || !xpd_matrix.allFinite())
                throw std::invalid_argument("polarization.xpd_matrix entries must be finite and >= 0");
        }

        // Same correlation at both ends, co-polar amplitude 1 and cross-polar amplitude 1/sqrt(xpd).
        static PolarizationProfile symmetric(double rho, double xpd_linear = std::numeric_limits<double>::infinity())
        {
            PolarizationProfile p;
            p.rho_t = rho;
            p.rho_r = rho;
            const double x = std::isinf(xpd_linear) ? 1.0 : 1.0 / std::sqrt(xpd_linear);
            p.xpd_matrix << 1.0, x, x, 1.0;
            return p;
        }
    };

    // ---------- Statistics ----------

    struct XpdEstimate
    {
        double v = 0.0; // E|h_VV|^2 / E|h_HV|^2
        double h = 0.0; // E|h_HH|^2 / E|h_VH|^2
        bool v_infinite = false;
        bool h_infinite = false;
    };

    inline XpdEstimate xpd_estimate(std::span<const Mat2c> samples)
    {
        if (samples.size() < 2)
            throw std::invalid_argument("XPD estimate needs >= 2 samples");
        double vv = 0.0, hv = 0.0, hh = 0.0, vh = 0.0;
        for (const auto &s : samples)
        {
            vv += std::norm(s(0, 0));
            vh += std::norm(s(0, 1));
            hv += std::norm(s(1, 0));
            hh += std::norm(s(1, 1));
        }
        if (!(vv > 0.0) || !(hh > 0.0))
            throw std::invalid_argument("zero co-polar power");
        XpdEstimate e;
        const double inf = std::numeric_limits<double>::infinity();
        e.v_infinite = !(hv > 0.0);
        e.h_infinite = !(vh > 0.0);
        e.v = e.v_infinite ? inf : vv / hv;
        e.h = e.h_infinite ? inf : hh / vh;
        return e;
    }

    // Correlation between the co-polar VV gain and the cross-polar VH gain.
    inline cplx xpc_estimate(std::span<const Mat2c> samples)
    {
        if (samples.size() < 2)
            throw std::invalid_argument("XPC estimate needs >= 2 samples");
        cplx cross = 0.0;
        double p_vv = 0.0, p_vh = 0.0;
        for (const auto &s : samples)
        {
            cross += s(0, 0) * std::conj(s(0, 1));
            p_vv += std::norm(s(0, 0));
            p_vh += std::norm(s(0, 1));
        }
        if (!(p_vv > 0.0) || !(p_vh > 0.0))
            throw std::domain_error("undefined correlation");
        return cross / std::sqrt(p_vv * p_vh);
    }

    // ---------- Correlation matrices ----------

    inline Mat2c correlation_matrix(cplx rho)
    {
        if (std::abs(rho) > 1.0 + 1e-12)
            throw std::invalid_argument("|rho| must be <= 1");
        Mat2c c;
        c << 1.0, rho, std::conj(rho), 1.0;
        return c;
    }

    struct MatrixRoot
    {
        Mat2c root;
        bool rank_deficient = false;
    };

    // Principal Hermitian PSD square root.
    inline MatrixRoot matrix_sqrt_psd(const Mat2c &c, double tol = 1e-12)
    {
        if ((c - c.adjoint()).norm() > tol * std::max(1.0, c.norm()))
            throw std::invalid_argument("matrix is not Hermitian");
        Eigen::SelfAdjointEigenSolver<Mat2c> es(c);
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        Eigen::Vector2d ev = es.eigenvalues();
        MatrixRoot out;
        for (int i = 0; i < 2; ++i)
        {
            if (ev(i) < -tol * scale)
                throw std::domain_error("matrix has a negative eigenvalue");
            if (ev(i) <= tol * scale)
            {
                out.rank_deficient = true;
                ev(i) = 0.0;
            }
        }
        out.root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
        return out;
    }

    // ---------- Assembly ----------

    // Per antenna block: template (Hadamard) applied to sqrt(C_r) h sqrt(C_t).
    inline DualPolChannel assemble_dual_pol(std::span<const Mat2c> h_small, const PolarizationProfile &profile,
                                            int user = 0)
    {
        profile.validate();
        if (h_small.empty())
            throw std::invalid_argument("no antenna blocks");
        const Mat2c cr = matrix_sqrt_psd(correlation_matrix(profile.rho_r)).root;
        const Mat2c ct = matrix_sqrt_psd(correlation_matrix(profile.rho_t)).root;
        const Eigen::Matrix2cd tmpl = profile.xpd_matrix.cast<cplx>();

        DualPolChannel out;
        out.user = user;
        out.antennas = static_cast<int>(h_small.size());
        out.matrix.resize(2, 2 * out.antennas);
        for (int m = 0; m < out.antennas; ++m)
            out.matrix.block<2, 2>(0, 2 * m) = tmpl.cwiseProduct(cr * h_small[static_cast<size_t>(m)] * ct);
        return out;
    }

    inline Mat2c assemble_block(const Mat2c &h, const PolarizationProfile &profile)
    {
        return assemble_dual_pol(std::span<const Mat2c>(&h, 1), profile).block(0);
    }

    // Rayleigh blocks with i.i.d. CN(0,1) entries shaped by the profile.
    inline DualPolChannel synthesize(Rng &rng, int antennas, const PolarizationProfile &profile, int user = 0)
    {
        std::vector<Mat2c> blocks(static_cast<size_t>(antennas));
        for (auto &b : blocks)
            b = complex_normal_matrix(rng, 2, 2);
        return assemble_dual_pol(blocks, profile, user);
    }

    // ---------- Condition number ----------

    inline double condition_number(const CMat &h)
    {
        if (h.size() == 0 || h.cwiseAbs().maxCoeff() == 0.0)
            throw std::invalid_argument("condition number of a zero matrix");
        Eigen::JacobiSVD<CMat> svd(h);
        const auto &s = svd.singularValues();
        const double smax = s(0);
        const double smin = s(s.size() - 1);
        const double floor = smax * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(h.rows(), h.cols()));
        if (smin <= floor)
            return std::numeric_limits<double>::infinity();
        return smax / smin;
    }

    struct ConditionReport
    {
        std::vector<double> per_block;
        double full = 0.0;
    };

    inline ConditionReport condition_numbers(const DualPolChannel &h)
    {
        ConditionReport r;
        r.per_block.reserve(static_cast<size_t>(h.antennas));
        for (int m = 0; m < h.antennas; ++m)
            r.per_block.push_back(condition_number(h.block(m)));
        r.full = condition_number(h.matrix);
        return r;
    }
} // namespace dpmimo::pol

#endif
