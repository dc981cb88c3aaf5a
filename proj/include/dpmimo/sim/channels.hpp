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


#ifndef DPMIMO_SIM_CHANNELS_HPP
#define DPMIMO_SIM_CHANNELS_HPP

#include "dpmimo/estimation.hpp"
#include "dpmimo/precoding.hpp"
#include "dpmimo/sim/config.hpp"

#include <vector>

// Narrowband multi-user channel draws for the experiment harness.
//
// AP j carries ap_elements dual-polarized elements; AP port (j, e, r) has row index
// 2 (j E + e) + r. TAU k is a single dual-polarized element at along-train offset
// k * tau_spacing. Each user's columns are normalized so its strongest AP link has unit
// large-scale gain; SNR is then P / sigma^2 on the serving link.

namespace dpmimo::sim
{
    struct ChannelDraw
    {
        CMat h;                         // AP ports x 2K uplink channel
        std::vector<char> stream_active;
        std::vector<CMat> spatial_corr; // per stream, diagonal large-scale gains over AP ports
        std::vector<Mat2c> blocks;      // assembled 2x2 blocks (TAU port, AP port) per user, AP, element
        std::vector<gbsm::PathTap> taps; // user 0 to AP 0, normalized, delays relative to the first arrival
    };

    inline int port_count(const ExperimentConfig &c)
    {
        const int per_ap = c.channel.kind == ChannelKind::lcx ? 1 : c.deployment.ap_elements;
        return 2 * c.deployment.ap_count * per_ap;
    }

    inline gbsm::LinkConfig link_config(const ExperimentConfig &c)
    {
        gbsm::LinkConfig l = c.link;
        l.resolution = {c.frame.delay_resolution(), c.frame.doppler_resolution()};
        return l;
    }

    // Sum of the tap gains seen by AP element e of a ULA along the track.
    inline Mat2c narrowband_block(std::span<const gbsm::PathTap> taps, int element, double spacing_over_lambda)
    {
        Mat2c g = Mat2c::Zero();
        for (const auto &t : taps)
        {
            const double theta = gbsm::ula_angle(t.angles.eaod, t.angles.aaod);
            g += t.pol_gain * expj(-two_pi * spacing_over_lambda * element * std::sin(theta));
        }
        return g;
    }

    inline std::vector<gbsm::PathTap> relative_taps(std::vector<gbsm::PathTap> taps, const gbsm::GridResolution &res,
                                                    double amplitude)
    {
        if (taps.empty())
            return taps;
        double first = taps.front().delay;
        for (const auto &t : taps)
            first = std::min(first, t.delay);
        for (auto &t : taps)
        {
            t.delay -= first;
            t.pol_gain *= amplitude;
            gbsm::quantize(t, res);
        }
        return taps;
    }

    // Draws one channel snapshot at time t for the configured deployment and channel kind.
    inline ChannelDraw draw_channel(const ExperimentConfig &c, double t, Rng &rng)
    {
        const auto &s = c.scenario;
        const int k_users = c.experiment.users;
        const int aps = c.deployment.ap_count;
        const bool lcx = c.channel.kind == ChannelKind::lcx;
        const bool single = c.channel.kind == ChannelKind::single_pol || lcx;
        const int elems = lcx ? 1 : c.deployment.ap_elements;
        const int ports = port_count(c);
        const pol::PolarizationProfile profile = c.polarization.profile();
        const gbsm::LinkConfig lc = link_config(c);
        const gbsm::GridResolution res = lc.resolution;
        if (c.channel.kind == ChannelKind::tdl && c.channel.tdl_taps.empty())
            throw std::invalid_argument("tap table required");

        ChannelDraw out;
        out.h = CMat::Zero(ports, 2 * k_users);
        out.stream_active.assign(static_cast<size_t>(2 * k_users), 1);
        RMat beta(k_users, aps);
        std::vector<Mat2c> raw(static_cast<size_t>(k_users * aps * elems));

        for (int k = 0; k < k_users; ++k)
        {
            const Vec3 tau = gbsm::tau_position(s, t, k * c.deployment.tau_spacing);
            for (int j = 0; j < aps; ++j)
            {
                const Vec3 ap = gbsm::ap_position(s, j);
                const double dist = (tau - ap).norm();
                beta(k, j) = gbsm::large_scale_beta(c.path_loss.model, dist, c.path_loss.shadow_sigma_db, rng).beta;
                const size_t base = static_cast<size_t>((k * aps + j) * elems);

                if (c.channel.kind == ChannelKind::tdl)
                {
                    // Flat Rayleigh blocks from the power-delay profile.
                    const double x = 1.0 / std::sqrt(db_to_linear(c.link.clusters.xpr_mu_db));
                    for (int e = 0; e < elems; ++e)
                    {
                        Mat2c g = Mat2c::Zero();
                        for (const auto &tap : c.channel.tdl_taps)
                        {
                            Mat2c m = complex_normal_matrix(rng, 2, 2);
                            m(0, 1) *= x;
                            m(1, 0) *= x;
                            g += std::sqrt(db_to_linear(tap.power_db)) * m;
                        }
                        raw[base + static_cast<size_t>(e)] = g;
                    }
                    if (k == 0 && j == 0)
                        for (const auto &tap : c.channel.tdl_taps)
                        {
                            gbsm::PathTap p;
                            p.delay = tap.delay;
                            p.power = db_to_linear(tap.power_db);
                            p.pol_gain = std::sqrt(p.power) * Mat2c(complex_normal_matrix(rng, 2, 2));
                            gbsm::quantize(p, res);
                            out.taps.push_back(p);
                        }
                    continue;
                }

                if (lcx)
                {
                    // Radiating slots along the track, single (V) polarization, summed into one port.
                    const double pitch = c.channel.lcx_pitch_over_lambda * s.wavelength();
                    const int n_slots = c.channel.lcx_slots;
                    Mat2c g = Mat2c::Zero();
                    for (int n = 0; n < n_slots; ++n)
                    {
                        const Vec3 slot = ap + Vec3((n - 0.5 * (n_slots - 1)) * pitch, 0.0, 0.0);
                        const auto link = gbsm::generate_link(s, lc, slot, tau, t, rng);
                        g += narrowband_block(link.taps, 0, 0.5);
                        if (k == 0 && j == 0 && n == 0)
                            out.taps = link.taps;
                    }
                    g /= std::sqrt(static_cast<double>(n_slots));
                    g.col(index(Pol::H)).setZero();
                    raw[base] = g;
                    continue;
                }

                const auto link = gbsm::generate_link(s, lc, ap, tau, t, rng);
                for (int e = 0; e < elems; ++e)
                    raw[base + static_cast<size_t>(e)] =
                        narrowband_block(link.taps, e, c.deployment.element_spacing_over_lambda);
                if (k == 0 && j == 0)
                    out.taps = link.taps;
            }
        }

        for (int k = 0; k < k_users; ++k)
        {
            const double serving = beta.row(k).maxCoeff();
            for (int j = 0; j < aps; ++j)
            {
                const double amp = std::sqrt(beta(k, j) / serving);
                for (int e = 0; e < elems; ++e)
                {
                    const size_t idx = static_cast<size_t>((k * aps + j) * elems + e);
                    Mat2c b = amp * pol::assemble_block(raw[idx], profile);
                    if (single)
                    {
                        b.row(index(Pol::H)).setZero();
                        b.col(index(Pol::H)).setZero();
                    }
                    out.blocks.push_back(b);
                    for (Pol p : {Pol::V, Pol::H})
                        for (Pol r : {Pol::V, Pol::H})
                            out.h(2 * (j * elems + e) + index(r), precoding::stream(k, p)) = b(index(p), index(r));
                }
            }
            if (k == 0)
                out.taps = relative_taps(out.taps, res, std::sqrt(beta(0, 0) / serving));
        }

        for (int k = 0; k < k_users; ++k)
            for (Pol p : {Pol::V, Pol::H})
            {
                const int st = precoding::stream(k, p);
                if (single && p == Pol::H)
                    out.stream_active[static_cast<size_t>(st)] = 0;
                RVec d = RVec::Zero(ports);
                if (out.stream_active[static_cast<size_t>(st)])
                    for (int j = 0; j < aps; ++j)
                        for (int e = 0; e < elems; ++e)
                            for (Pol r : {Pol::V, Pol::H})
                                if (!(single && r == Pol::H))
                                    d(2 * (j * elems + e) + index(r)) = beta(k, j) / beta.row(k).maxCoeff();
                out.spatial_corr.push_back(d.cast<cplx>().asDiagonal());
            }
        return out;
    }

    // Kind-specific generator bound to a configuration.
    struct ChannelGenerator
    {
        ExperimentConfig config;

        ChannelDraw operator()(double t, Rng &rng) const { return draw_channel(config, t, rng); }
    };

    inline ChannelGenerator baseline_channel(ChannelKind kind, ExperimentConfig config)
    {
        config.channel.kind = kind;
        if (kind == ChannelKind::tdl && config.channel.tdl_taps.empty())
            throw std::invalid_argument("tap table required");
        return {std::move(config)};
    }

    // Pilot-based LMMSE estimate of every active stream channel from orthogonal pilots.
    struct CsiEstimate
    {
        CMat h_est;
        std::vector<est::Covariances> cov; // per stream
    };

    inline CsiEstimate estimate_csi(const ChannelDraw &d, double pilot_power, int pilot_len, double noise, bool perfect,
                                    Rng &rng)
    {
        CsiEstimate out;
        out.h_est = CMat::Zero(d.h.rows(), d.h.cols());
        for (Eigen::Index s = 0; s < d.h.cols(); ++s)
        {
            const CMat &r = d.spatial_corr[static_cast<size_t>(s)];
            const CMat one[] = {r};
            est::Covariances cv = est::estimate_covariances(one, pilot_power, pilot_len, noise)[0];
            if (!d.stream_active[static_cast<size_t>(s)])
            {
                out.cov.push_back(std::move(cv));
                continue;
            }
            if (perfect)
            {
                out.h_est.col(s) = d.h.col(s);
                cv.gamma = r;
                cv.c_err = CMat::Zero(r.rows(), r.cols());
            }
            else
            {
                const double a = std::sqrt(pilot_power * pilot_len);
                const CVec y = a * d.h.col(s) + complex_normal_vector(rng, d.h.rows(), noise);
                CMat inner = pilot_power * pilot_len * r;
                inner.diagonal().array() += noise;
                out.h_est.col(s) = a * r * inner.ldlt().solve(y);
            }
            out.cov.push_back(std::move(cv));
        }
        return out;
    }
} // namespace dpmimo::sim

#endif
