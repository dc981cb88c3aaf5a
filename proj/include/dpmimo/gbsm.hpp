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

#ifndef DPMIMO_GBSM_HPP
#define DPMIMO_GBSM_HPP

#include "dpmimo/common.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

// Geometry-based stochastic channel model of the AP <-> TAU link in a rail tunnel.
//
// Coordinates: x runs along the track, y is lateral, z is height above the rail.
// The AP of index j sits at (j * ap_spacing, ap_track_offset, ap_height). A TAU with
// along-train offset o sits at (-initial_distance + train_speed * t + o, 0, tau_height),
// i.e. the train starts initial_distance before the first AP and moves in +x.
// The AP side is the "transmit" end (M_T elements, departure angles), the TAU side is
// the "receive" end (N_R elements, arrival angles); the link is reciprocal.

namespace dpmimo::gbsm
{
    struct TunnelScenario
    {
        double tunnel_height = 5.0;           // m
        double tunnel_width = 3.4;            // m, at the bottom
        double tau_height = 3.8;              // m
        double ap_height = 4.2;               // m
        double ap_track_offset = 1.7;         // m, lateral AP distance from the track centre line
        double ap_spacing = 10.0;             // m
        double train_speed = 120.0 / 3.6;     // m/s
        double carrier_freq = 1.8e9;          // Hz
        double bandwidth = 20.0e6;            // Hz
        double initial_distance = 5.0;        // m, along-track TAU-to-AP distance at t = 0
        double rician_k = 3.1622776601683795; // linear (5 dB)
        double wave_speed = speed_of_light;   // m/s

        double wavelength() const { return wave_speed / carrier_freq; }
        double max_doppler() const { return train_speed * carrier_freq / wave_speed; }

        void validate() const
        {
            auto positive = [](double v, const char *field)
            {
                if (!(v > 0.0) || !std::isfinite(v))
                    throw std::invalid_argument(std::string("scenario.") + field + " must be > 0");
            };
            auto non_negative = [](double v, const char *field)
            {
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw std::invalid_argument(std::string("scenario.") + field + " must be >= 0");
            };
            positive(tunnel_height, "tunnel_height");
            positive(tunnel_width, "tunnel_width");
            positive(tau_height, "tau_height");
            positive(ap_height, "ap_height");
            positive(ap_spacing, "ap_spacing");
            positive(carrier_freq, "carrier_freq");
            positive(bandwidth, "bandwidth");
            positive(wave_speed, "wave_speed");
            non_negative(ap_track_offset, "ap_track_offset");
            non_negative(train_speed, "train_speed");
            non_negative(initial_distance, "initial_distance");
            non_negative(rician_k, "rician_k");
            if (tau_height > tunnel_height)
                throw std::invalid_argument("scenario.tau_height exceeds scenario.tunnel_height");
            if (ap_height > tunnel_height)
                throw std::invalid_argument("scenario.ap_height exceeds scenario.tunnel_height");
            const double lambda = wavelength();
            if (!(lambda > 0.0) || !std::isfinite(lambda))
                throw std::invalid_argument("scenario.wavelength must be finite and > 0");
        }
    };

    struct ArrayGeometry
    {
        int tx_elements = 1;                  // M_T (AP side)
        int rx_elements = 1;                  // N_R (TAU side)
        double tx_spacing = 0.0833;           // m, delta_T
        double rx_spacing = 0.0833;           // m, delta_R
        double ula_spacing_over_lambda = 0.5; // d / lambda used by the steering vectors

        void validate() const
        {
            if (tx_elements < 1 || rx_elements < 1)
                throw std::invalid_argument("array element counts must be >= 1");
            if (!(tx_spacing > 0.0) || !(rx_spacing > 0.0) || !(ula_spacing_over_lambda > 0.0))
                throw std::invalid_argument("array spacings must be > 0");
        }
    };

    // Angles in radians. Cluster angles (eaod .. aaoa) and LoS angles (los_*) share one record;
    // for a LoS path both groups are equal.
    struct AngleSet
    {
        double eaod = 0.0;
        double aaod = 0.0;
        double eaoa = 0.0;
        double aaoa = 0.0;
        double los_dep_elev = 0.0;
        double los_dep_azim = 0.0;
        double los_arr_elev = 0.0;
        double los_arr_azim = 0.0;
    };

    inline Vec3 direction(double elev, double azim)
    {
        return {std::cos(elev) * std::cos(azim), std::cos(elev) * std::sin(azim), std::sin(elev)};
    }

    // Angle from broadside of a ULA whose axis is the track (x) axis.
    inline double ula_angle(double elev, double azim)
    {
        return std::asin(std::clamp(std::cos(elev) * std::cos(azim), -1.0, 1.0));
    }

    inline Vec3 ap_position(const TunnelScenario &s, int ap_index = 0)
    {
        return {ap_index * s.ap_spacing, s.ap_track_offset, s.ap_height};
    }

    inline Vec3 tau_position(const TunnelScenario &s, double t, double along_offset = 0.0)
    {
        return {-s.initial_distance + s.train_speed * t + along_offset, 0.0, s.tau_height};
    }

    struct LosGeometry
    {
        AngleSet angles;
        double distance = 0.0; // m, AP -> TAU
        Vec3 displacement;     // TAU position minus AP position
        double doppler = 0.0;  // Hz
    };

    // LoS angles, distance and Doppler between an AP and a TAU moving at train_speed along +x.
    inline LosGeometry los_geometry(const Vec3 &ap, const Vec3 &tau, const TunnelScenario &s)
    {
        const Vec3 d = tau - ap;
        const double dist = d.norm();
        if (!(dist > 1e-9))
            throw std::domain_error("zero-baseline geometry");

        const double horizontal = std::hypot(d.x(), d.y());
        LosGeometry g;
        g.displacement = d;
        g.distance = dist;

        AngleSet &a = g.angles;
        a.los_dep_elev = std::atan2(d.z(), horizontal);
        a.los_dep_azim = wrap_angle(std::atan2(d.y(), d.x()));
        a.los_arr_elev = std::atan2(-d.z(), horizontal);
        a.los_arr_azim = wrap_angle(std::atan2(-d.y(), -d.x()));
        a.eaod = a.los_dep_elev;
        a.aaod = a.los_dep_azim;
        a.eaoa = a.los_arr_elev;
        a.aaoa = a.los_arr_azim;

        // Cosine between the TAU velocity (+x) and the direction towards the AP.
        g.doppler = s.max_doppler() * (-d.x() / dist);
        return g;
    }

    inline LosGeometry los_geometry(const TunnelScenario &s, double t)
    {
        if (!(t >= 0.0))
            throw std::invalid_argument("time must be >= 0");
        return los_geometry(ap_position(s, 0), tau_position(s, t), s);
    }

    struct ElementPositions
    {
        Vec3 tx;
        Vec3 rx;
    };

    // Element p of the AP array (1..M_T) and element q of the TAU array (1..N_R), each placed
    // along its array axis; the TAU element is translated by the AP->TAU baseline.
    inline ElementPositions element_positions(const ArrayGeometry &array, const AngleSet &angles, int p, int q,
                                              const Vec3 &baseline)
    {
        if (p < 1 || p > array.tx_elements)
            throw std::out_of_range("tx element index out of range");
        if (q < 1 || q > array.rx_elements)
            throw std::out_of_range("rx element index out of range");
        const double tx_scale = (array.tx_elements - 2.0 * p + 1.0) / 2.0 * array.tx_spacing;
        const double rx_scale = (array.rx_elements - 2.0 * q + 1.0) / 2.0 * array.rx_spacing;
        return {tx_scale * direction(angles.eaod, angles.aaod),
                rx_scale * direction(angles.eaoa, angles.aaoa) + baseline};
    }

    inline ElementPositions element_positions(const ArrayGeometry &array, const AngleSet &angles, int p, int q,
                                              const TunnelScenario &s, double t)
    {
        return element_positions(array, angles, p, q, los_geometry(s, t).displacement);
    }

    // Field pattern of a single antenna port: complex (F_V, F_H) components at (elevation, azimuth).
    using FieldPattern = std::function<Eigen::Vector2cd(double elev, double azim)>;

    struct DualPolPattern
    {
        FieldPattern v_port;
        FieldPattern h_port;

        const FieldPattern &port(Pol p) const { return p == Pol::V ? v_port : h_port; }

        // Ideal orthogonal unit-gain ports: the V port radiates only F_V, the H port only F_H.
        static DualPolPattern ideal()
        {
            return {[](double, double) { return Eigen::Vector2cd(1.0, 0.0); },
                    [](double, double) { return Eigen::Vector2cd(0.0, 1.0); }};
        }
    };

    struct LinkPatterns
    {
        DualPolPattern tx = DualPolPattern::ideal();
        DualPolPattern rx = DualPolPattern::ideal();
    };

    // Random initial LoS phases applied to the V and H field components.
    struct LosPhases
    {
        double v = 0.0;
        double h = 0.0;

        static LosPhases draw(Rng &rng) { return {uniform(rng, 0.0, two_pi), uniform(rng, 0.0, two_pi)}; }
    };

    struct LosComponent
    {
        Mat2c pol_gain = Mat2c::Zero(); // rows: rx port (V, H), cols: tx port (V, H)
        double delay = 0.0;             // s
        double doppler = 0.0;           // Hz
        AngleSet angles;
    };

    // Bracket product rx_pattern^T * inner * tx_pattern for every (rx port, tx port) pair.
    inline Mat2c port_gains(const LinkPatterns &patterns, const Mat2c &inner, double dep_elev, double dep_azim,
                            double arr_elev, double arr_azim)
    {
        Mat2c g;
        for (Pol q : {Pol::V, Pol::H})
        {
            const Eigen::Vector2cd frx = patterns.rx.port(q)(arr_elev, arr_azim);
            for (Pol p : {Pol::V, Pol::H})
            {
                const Eigen::Vector2cd ftx = patterns.tx.port(p)(dep_elev, dep_azim);
                g(index(q), index(p)) = frx.transpose() * inner * ftx;
            }
        }
        return g;
    }

    inline LosComponent los_cir(const TunnelScenario &s, const LosGeometry &geom, const LinkPatterns &patterns,
                                const LosPhases &phases, double t)
    {
        LosComponent out;
        out.angles = geom.angles;
        out.delay = geom.distance / s.wave_speed;
        out.doppler = geom.doppler;

        Mat2c inner = Mat2c::Zero();
        inner(0, 0) = expj(phases.v);
        inner(1, 1) = expj(phases.h);
        const cplx phasor = expj(two_pi * (out.doppler * t - out.delay * s.carrier_freq));
        const AngleSet &a = geom.angles;
        out.pol_gain = port_gains(patterns, inner, a.los_dep_elev, a.los_dep_azim, a.los_arr_elev, a.los_arr_azim) *
                       phasor;
        return out;
    }

    inline LosComponent los_cir(const TunnelScenario &s, const LinkPatterns &patterns, const LosPhases &phases,
                                double t)
    {
        return los_cir(s, los_geometry(s, t), patterns, phases, t);
    }

    // ---------- NLoS clusters ----------

    struct ClusterRay
    {
        int cluster_idx = 0;
        int ray_idx = 1; // 1-based within the cluster
        double dep_elev = 0.0;
        double dep_azim = 0.0;
        double arr_elev = 0.0;
        double arr_azim = 0.0;
        std::array<double, 4> phases{}; // VV, VH, HV, HH in [0, 2 pi)
        double xpr = 1.0;               // kappa, linear
        double tx_scatter_dist = 0.0;   // m
        double rx_scatter_dist = 0.0;   // m
        double delay_correction = 0.0;  // s
    };

    // Laws for the cluster draw. Azimuths are centred on the given directions and confined to
    // +-azimuth_half_width (the tunnel walls bound the scatterers); elevations are uniform.
    struct ClusterDistributions
    {
        double dep_azimuth_center = 0.0;
        double arr_azimuth_center = pi;
        double azimuth_half_width = pi / 6.0;
        double elevation_min = -pi / 9.0;
        double elevation_max = pi / 9.0;
        double ray_spread = 5.0 * pi / 180.0; // intra-cluster angular offset bound
        double scatter_dist_min = 1.0;        // m
        double scatter_dist_max = 20.0;       // m
        double xpr_mu_db = 8.0;
        double xpr_sigma_db = 3.0;
        double delay_correction = 0.0; // s
    };

    inline std::vector<ClusterRay> draw_clusters(Rng &rng, int cluster_count, int rays_per_cluster,
                                                 const ClusterDistributions &d)
    {
        if (cluster_count < 1 || rays_per_cluster < 1)
            throw std::invalid_argument("cluster and ray counts must be >= 1");
        if (!(d.xpr_sigma_db >= 0.0))
            throw std::invalid_argument("XPR standard deviation must be >= 0");
        if (d.scatter_dist_min < 0.0 || d.scatter_dist_max < d.scatter_dist_min)
            throw std::invalid_argument("invalid scatter distance range");

        std::normal_distribution<double> xpr_db(d.xpr_mu_db, d.xpr_sigma_db);
        auto draw_xpr_db = [&]() { return d.xpr_sigma_db > 0.0 ? xpr_db(rng) : d.xpr_mu_db; };

        std::vector<ClusterRay> rays;
        rays.reserve(static_cast<size_t>(cluster_count) * rays_per_cluster);
        for (int n = 0; n < cluster_count; ++n)
        {
            const double dep_az = d.dep_azimuth_center + uniform(rng, -d.azimuth_half_width, d.azimuth_half_width);
            const double arr_az = d.arr_azimuth_center + uniform(rng, -d.azimuth_half_width, d.azimuth_half_width);
            const double dep_el = uniform(rng, d.elevation_min, d.elevation_max);
            const double arr_el = uniform(rng, d.elevation_min, d.elevation_max);
            const double tx_dist = uniform(rng, d.scatter_dist_min, d.scatter_dist_max);
            const double rx_dist = uniform(rng, d.scatter_dist_min, d.scatter_dist_max);
            for (int m = 1; m <= rays_per_cluster; ++m)
            {
                ClusterRay r;
                r.cluster_idx = n;
                r.ray_idx = m;
                r.dep_azim = wrap_angle(dep_az + uniform(rng, -d.ray_spread, d.ray_spread));
                r.arr_azim = wrap_angle(arr_az + uniform(rng, -d.ray_spread, d.ray_spread));
                r.dep_elev = std::clamp(dep_el + uniform(rng, -d.ray_spread, d.ray_spread), -pi / 2, pi / 2);
                r.arr_elev = std::clamp(arr_el + uniform(rng, -d.ray_spread, d.ray_spread), -pi / 2, pi / 2);
                for (double &ph : r.phases)
                    ph = uniform(rng, 0.0, two_pi);
                r.xpr = db_to_linear(draw_xpr_db());
                r.tx_scatter_dist = tx_dist;
                r.rx_scatter_dist = rx_dist;
                r.delay_correction = d.delay_correction;
                rays.push_back(r);
            }
        }
        return rays;
    }

    // Polarization coupling matrix of one ray: unit co-polar terms, cross-polar terms scaled by 1/sqrt(xpr).
    inline Mat2c ray_polarization_matrix(const ClusterRay &r)
    {
        if (!(r.xpr > 0.0))
            throw std::invalid_argument("invalid XPR");
        const double x = std::isinf(r.xpr) ? 0.0 : 1.0 / std::sqrt(r.xpr);
        Mat2c m;
        m << expj(r.phases[0]), x * expj(r.phases[1]), x * expj(r.phases[2]), expj(r.phases[3]);
        return m;
    }

    struct NlosRay
    {
        Mat2c pol_gain = Mat2c::Zero();
        double delay = 0.0;   // s
        double doppler = 0.0; // Hz
        int cluster_idx = 0;
        AngleSet angles;
    };

    // Per-ray CIR. Each cluster carries power `power`, split evenly over its rays; `baseline`
    // is the current AP->TAU distance D(t).
    inline std::vector<NlosRay> nlos_cir(std::span<const ClusterRay> rays, const LinkPatterns &patterns, double power,
                                         const TunnelScenario &s, double baseline, double t)
    {
        if (rays.empty())
            throw std::invalid_argument("no rays");
        if (!(power > 0.0))
            throw std::invalid_argument("cluster power must be > 0");

        int max_cluster = 0;
        for (const auto &r : rays)
            max_cluster = std::max(max_cluster, r.cluster_idx);
        std::vector<int> rays_in_cluster(static_cast<size_t>(max_cluster) + 1, 0);
        for (const auto &r : rays)
            ++rays_in_cluster[static_cast<size_t>(r.cluster_idx)];

        std::vector<NlosRay> out;
        out.reserve(rays.size());
        for (const auto &r : rays)
        {
            NlosRay o;
            o.cluster_idx = r.cluster_idx;
            o.delay = (r.tx_scatter_dist + r.rx_scatter_dist + baseline) / s.wave_speed + r.delay_correction;
            o.doppler = s.max_doppler() * std::cos(r.arr_elev) * std::cos(r.arr_azim);
            o.angles.eaod = r.dep_elev;
            o.angles.aaod = r.dep_azim;
            o.angles.eaoa = r.arr_elev;
            o.angles.aaoa = r.arr_azim;

            const double amp = std::sqrt(power / rays_in_cluster[static_cast<size_t>(r.cluster_idx)]);
            const cplx phasor = expj(two_pi * (o.doppler * t - o.delay * s.carrier_freq));
            o.pol_gain = amp * phasor *
                         port_gains(patterns, ray_polarization_matrix(r), r.dep_elev, r.dep_azim, r.arr_elev,
                                    r.arr_azim);
            out.push_back(o);
        }
        return out;
    }

    // ---------- Combined taps ----------

    struct RicianWeights
    {
        double los;
        double nlos;
    };

    inline RicianWeights rician_weights(double k)
    {
        if (!(k >= 0.0))
            throw std::invalid_argument("Rician K-factor must be >= 0");
        return {std::sqrt(k / (1.0 + k)), std::sqrt(1.0 / (1.0 + k))};
    }

    // Delay and Doppler bin widths of the delay-Doppler grid the taps are snapped to.
    struct GridResolution
    {
        double delay = 0.0;   // s, 1 / (M delta_f)
        double doppler = 0.0; // Hz, delta_f / N
    };

    struct PathTap
    {
        double delay = 0.0; // s, unquantized
        int delay_idx = 0;
        double delay_residual = 0.0; // s, delay - delay_idx * resolution
        double doppler = 0.0;        // Hz, unquantized
        int doppler_idx = 0;
        double doppler_residual = 0.0; // Hz
        Mat2c pol_gain = Mat2c::Zero();
        double power = 0.0;       // mean co-polar power share of this tap
        double large_scale = 1.0; // beta
        bool los = false;
        AngleSet angles;
    };

    inline void quantize(PathTap &tap, const GridResolution &res)
    {
        if (res.delay > 0.0)
        {
            tap.delay_idx = static_cast<int>(std::lround(tap.delay / res.delay));
            tap.delay_residual = tap.delay - tap.delay_idx * res.delay;
        }
        if (res.doppler > 0.0)
        {
            tap.doppler_idx = static_cast<int>(std::lround(tap.doppler / res.doppler));
            tap.doppler_residual = tap.doppler - tap.doppler_idx * res.doppler;
        }
    }

    // Weights LoS and NLoS parts by sqrt(K/(1+K)) and sqrt(1/(1+K)), quantizes, sorts by delay.
    // `nlos_power` is the per-cluster power that was used to build the NLoS rays.
    inline std::vector<PathTap> combined_cir(const std::optional<LosComponent> &los, std::span<const NlosRay> nlos,
                                             double rician_k, const GridResolution &res, double nlos_power = 1.0)
    {
        const RicianWeights w = rician_weights(rician_k);
        std::vector<PathTap> taps;
        taps.reserve(nlos.size() + 1);
        if (los && w.los > 0.0)
        {
            PathTap t;
            t.delay = los->delay;
            t.doppler = los->doppler;
            t.pol_gain = w.los * los->pol_gain;
            t.power = w.los * w.los;
            t.los = true;
            t.angles = los->angles;
            quantize(t, res);
            taps.push_back(t);
        }
        if (w.nlos > 0.0)
        {
            std::vector<int> rays_in_cluster;
            for (const auto &r : nlos)
            {
                if (static_cast<size_t>(r.cluster_idx) >= rays_in_cluster.size())
                    rays_in_cluster.resize(static_cast<size_t>(r.cluster_idx) + 1, 0);
                ++rays_in_cluster[static_cast<size_t>(r.cluster_idx)];
            }
            for (const auto &r : nlos)
            {
                PathTap t;
                t.delay = r.delay;
                t.doppler = r.doppler;
                t.pol_gain = w.nlos * r.pol_gain;
                t.power = w.nlos * w.nlos * nlos_power / rays_in_cluster[static_cast<size_t>(r.cluster_idx)];
                t.angles = r.angles;
                quantize(t, res);
                taps.push_back(t);
            }
        }
        std::stable_sort(taps.begin(), taps.end(),
                         [](const PathTap &a, const PathTap &b) { return a.delay < b.delay; });
        return taps;
    }

    // Sums taps that fall on the same (delay, Doppler) grid point.
    inline std::vector<PathTap> merge_resolvable(std::span<const PathTap> taps)
    {
        std::vector<PathTap> out;
        for (const auto &t : taps)
        {
            auto it = std::find_if(out.begin(), out.end(), [&](const PathTap &o)
                                   { return o.delay_idx == t.delay_idx && o.doppler_idx == t.doppler_idx; });
            if (it == out.end())
                out.push_back(t);
            else
            {
                it->pol_gain += t.large_scale / it->large_scale * t.pol_gain;
                it->power += t.power;
                it->los = it->los || t.los;
            }
        }
        std::stable_sort(out.begin(), out.end(), [](const PathTap &a, const PathTap &b)
                         { return a.delay_idx != b.delay_idx ? a.delay_idx < b.delay_idx : a.doppler_idx < b.doppler_idx; });
        return out;
    }

    // ---------- Spatial structure ----------

    inline CVec steering_vector(double theta, int n_elements, double d_over_lambda)
    {
        if (n_elements < 1)
            throw std::invalid_argument("steering vector needs >= 1 element");
        CVec a(n_elements);
        const double step = -two_pi * d_over_lambda * std::sin(theta);
        for (int i = 0; i < n_elements; ++i)
            a(i) = expj(step * i);
        return a;
    }

    // One resolvable path in the dual-polarized MIMO layout: a (2 N_R) x (2 M_T) matrix whose
    // (rx pol, tx pol) block is beta * g(rx pol, tx pol) * a_R a_T^H.
    struct MimoTap
    {
        CMat matrix;
        int delay_idx = 0;
        int doppler_idx = 0;
        int rx_elements = 1;
        int tx_elements = 1;

        CMat block(Pol rx, Pol tx) const
        {
            return matrix.block(index(rx) * rx_elements, index(tx) * tx_elements, rx_elements, tx_elements);
        }
    };

    inline std::vector<MimoTap> mimo_channel_taps(const ArrayGeometry &array, std::span<const PathTap> taps,
                                                  std::span<const AngleSet> angles_per_path)
    {
        array.validate();
        if (taps.size() != angles_per_path.size())
            throw std::invalid_argument("path and angle counts differ");
        const int nr = array.rx_elements;
        const int mt = array.tx_elements;
        std::vector<MimoTap> out;
        out.reserve(taps.size());
        for (size_t l = 0; l < taps.size(); ++l)
        {
            const AngleSet &a = angles_per_path[l];
            const CVec ar = steering_vector(ula_angle(a.eaoa, a.aaoa), nr, array.ula_spacing_over_lambda);
            const CVec at = steering_vector(ula_angle(a.eaod, a.aaod), mt, array.ula_spacing_over_lambda);
            const CMat spatial = ar * at.adjoint();
            MimoTap m;
            m.rx_elements = nr;
            m.tx_elements = mt;
            m.delay_idx = taps[l].delay_idx;
            m.doppler_idx = taps[l].doppler_idx;
            m.matrix = CMat::Zero(2 * nr, 2 * mt);
            for (Pol q : {Pol::V, Pol::H})
                for (Pol p : {Pol::V, Pol::H})
                    m.matrix.block(index(q) * nr, index(p) * mt, nr, mt) =
                        taps[l].large_scale * taps[l].pol_gain(index(q), index(p)) * spatial;
            out.push_back(std::move(m));
        }
        return out;
    }

    // ---------- Large-scale fading ----------

    // Single-slope path loss. gain_db() is the (negative) dB gain that enters beta.
    struct PathLossModel
    {
        double pl0_db = 37.5; // loss at the reference distance
        double exponent = 1.8;
        double d0 = 1.0; // m

        double gain_db(double d) const
        {
            if (!(d > 0.0))
                throw std::domain_error("path-loss singularity");
            return -(pl0_db + 10.0 * exponent * std::log10(d / d0));
        }
    };

    struct LargeScaleState
    {
        double path_loss_db = 0.0; // stored as a negative dB gain
        double shadow_sigma_db = 0.0;
        double shadow_sample = 0.0;
        double beta = 1.0;
    };

    inline LargeScaleState compose_large_scale(double path_loss_db, double shadow_sigma_db, double shadow_sample)
    {
        if (!(shadow_sigma_db >= 0.0))
            throw std::invalid_argument("shadowing standard deviation must be >= 0");
        return {path_loss_db, shadow_sigma_db, shadow_sample,
                std::pow(10.0, path_loss_db / 10.0) * std::pow(10.0, shadow_sigma_db * shadow_sample / 10.0)};
    }

    inline LargeScaleState large_scale_beta(const PathLossModel &model, double distance, double shadow_sigma_db,
                                            Rng &rng)
    {
        std::normal_distribution<double> n01(0.0, 1.0);
        const double pl = model.gain_db(distance);
        return compose_large_scale(pl, shadow_sigma_db, n01(rng));
    }

    inline LargeScaleState large_scale_beta(const PathLossModel &model, const TunnelScenario &s,
                                            double shadow_sigma_db, Rng &rng, double t)
    {
        return large_scale_beta(model, los_geometry(s, t).distance, shadow_sigma_db, rng);
    }

    // ---------- One full link realization ----------

    struct LinkConfig
    {
        int cluster_count = 3;
        int rays_per_cluster = 20;
        ClusterDistributions clusters;
        LinkPatterns patterns;
        GridResolution resolution;
    };

    struct LinkRealization
    {
        LosGeometry geometry;
        std::vector<ClusterRay> rays;
        std::vector<PathTap> taps; // per-ray taps, Rician-weighted, quantized, sorted by delay
    };

    // Draws clusters around the LoS directions and assembles the Rician-weighted taps of one AP-TAU link.
    inline LinkRealization generate_link(const TunnelScenario &s, const LinkConfig &cfg, const Vec3 &ap,
                                         const Vec3 &tau, double t, Rng &rng)
    {
        LinkRealization out;
        out.geometry = los_geometry(ap, tau, s);

        ClusterDistributions d = cfg.clusters;
        d.dep_azimuth_center += out.geometry.angles.los_dep_azim;
        d.arr_azimuth_center += out.geometry.angles.los_arr_azim - pi;
        out.rays = draw_clusters(rng, cfg.cluster_count, cfg.rays_per_cluster, d);

        const double cluster_power = 1.0 / cfg.cluster_count;
        const LosComponent los = los_cir(s, out.geometry, cfg.patterns, LosPhases::draw(rng), t);
        const auto nlos = nlos_cir(out.rays, cfg.patterns, cluster_power, s, out.geometry.distance, t);
        out.taps = combined_cir(los, nlos, s.rician_k, cfg.resolution, cluster_power);
        return out;
    }
} // namespace dpmimo::gbsm

#endif
