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


#ifndef DPMIMO_SIM_EXPERIMENT_HPP
#define DPMIMO_SIM_EXPERIMENT_HPP

#include "dpmimo/estimation.hpp"
#include "dpmimo/polarization.hpp"
#include "dpmimo/precoding.hpp"
#include "dpmimo/sim/channels.hpp"
#include "dpmimo/sim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace dpmimo::sim
{
    inline constexpr const char *code_version = "0.1.0";

    struct ResultRow
    {
        double sweep = 0.0;
        std::string metric;
        double mean = 0.0;
        double ci95 = 0.0;
        int trials = 0;
    };

    struct ResultTable
    {
        std::vector<ResultRow> rows;
        std::uint64_t config_hash = 0;
        std::uint64_t seed = 0;
        std::string code_version = sim::code_version;
        std::string sweep_param;
        std::string channel;
        std::vector<std::string> failures;
        std::string timestamp; // empty when suppressed
    };

    // ---------- Per-trial metrics ----------

    struct NmseTriple
    {
        double pasce = 0.0;
        double omp = 0.0;
        double sfs = 0.0;
    };

    // Polarized channel vector of the user-0 / AP-0 link on the dictionary grid (uplink: AP port is rx).
    inline CVec grid_channel(std::span<const gbsm::PathTap> taps, const est::Dictionary &d)
    {
        CVec h = CVec::Zero(d.phi.cols());
        for (const auto &t : taps)
        {
            const auto it = std::find(d.grid.begin(), d.grid.end(), est::GridPoint{t.delay_idx, t.doppler_idx});
            if (it == d.grid.end())
                continue;
            const int g = static_cast<int>(it - d.grid.begin());
            for (int b = 0; b < 4; ++b)
            {
                const auto pp = est::pair_order[static_cast<size_t>(b)];
                h(d.column(b, g, 0)) += t.pol_gain(index(pp.tx), index(pp.rx));
            }
        }
        return h;
    }

    inline NmseTriple estimation_benchmark(const ExperimentConfig &c, std::span<const gbsm::PathTap> taps, Rng &rng)
    {
        const auto grid = est::make_grid(c.estimation.grid_delays, c.estimation.grid_max_doppler);
        const CMat pilots = est::orthogonal_pilots(rng, c.frame.mn(), 2);
        const CMat r = CMat::Identity(1, 1);
        const est::Dictionary d =
            est::build_dictionary(pilots.col(0), pilots.col(1), grid, r, Eigen::Matrix2d::Ones(), c.frame);
        const CVec truth = grid_channel(taps, d);
        if (!(truth.squaredNorm() > 0.0))
            throw std::domain_error("no channel energy on the dictionary grid");
        const CVec clean = d.phi * truth;
        const double noise = est::noise_power_for_snr(clean, c.power.snr_db);
        const CVec y = clean + complex_normal_vector(rng, clean.size(), noise);
        const double floor = std::sqrt(static_cast<double>(y.size()) * noise);

        est::PasceParams p = c.pasce;
        p.reg = noise;
        p.residual_floor = floor;
        NmseTriple out;
        out.pasce = est::nmse(est::pasce(y, d, p).h_s, truth);
        out.omp = est::nmse(est::omp_baseline(y, d, c.estimation.omp_atoms, c.pasce.epsilon, floor).h_s, truth);
        out.sfs = est::nmse(est::sfs_baseline(y, d, c.estimation.sfs_quantile).h_s, truth);
        return out;
    }

    struct PolStats
    {
        double xpd_db = 0.0;
        double xpc_abs = 0.0;
    };

    // XPD / XPC of the user-0 / AP-0 block over independent link draws.
    inline PolStats polarization_stats(const ExperimentConfig &c, Rng &rng, int samples = 64)
    {
        ExperimentConfig one = c;
        one.experiment.users = 1;
        one.deployment.ap_count = 1;
        one.deployment.ap_elements = 1;
        std::vector<Mat2c> blocks;
        blocks.reserve(static_cast<size_t>(samples));
        for (int i = 0; i < samples; ++i)
        {
            const double t = uniform(rng, 0.0, c.experiment.observation_time);
            blocks.push_back(draw_channel(one, t, rng).blocks.front());
        }
        const auto xpd = pol::xpd_estimate(blocks);
        PolStats s;
        const double co = 0.5 * (xpd.v + xpd.h);
        s.xpd_db = linear_to_db(co);
        s.xpc_abs = std::abs(pol::xpc_estimate(blocks));
        return s;
    }

    inline double to_db20(double x) { return 20.0 * std::log10(x); }

    // All requested metrics of one trial, in the order of config.experiment.metrics.
    inline std::vector<double> run_trial(const ExperimentConfig &c, Rng &rng)
    {
        const auto &metrics = c.experiment.metrics;
        auto wants = [&](const char *m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
        std::map<std::string, double> value;

        const double t = uniform(rng, 0.0, c.experiment.observation_time);
        const ChannelDraw draw = draw_channel(c, t, rng);
        const int k = c.experiment.users;
        const double noise = c.power.noise();
        const double prelog = precoding::prelog(c.pilot.pilot_len, c.pilot.coherence_len);

        precoding::PowerAllocation power = precoding::PowerAllocation::equal(k, c.power.ul, noise);
        power.dl = RVec::Constant(2 * k, c.power.dl);
        for (int s = 0; s < 2 * k; ++s)
            if (!draw.stream_active[static_cast<size_t>(s)])
            {
                power.ul(s) = 0.0;
                power.dl(s) = 0.0;
            }

        const bool need_se = wants("se_mmse") || wants("se_mr") || wants("se_zf") || wants("se_closed_ul") ||
                             wants("se_closed_dl");
        if (need_se)
        {
            const CsiEstimate csi =
                estimate_csi(draw, c.pilot.ul_power, c.pilot.pilot_len, noise, c.estimation.csi == "perfect", rng);
            const precoding::Realization real{draw.h, csi.h_est};
            for (auto [name, scheme] : {std::pair{"se_mmse", precoding::Scheme::mmse},
                                        std::pair{"se_mr", precoding::Scheme::mr},
                                        std::pair{"se_zf", precoding::Scheme::zf}})
                if (wants(name))
                    value[name] = precoding::padic_se(real, power, scheme, prelog).sum();
            if (wants("se_closed_ul") || wants("se_closed_dl"))
            {
                std::vector<precoding::StreamStatistics> stats;
                for (int s = 0; s < 2 * k; ++s)
                    stats.push_back({draw.spatial_corr[static_cast<size_t>(s)], csi.cov[static_cast<size_t>(s)].gamma,
                                     csi.cov[static_cast<size_t>(s)].c_err});
                if (wants("se_closed_ul"))
                    value["se_closed_ul"] = precoding::se_uplink_closed(power.ul, stats, noise, prelog).sum();
                if (wants("se_closed_dl"))
                    value["se_closed_dl"] = precoding::se_downlink_closed(power.dl, stats, noise, prelog).sum();
            }
        }
        if (wants("cond_db") || wants("cond_block_db"))
        {
            std::vector<int> act;
            for (int s = 0; s < 2 * k; ++s)
                if (draw.stream_active[static_cast<size_t>(s)])
                    act.push_back(s);
            CMat ha(draw.h.rows(), static_cast<Eigen::Index>(act.size()));
            for (size_t i = 0; i < act.size(); ++i)
                ha.col(static_cast<Eigen::Index>(i)) = draw.h.col(act[i]);
            value["cond_db"] = to_db20(pol::condition_number(ha));
            double acc = 0.0;
            for (const auto &b : draw.blocks)
                acc += to_db20(pol::condition_number(b));
            value["cond_block_db"] = acc / static_cast<double>(draw.blocks.size());
        }
        if (wants("nmse_pasce") || wants("nmse_omp") || wants("nmse_sfs"))
        {
            const NmseTriple n = estimation_benchmark(c, draw.taps, rng);
            value["nmse_pasce"] = n.pasce;
            value["nmse_omp"] = n.omp;
            value["nmse_sfs"] = n.sfs;
        }
        if (wants("xpd_db") || wants("xpc_abs"))
        {
            const PolStats ps = polarization_stats(c, rng);
            value["xpd_db"] = ps.xpd_db;
            value["xpc_abs"] = ps.xpc_abs;
        }

        std::vector<double> out;
        out.reserve(metrics.size());
        for (const auto &m : metrics)
            out.push_back(value.at(m));
        return out;
    }

    // ---------- Sweep driver ----------

    struct PointResult
    {
        std::vector<std::vector<double>> values; // [trial][metric]
        std::string failure;
    };

    inline PointResult run_point(const ExperimentConfig &c, std::uint64_t seed, std::uint64_t sweep_index)
    {
        const int n = c.experiment.trials;
        PointResult res;
        res.values.assign(static_cast<size_t>(n), {});
        std::vector<std::string> errors(static_cast<size_t>(n));

        auto work = [&](int first, int stride)
        {
            for (int i = first; i < n; i += stride)
            {
                Rng rng(derive_seed(seed, sweep_index, static_cast<std::uint64_t>(i)));
                try
                {
                    res.values[static_cast<size_t>(i)] = run_trial(c, rng);
                }
                catch (const std::exception &e)
                {
                    errors[static_cast<size_t>(i)] = e.what();
                }
            }
        };
        const int threads = std::min(c.experiment.threads, n);
        if (threads <= 1)
            work(0, 1);
        else
        {
            std::vector<std::thread> pool;
            for (int w = 0; w < threads; ++w)
                pool.emplace_back(work, w, threads);
            for (auto &th : pool)
                th.join();
        }
        for (int i = 0; i < n; ++i)
            if (!errors[static_cast<size_t>(i)].empty())
            {
                res.failure = "trial " + std::to_string(i) + ": " + errors[static_cast<size_t>(i)];
                break;
            }
        return res;
    }

    inline void summarize(std::span<const double> v, double &mean, double &ci95)
    {
        const auto n = static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v)
            s += x;
        mean = s / n;
        double ss = 0.0;
        for (double x : v)
            ss += (x - mean) * (x - mean);
        ci95 = v.size() > 1 ? 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    }

    inline ResultTable run_experiment(const ExperimentConfig &config)
    {
        config.validate();
        ResultTable table;
        table.config_hash = config_hash(config);
        table.seed = config.experiment.seed;
        table.sweep_param = config.experiment.sweep.param;
        table.channel = channel_kind_name(config.channel.kind);

        const auto &values = config.experiment.sweep.values;
        const auto &metrics = config.experiment.metrics;
        for (size_t vi = 0; vi < values.size(); ++vi)
        {
            PointResult pr;
            try
            {
                const ExperimentConfig point = apply_sweep(config, config.experiment.sweep.param, values[vi]);
                pr = run_point(point, config.experiment.seed, vi);
            }
            catch (const std::exception &e)
            {
                pr.failure = e.what();
            }
            if (!pr.failure.empty())
            {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.17g", values[vi]);
                table.failures.push_back("sweep=" + std::string(buf) + ": " + pr.failure);
                for (const auto &m : metrics)
                    table.rows.push_back({values[vi], m, std::numeric_limits<double>::quiet_NaN(),
                                          std::numeric_limits<double>::quiet_NaN(), config.experiment.trials});
                continue;
            }
            for (size_t mi = 0; mi < metrics.size(); ++mi)
            {
                std::vector<double> v;
                v.reserve(pr.values.size());
                for (const auto &trial : pr.values)
                    v.push_back(trial[mi]);
                ResultRow row{values[vi], metrics[mi], 0.0, 0.0, static_cast<int>(v.size())};
                summarize(v, row.mean, row.ci95);
                table.rows.push_back(row);
            }
        }
        return table;
    }
} // namespace dpmimo::sim

#endif
