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


#ifndef DPMIMO_SIM_CONFIG_HPP
#define DPMIMO_SIM_CONFIG_HPP

#include "dpmimo/estimation.hpp"
#include "dpmimo/gbsm.hpp"
#include "dpmimo/otfs.hpp"
#include "dpmimo/polarization.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

// Experiment configuration: a JSON document whose sections mirror the simulator modules.
// Omitted keys keep their defaults, unknown keys are rejected.

namespace dpmimo::sim
{
    using json = nlohmann::json;

    enum class ChannelKind
    {
        gbsm,
        single_pol,
        lcx,
        tdl
    };

    inline const char *channel_kind_name(ChannelKind k)
    {
        switch (k)
        {
        case ChannelKind::gbsm:
            return "gbsm";
        case ChannelKind::single_pol:
            return "single_pol";
        case ChannelKind::lcx:
            return "lcx";
        case ChannelKind::tdl:
            return "tdl";
        }
        return "?";
    }

    struct TdlTap
    {
        double delay = 0.0;    // s
        double power_db = 0.0; // relative
    };

    // AP / TAU deployment of one experiment point.
    struct Deployment
    {
        int ap_count = 2;       // trackside APs
        int ap_elements = 1;    // dual-polarized elements per AP
        double element_spacing_over_lambda = 0.5;
        double tau_spacing = 10.0; // m, along-train distance between consecutive TAUs
    };

    struct ChannelOptions
    {
        ChannelKind kind = ChannelKind::gbsm;
        int lcx_slots = 8;
        double lcx_pitch_over_lambda = 3.0;
        std::vector<TdlTap> tdl_taps;
    };

    struct PathLossOptions
    {
        gbsm::PathLossModel model;
        double shadow_sigma_db = 0.0;
    };

    struct PolarizationOptions
    {
        cplx rho_t = 0.1;
        cplx rho_r = 0.1;
        double xpd_db = std::numeric_limits<double>::infinity(); // template XPD, inf = neutral template

        pol::PolarizationProfile profile() const
        {
            pol::PolarizationProfile p;
            p.rho_t = rho_t;
            p.rho_r = rho_r;
            const double x = std::isinf(xpd_db) ? 1.0 : 1.0 / std::sqrt(db_to_linear(xpd_db));
            p.xpd_matrix << 1.0, x, x, 1.0;
            return p;
        }
    };

    struct PilotOptions
    {
        int pilot_len = 4;
        int coherence_len = 200;
        double ul_power = 1.0;
    };

    struct EstimationOptions
    {
        std::string csi = "lmmse"; // "lmmse" or "perfect"
        int grid_delays = 4;
        int grid_max_doppler = 2;
        int omp_atoms = 16;
        double sfs_quantile = 0.75;
        int benchmark_paths = 4;
    };

    struct PowerOptions
    {
        double snr_db = 20.0;
        double ul = 1.0;
        double dl = 1.0;

        double noise() const { return ul / db_to_linear(snr_db); }
    };

    struct SweepOptions
    {
        std::string param = "snr";
        std::vector<double> values{-10.0, 0.0, 10.0, 20.0, 30.0};
    };

    struct ExperimentOptions
    {
        std::vector<std::string> metrics{"se_mmse", "se_mr", "se_zf"};
        int users = 2;
        SweepOptions sweep;
        int trials = 200;
        std::uint64_t seed = 1;
        std::string output_dir = "results";
        int threads = 1;
        double observation_time = 0.3; // s, snapshot times drawn uniformly in [0, observation_time]
    };

    struct ExperimentConfig
    {
        gbsm::TunnelScenario scenario;
        gbsm::ArrayGeometry array;
        Deployment deployment;
        otfs::OtfsFrameConfig frame;
        PolarizationOptions polarization;
        gbsm::LinkConfig link;
        PathLossOptions path_loss;
        PilotOptions pilot;
        est::PasceParams pasce;
        EstimationOptions estimation;
        PowerOptions power;
        ChannelOptions channel;
        ExperimentOptions experiment;

        void validate() const;
    };

    inline const std::vector<std::string> &known_metrics()
    {
        static const std::vector<std::string> m{"se_mmse",   "se_mr",    "se_zf",    "se_closed_ul", "se_closed_dl",
                                                "nmse_pasce", "nmse_omp", "nmse_sfs", "cond_db",      "cond_block_db",
                                                "xpd_db",    "xpc_abs"};
        return m;
    }

    inline const std::vector<std::string> &known_sweep_params()
    {
        static const std::vector<std::string> p{"snr", "antennas", "rho", "rician_k_db", "speed_kmh", "xpr_mu_db", "users"};
        return p;
    }

    inline void ExperimentConfig::validate() const
    {
        scenario.validate();
        array.validate();
        frame.validate();
        polarization.profile().validate();
        pasce.validate();
        auto fail = [](const std::string &field, const std::string &what)
        { throw std::invalid_argument(field + " " + what); };

        if (deployment.ap_count < 1)
            fail("array.ap_count", "must be >= 1");
        if (deployment.ap_elements < 1)
            fail("array.ap_elements", "must be >= 1");
        if (!(deployment.element_spacing_over_lambda > 0.0))
            fail("array.element_spacing_over_lambda", "must be > 0");
        if (!(deployment.tau_spacing >= 0.0))
            fail("array.tau_spacing", "must be >= 0");
        if (link.cluster_count < 1)
            fail("clusters.count", "must be >= 1");
        if (link.rays_per_cluster < 1)
            fail("clusters.rays_per_cluster", "must be >= 1");
        if (!(link.clusters.xpr_sigma_db >= 0.0))
            fail("clusters.xpr_sigma_db", "must be >= 0");
        if (!(path_loss.shadow_sigma_db >= 0.0))
            fail("path_loss.shadow_sigma_db", "must be >= 0");
        if (!(path_loss.model.d0 > 0.0))
            fail("path_loss.d0", "must be > 0");
        if (pilot.pilot_len < 1)
            fail("pilot.pilot_len", "must be >= 1");
        if (pilot.coherence_len < pilot.pilot_len)
            fail("pilot.coherence_len", "must be >= pilot.pilot_len");
        if (!(pilot.ul_power >= 0.0))
            fail("pilot.ul_power", "must be >= 0");
        if (estimation.csi != "lmmse" && estimation.csi != "perfect")
            fail("estimation.csi", "must be \"lmmse\" or \"perfect\"");
        if (estimation.grid_delays < 1 || estimation.grid_delays > frame.delay_bins)
            fail("estimation.grid_delays", "must be in [1, frame.delay_bins]");
        if (estimation.grid_max_doppler < 0 || 2 * estimation.grid_max_doppler + 1 > frame.doppler_bins)
            fail("estimation.grid_max_doppler", "must satisfy 2 max + 1 <= frame.doppler_bins");
        if (estimation.omp_atoms < 1)
            fail("estimation.omp_atoms", "must be >= 1");
        if (!(estimation.sfs_quantile >= 0.0 && estimation.sfs_quantile < 1.0))
            fail("estimation.sfs_quantile", "must be in [0, 1)");
        if (estimation.benchmark_paths < 1)
            fail("estimation.benchmark_paths", "must be >= 1");
        if (!(power.ul > 0.0) || !(power.dl > 0.0))
            fail("power.ul", "and power.dl must be > 0");
        if (!std::isfinite(power.snr_db))
            fail("power.snr_db", "must be finite");
        if (channel.lcx_slots < 1)
            fail("channel.lcx_slots", "must be >= 1");
        if (!(channel.lcx_pitch_over_lambda > 0.0))
            fail("channel.lcx_pitch_over_lambda", "must be > 0");
        if (experiment.users < 1)
            fail("experiment.users", "must be >= 1");
        if (2 * experiment.users > pilot.pilot_len)
            fail("pilot.pilot_len", "must be >= 2 * experiment.users for orthogonal pilots");
        if (experiment.trials < 1)
            fail("experiment.trials", "must be >= 1");
        if (experiment.threads < 1)
            fail("experiment.threads", "must be >= 1");
        if (!(experiment.observation_time >= 0.0))
            fail("experiment.observation_time", "must be >= 0");
        if (experiment.metrics.empty())
            fail("experiment.metrics", "must not be empty");
        for (const auto &m : experiment.metrics)
            if (std::find(known_metrics().begin(), known_metrics().end(), m) == known_metrics().end())
                fail("experiment.metrics", "contains unknown metric '" + m + "'");
        if (experiment.sweep.values.empty())
            fail("experiment.sweep.values", "must not be empty");
        if (std::find(known_sweep_params().begin(), known_sweep_params().end(), experiment.sweep.param) ==
            known_sweep_params().end())
            fail("experiment.sweep.param", "is unknown ('" + experiment.sweep.param + "')");
    }

    // ---------- JSON mapping ----------

    namespace detail
    {
        // Reads the keys of one section, rejecting anything not consumed.
        class Section
        {
          public:
            Section(const json &j, std::string name) : j_(j), name_(std::move(name))
            {
                if (!j_.is_object())
                    throw std::invalid_argument("section '" + name_ + "' must be an object");
            }

            template <typename T>
            void get(const char *key, T &value)
            {
                seen_.insert(key);
                if (!j_.contains(key))
                    return;
                try
                {
                    value = j_.at(key).get<T>();
                }
                catch (const json::exception &)
                {
                    throw std::invalid_argument("invalid value for " + field(key));
                }
            }

            void get_double_or_inf(const char *key, double &value)
            {
                seen_.insert(key);
                if (!j_.contains(key))
                    return;
                const json &v = j_.at(key);
                if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf"))
                    value = std::numeric_limits<double>::infinity();
                else if (v.is_number())
                    value = v.get<double>();
                else
                    throw std::invalid_argument("invalid value for " + field(key));
            }

            void get_complex(const char *key, cplx &value)
            {
                seen_.insert(key);
                if (!j_.contains(key))
                    return;
                const json &v = j_.at(key);
                if (v.is_number())
                    value = v.get<double>();
                else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
                    value = {v[0].get<double>(), v[1].get<double>()};
                else
                    throw std::invalid_argument("invalid value for " + field(key));
            }

            const json *sub(const char *key)
            {
                seen_.insert(key);
                return j_.contains(key) ? &j_.at(key) : nullptr;
            }

            void finish() const
            {
                for (auto it = j_.begin(); it != j_.end(); ++it)
                    if (!seen_.count(it.key()))
                        throw std::invalid_argument("unknown key '" + field(it.key()) + "'");
            }

            std::string field(const std::string &key) const { return name_.empty() ? key : name_ + "." + key; }

          private:
            const json &j_;
            std::string name_;
            std::set<std::string> seen_;
        };

        inline json complex_to_json(cplx c)
        {
            if (c.imag() == 0.0)
                return c.real();
            return json::array({c.real(), c.imag()});
        }
    } // namespace detail

    inline ExperimentConfig config_from_json(const json &root)
    {
        ExperimentConfig c;
        if (root.is_null())
            return c;
        detail::Section top(root, "");

        if (const json *j = top.sub("scenario"))
        {
            detail::Section s(*j, "scenario");
            auto &x = c.scenario;
            s.get("tunnel_height", x.tunnel_height);
            s.get("tunnel_width", x.tunnel_width);
            s.get("tau_height", x.tau_height);
            s.get("ap_height", x.ap_height);
            s.get("ap_track_offset", x.ap_track_offset);
            s.get("ap_spacing", x.ap_spacing);
            s.get("train_speed", x.train_speed);
            s.get("carrier_freq", x.carrier_freq);
            s.get("bandwidth", x.bandwidth);
            s.get("initial_distance", x.initial_distance);
            s.get("rician_k", x.rician_k);
            s.get("wave_speed", x.wave_speed);
            s.finish();
        }
        if (const json *j = top.sub("array"))
        {
            detail::Section s(*j, "array");
            s.get("tx_elements", c.array.tx_elements);
            s.get("rx_elements", c.array.rx_elements);
            s.get("tx_spacing", c.array.tx_spacing);
            s.get("rx_spacing", c.array.rx_spacing);
            s.get("ula_spacing_over_lambda", c.array.ula_spacing_over_lambda);
            s.get("ap_count", c.deployment.ap_count);
            s.get("ap_elements", c.deployment.ap_elements);
            s.get("element_spacing_over_lambda", c.deployment.element_spacing_over_lambda);
            s.get("tau_spacing", c.deployment.tau_spacing);
            s.finish();
        }
        if (const json *j = top.sub("frame"))
        {
            detail::Section s(*j, "frame");
            s.get("delay_bins", c.frame.delay_bins);
            s.get("doppler_bins", c.frame.doppler_bins);
            s.get("subcarrier_spacing", c.frame.subcarrier_spacing);
            s.get("cp_length", c.frame.cp_length);
            std::string mode = c.frame.cp_mode == otfs::CpMode::frame ? "frame" : "per_block";
            s.get("cp_mode", mode);
            if (mode == "per_block")
                c.frame.cp_mode = otfs::CpMode::per_block;
            else if (mode == "frame")
                c.frame.cp_mode = otfs::CpMode::frame;
            else
                throw std::invalid_argument("invalid value for frame.cp_mode");
            s.finish();
        }
        if (const json *j = top.sub("polarization"))
        {
            detail::Section s(*j, "polarization");
            s.get_complex("rho_t", c.polarization.rho_t);
            s.get_complex("rho_r", c.polarization.rho_r);
            s.get_double_or_inf("xpd_db", c.polarization.xpd_db);
            s.finish();
        }
        if (const json *j = top.sub("clusters"))
        {
            detail::Section s(*j, "clusters");
            auto &d = c.link.clusters;
            s.get("count", c.link.cluster_count);
            s.get("rays_per_cluster", c.link.rays_per_cluster);
            s.get("azimuth_half_width", d.azimuth_half_width);
            s.get("elevation_min", d.elevation_min);
            s.get("elevation_max", d.elevation_max);
            s.get("ray_spread", d.ray_spread);
            s.get("scatter_dist_min", d.scatter_dist_min);
            s.get("scatter_dist_max", d.scatter_dist_max);
            s.get("xpr_mu_db", d.xpr_mu_db);
            s.get("xpr_sigma_db", d.xpr_sigma_db);
            s.get("delay_correction", d.delay_correction);
            s.finish();
        }
        if (const json *j = top.sub("path_loss"))
        {
            detail::Section s(*j, "path_loss");
            s.get("pl0_db", c.path_loss.model.pl0_db);
            s.get("exponent", c.path_loss.model.exponent);
            s.get("d0", c.path_loss.model.d0);
            s.get("shadow_sigma_db", c.path_loss.shadow_sigma_db);
            s.finish();
        }
        if (const json *j = top.sub("pilot"))
        {
            detail::Section s(*j, "pilot");
            s.get("pilot_len", c.pilot.pilot_len);
            s.get("coherence_len", c.pilot.coherence_len);
            s.get("ul_power", c.pilot.ul_power);
            s.finish();
        }
        if (const json *j = top.sub("pasce"))
        {
            detail::Section s(*j, "pasce");
            s.get("sparsity", c.pasce.sparsity);
            s.get("epsilon", c.pasce.epsilon);
            s.get("max_iter", c.pasce.max_iter);
            s.get("reduction_factor", c.pasce.reduction_factor);
            s.get("threshold", c.pasce.threshold);
            s.finish();
        }
        if (const json *j = top.sub("estimation"))
        {
            detail::Section s(*j, "estimation");
            s.get("csi", c.estimation.csi);
            s.get("grid_delays", c.estimation.grid_delays);
            s.get("grid_max_doppler", c.estimation.grid_max_doppler);
            s.get("omp_atoms", c.estimation.omp_atoms);
            s.get("sfs_quantile", c.estimation.sfs_quantile);
            s.get("benchmark_paths", c.estimation.benchmark_paths);
            s.finish();
        }
        if (const json *j = top.sub("power"))
        {
            detail::Section s(*j, "power");
            s.get("snr_db", c.power.snr_db);
            s.get("ul", c.power.ul);
            s.get("dl", c.power.dl);
            s.finish();
        }
        if (const json *j = top.sub("channel"))
        {
            detail::Section s(*j, "channel");
            std::string kind = channel_kind_name(c.channel.kind);
            s.get("kind", kind);
            if (kind == "gbsm")
                c.channel.kind = ChannelKind::gbsm;
            else if (kind == "single_pol")
                c.channel.kind = ChannelKind::single_pol;
            else if (kind == "lcx")
                c.channel.kind = ChannelKind::lcx;
            else if (kind == "tdl")
                c.channel.kind = ChannelKind::tdl;
            else
                throw std::invalid_argument("invalid value for channel.kind");
            s.get("lcx_slots", c.channel.lcx_slots);
            s.get("lcx_pitch_over_lambda", c.channel.lcx_pitch_over_lambda);
            if (const json *taps = s.sub("tdl_taps"))
            {
                if (!taps->is_array())
                    throw std::invalid_argument("invalid value for channel.tdl_taps");
                for (const auto &t : *taps)
                {
                    if (!t.is_array() || t.size() != 2 || !t[0].is_number() || !t[1].is_number())
                        throw std::invalid_argument("invalid value for channel.tdl_taps");
                    c.channel.tdl_taps.push_back({t[0].get<double>(), t[1].get<double>()});
                }
            }
            s.finish();
        }
        if (const json *j = top.sub("experiment"))
        {
            detail::Section s(*j, "experiment");
            auto &e = c.experiment;
            s.get("metrics", e.metrics);
            s.get("users", e.users);
            s.get("trials", e.trials);
            s.get("seed", e.seed);
            s.get("output_dir", e.output_dir);
            s.get("threads", e.threads);
            s.get("observation_time", e.observation_time);
            if (const json *sw = s.sub("sweep"))
            {
                detail::Section ss(*sw, "experiment.sweep");
                ss.get("param", e.sweep.param);
                ss.get("values", e.sweep.values);
                ss.finish();
            }
            s.finish();
        }
        top.finish();
        c.validate();
        return c;
    }

    inline json config_to_json(const ExperimentConfig &c)
    {
        const auto &sc = c.scenario;
        const auto &d = c.link.clusters;
        json tdl = json::array();
        for (const auto &t : c.channel.tdl_taps)
            tdl.push_back(json::array({t.delay, t.power_db}));
        json xpd = std::isinf(c.polarization.xpd_db) ? json("inf") : json(c.polarization.xpd_db);
        return json{
            {"scenario",
             {{"tunnel_height", sc.tunnel_height},
              {"tunnel_width", sc.tunnel_width},
              {"tau_height", sc.tau_height},
              {"ap_height", sc.ap_height},
              {"ap_track_offset", sc.ap_track_offset},
              {"ap_spacing", sc.ap_spacing},
              {"train_speed", sc.train_speed},
              {"carrier_freq", sc.carrier_freq},
              {"bandwidth", sc.bandwidth},
              {"initial_distance", sc.initial_distance},
              {"rician_k", sc.rician_k},
              {"wave_speed", sc.wave_speed}}},
            {"array",
             {{"tx_elements", c.array.tx_elements},
              {"rx_elements", c.array.rx_elements},
              {"tx_spacing", c.array.tx_spacing},
              {"rx_spacing", c.array.rx_spacing},
              {"ula_spacing_over_lambda", c.array.ula_spacing_over_lambda},
              {"ap_count", c.deployment.ap_count},
              {"ap_elements", c.deployment.ap_elements},
              {"element_spacing_over_lambda", c.deployment.element_spacing_over_lambda},
              {"tau_spacing", c.deployment.tau_spacing}}},
            {"frame",
             {{"delay_bins", c.frame.delay_bins},
              {"doppler_bins", c.frame.doppler_bins},
              {"subcarrier_spacing", c.frame.subcarrier_spacing},
              {"cp_length", c.frame.cp_length},
              {"cp_mode", c.frame.cp_mode == otfs::CpMode::frame ? "frame" : "per_block"}}},
            {"polarization",
             {{"rho_t", detail::complex_to_json(c.polarization.rho_t)},
              {"rho_r", detail::complex_to_json(c.polarization.rho_r)},
              {"xpd_db", xpd}}},
            {"clusters",
             {{"count", c.link.cluster_count},
              {"rays_per_cluster", c.link.rays_per_cluster},
              {"azimuth_half_width", d.azimuth_half_width},
              {"elevation_min", d.elevation_min},
              {"elevation_max", d.elevation_max},
              {"ray_spread", d.ray_spread},
              {"scatter_dist_min", d.scatter_dist_min},
              {"scatter_dist_max", d.scatter_dist_max},
              {"xpr_mu_db", d.xpr_mu_db},
              {"xpr_sigma_db", d.xpr_sigma_db},
              {"delay_correction", d.delay_correction}}},
            {"path_loss",
             {{"pl0_db", c.path_loss.model.pl0_db},
              {"exponent", c.path_loss.model.exponent},
              {"d0", c.path_loss.model.d0},
              {"shadow_sigma_db", c.path_loss.shadow_sigma_db}}},
            {"pilot",
             {{"pilot_len", c.pilot.pilot_len}, {"coherence_len", c.pilot.coherence_len}, {"ul_power", c.pilot.ul_power}}},
            {"pasce",
             {{"sparsity", c.pasce.sparsity},
              {"epsilon", c.pasce.epsilon},
              {"max_iter", c.pasce.max_iter},
              {"reduction_factor", c.pasce.reduction_factor},
              {"threshold", c.pasce.threshold}}},
            {"estimation",
             {{"csi", c.estimation.csi},
              {"grid_delays", c.estimation.grid_delays},
              {"grid_max_doppler", c.estimation.grid_max_doppler},
              {"omp_atoms", c.estimation.omp_atoms},
              {"sfs_quantile", c.estimation.sfs_quantile},
              {"benchmark_paths", c.estimation.benchmark_paths}}},
            {"power", {{"snr_db", c.power.snr_db}, {"ul", c.power.ul}, {"dl", c.power.dl}}},
            {"channel",
             {{"kind", channel_kind_name(c.channel.kind)},
              {"lcx_slots", c.channel.lcx_slots},
              {"lcx_pitch_over_lambda", c.channel.lcx_pitch_over_lambda},
              {"tdl_taps", tdl}}},
            {"experiment",
             {{"metrics", c.experiment.metrics},
              {"users", c.experiment.users},
              {"sweep", {{"param", c.experiment.sweep.param}, {"values", c.experiment.sweep.values}}},
              {"trials", c.experiment.trials},
              {"seed", c.experiment.seed},
              {"output_dir", c.experiment.output_dir},
              {"threads", c.experiment.threads},
              {"observation_time", c.experiment.observation_time}}}};
    }

    inline ExperimentConfig parse_config(const std::string &text)
    {
        std::string trimmed = text;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
        if (trimmed.empty())
            return config_from_json(json());
        json j;
        try
        {
            j = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            throw std::invalid_argument(std::string("config parse error: ") + e.what());
        }
        return config_from_json(j);
    }

    inline ExperimentConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    // FNV-1a over the canonical (sorted-key) JSON dump, excluding the fields that do not
    // change the numbers: seed, output_dir and threads.
    inline std::uint64_t config_hash(const ExperimentConfig &c)
    {
        json j = config_to_json(c);
        j["experiment"].erase("seed");
        j["experiment"].erase("output_dir");
        j["experiment"].erase("threads");
        const std::string s = j.dump();
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : s)
        {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    // Applies one sweep value to a copy of the configuration.
    inline ExperimentConfig apply_sweep(ExperimentConfig c, const std::string &param, double value)
    {
        if (param == "snr")
            c.power.snr_db = value;
        else if (param == "antennas")
        {
            // n x n: n/2 single-element dual-polarized APs serving n/2 dual-polarized TAUs.
            const int n = static_cast<int>(std::lround(value));
            if (n < 2 || n % 2 != 0 || std::abs(value - n) > 1e-9)
                throw std::invalid_argument("antennas sweep values must be even integers >= 2");
            c.deployment.ap_count = n / 2;
            c.deployment.ap_elements = 1;
            c.experiment.users = n / 2;
            c.pilot.pilot_len = std::max(c.pilot.pilot_len, n);
        }
        else if (param == "rho")
        {
            c.polarization.rho_t = value;
            c.polarization.rho_r = value;
        }
        else if (param == "rician_k_db")
            c.scenario.rician_k = db_to_linear(value);
        else if (param == "speed_kmh")
            c.scenario.train_speed = value / 3.6;
        else if (param == "xpr_mu_db")
            c.link.clusters.xpr_mu_db = value;
        else if (param == "users")
        {
            const int k = static_cast<int>(std::lround(value));
            if (k < 1 || std::abs(value - k) > 1e-9)
                throw std::invalid_argument("users sweep values must be positive integers");
            c.experiment.users = k;
        }
        else
            throw std::invalid_argument("unknown sweep parameter '" + param + "'");
        c.validate();
        return c;
    }

    // "a:step:b" (inclusive) or a comma-separated list.
    inline std::vector<double> parse_values(const std::string &spec)
    {
        std::vector<double> out;
        auto num = [&](const std::string &s)
        {
            size_t pos = 0;
            double v = 0.0;
            try
            {
                v = std::stod(s, &pos);
            }
            catch (const std::exception &)
            {
                throw std::invalid_argument("invalid sweep value '" + s + "'");
            }
            if (pos != s.size())
                throw std::invalid_argument("invalid sweep value '" + s + "'");
            return v;
        };
        if (spec.find(':') != std::string::npos)
        {
            std::vector<std::string> parts;
            std::stringstream ss(spec);
            std::string item;
            while (std::getline(ss, item, ':'))
                parts.push_back(item);
            if (parts.size() != 3)
                throw std::invalid_argument("range must be start:step:stop");
            const double a = num(parts[0]), step = num(parts[1]), b = num(parts[2]);
            if (!(step > 0.0) || b < a)
                throw std::invalid_argument("range needs step > 0 and stop >= start");
            const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
            for (long i = 0; i <= n; ++i)
                out.push_back(a + static_cast<double>(i) * step);
            return out;
        }
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(num(item));
        if (out.empty())
            throw std::invalid_argument("empty value list");
        return out;
    }
} // namespace dpmimo::sim

#endif
