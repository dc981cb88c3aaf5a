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


// dpmimo command-line front end.

#include "dpmimo/dpmimo.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace dpmimo;

namespace
{
    std::string utc_timestamp()
    {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    void write_outputs(const sim::ExperimentConfig &cfg, sim::ResultTable table, const std::string &out_dir,
                       bool timestamp)
    {
        fs::create_directories(out_dir);
        if (timestamp)
            table.timestamp = utc_timestamp();
        sim::export_csv(table, (fs::path(out_dir) / "results.csv").string());
        sim::export_plotdata(table, (fs::path(out_dir) / "results.dat").string());
        sim::write_file((fs::path(out_dir) / "config.json").string(), sim::config_to_json(cfg).dump(2) + "\n");
        for (const auto &f : table.failures)
            std::cerr << "warning: " << f << '\n';
        std::cout << "wrote " << table.rows.size() << " rows to " << (fs::path(out_dir) / "results.csv").string()
                  << '\n';
    }

    struct CommonRunOptions
    {
        std::string config;
        std::uint64_t seed = 0;
        bool seed_set = false;
        std::string out;
        int threads = 0;
        int trials = 0;
        std::vector<std::string> metrics;
        bool no_timestamp = false;
    };

    void add_common(CLI::App *cmd, CommonRunOptions &o)
    {
        cmd->add_option("--seed", o.seed, "Master seed");
        cmd->add_option("--out", o.out, "Output directory");
        cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--trials", o.trials, "Monte-Carlo trials per sweep value")->check(CLI::PositiveNumber);
        cmd->add_option("--metrics", o.metrics, "Metrics to compute")->delimiter(',');
        cmd->add_flag("--no-timestamp", o.no_timestamp, "Omit the timestamp metadata line");
    }

    sim::ExperimentConfig resolve(const CommonRunOptions &o, CLI::App *cmd)
    {
        sim::ExperimentConfig cfg = o.config.empty() ? sim::parse_config("") : sim::load_config(o.config);
        if (cmd->count("--seed") > 0)
            cfg.experiment.seed = o.seed;
        if (!o.out.empty())
            cfg.experiment.output_dir = o.out;
        if (o.threads > 0)
            cfg.experiment.threads = o.threads;
        if (o.trials > 0)
            cfg.experiment.trials = o.trials;
        if (!o.metrics.empty())
            cfg.experiment.metrics = o.metrics;
        return cfg;
    }

    int estimate_demo(int m, int n, int paths, double snr_db, double xpr_db, std::uint64_t seed)
    {
        otfs::OtfsFrameConfig frame;
        frame.delay_bins = m;
        frame.doppler_bins = n;
        frame.validate();
        Rng rng(seed);
        const auto grid = est::make_grid(std::min(4, m), std::min(2, (n - 1) / 2));
        const CMat pilots = est::orthogonal_pilots(rng, frame.mn(), 2);
        const auto d = est::build_dictionary(pilots.col(0), pilots.col(1), grid, CMat::Identity(1, 1),
                                             Eigen::Matrix2d::Ones(), frame);
        const CVec truth = est::random_sparse_channel(rng, d, paths, db_to_linear(xpr_db));
        const CVec clean = d.phi * truth;
        const double noise = est::noise_power_for_snr(clean, snr_db);
        const CVec y = est::observe(truth, d, noise, rng);
        const double floor = std::sqrt(static_cast<double>(y.size()) * noise);

        est::PasceParams p;
        p.reg = noise;
        p.residual_floor = floor;
        const auto a = est::pasce(y, d, p);
        const auto b = est::omp_baseline(y, d, 4 * paths, p.epsilon, floor);
        const auto c = est::sfs_baseline(y, d, 0.75);
        std::printf("grid points: %zu, dictionary: %ld x %ld, coherence: %.4f\n", grid.size(),
                    static_cast<long>(d.phi.rows()), static_cast<long>(d.phi.cols()), est::coherence(d.phi));
        std::printf("estimator,nmse_db,support,iterations,inner_products\n");
        for (auto [name, e] : {std::pair{"pasce", &a}, std::pair{"omp", &b}, std::pair{"sfs", &c}})
            std::printf("%s,%.3f,%zu,%d,%lld\n", name, linear_to_db(est::nmse(e->h_s, truth)), e->support.size(),
                        e->iterations, static_cast<long long>(e->inner_products));
        return 0;
    }

    void histogram(std::ostream &os, const std::string &name, const std::vector<double> &v, int bins)
    {
        std::vector<double> finite;
        for (double x : v)
            if (std::isfinite(x))
                finite.push_back(x);
        if (finite.empty())
            return;
        const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
        const double lo = *lo_it;
        const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
        std::vector<int> count(static_cast<size_t>(bins), 0);
        for (double x : finite)
        {
            const int i = std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins));
            ++count[static_cast<size_t>(i)];
        }
        for (int i = 0; i < bins; ++i)
            os << name << ',' << sim::format_number(lo + (hi - lo) * i / bins) << ','
               << sim::format_number(lo + (hi - lo) * (i + 1) / bins) << ',' << count[static_cast<size_t>(i)] << '\n';
    }

    int channel_stats(const sim::ExperimentConfig &cfg, int draws, int bins, const std::string &out)
    {
        std::vector<double> cond, xpd;
        std::vector<Mat2c> first;
        for (int i = 0; i < draws; ++i)
        {
            Rng rng(derive_seed(cfg.experiment.seed, 0, static_cast<std::uint64_t>(i)));
            const double t = uniform(rng, 0.0, cfg.experiment.observation_time);
            const auto d = sim::draw_channel(cfg, t, rng);
            cond.push_back(20.0 * std::log10(pol::condition_number(d.h)));
            for (const auto &b : d.blocks)
            {
                const double co = std::norm(b(0, 0)) + std::norm(b(1, 1));
                const double cross = std::norm(b(0, 1)) + std::norm(b(1, 0));
                xpd.push_back(cross > 0.0 ? linear_to_db(co / cross) : std::numeric_limits<double>::infinity());
            }
            first.push_back(d.blocks.front());
        }
        std::ostringstream os;
        os << "# channel=" << sim::channel_kind_name(cfg.channel.kind) << '\n';
        os << "# draws=" << draws << '\n';
        const auto xe = pol::xpd_estimate(first);
        os << "# xpd_v_db=" << sim::format_number(linear_to_db(xe.v)) << '\n';
        os << "# xpd_h_db=" << sim::format_number(linear_to_db(xe.h)) << '\n';
        try
        {
            os << "# xpc_abs=" << sim::format_number(std::abs(pol::xpc_estimate(first))) << '\n';
        }
        catch (const std::domain_error &)
        {
            os << "# xpc_abs=undefined\n";
        }
        os << "quantity,bin_lo,bin_hi,count\n";
        histogram(os, "cond_db", cond, bins);
        histogram(os, "xpd_db", xpd, bins);
        if (out.empty())
            std::cout << os.str();
        else
        {
            fs::create_directories(out);
            sim::write_file((fs::path(out) / "channel_stats.csv").string(), os.str());
            std::cout << "wrote " << (fs::path(out) / "channel_stats.csv").string() << '\n';
        }
        return 0;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Dual-polarized massive-MIMO link-level simulator for rail tunnels"};
    app.require_subcommand(1);

    CommonRunOptions run_opt;
    auto *run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("--config", run_opt.config, "Config file (JSON)")->required()->check(CLI::ExistingFile);
    add_common(run, run_opt);

    CommonRunOptions sweep_opt;
    std::string sweep_param, sweep_values;
    auto *sweep = app.add_subcommand("sweep", "Run a parameter sweep");
    sweep->add_option("--config", sweep_opt.config, "Config file (JSON)")->check(CLI::ExistingFile);
    sweep->add_option("--param", sweep_param, "Sweep parameter")->required()->check(
        CLI::IsMember(sim::known_sweep_params()));
    sweep->add_option("--values", sweep_values, "Values as a:step:b or a comma list")->required();
    add_common(sweep, sweep_opt);

    int demo_m = 8, demo_n = 4, demo_paths = 3;
    double demo_snr = 20.0, demo_xpr = 8.0;
    std::uint64_t demo_seed = 1;
    auto *demo = app.add_subcommand("estimate-demo", "Compare PASCE, OMP and SFS on one random sparse channel");
    demo->add_option("-M,--delay-bins", demo_m, "Delay bins")->check(CLI::PositiveNumber);
    demo->add_option("-N,--doppler-bins", demo_n, "Doppler bins")->check(CLI::PositiveNumber);
    demo->add_option("--paths", demo_paths, "Number of propagation paths")->check(CLI::PositiveNumber);
    demo->add_option("--snr", demo_snr, "SNR in dB");
    demo->add_option("--xpr", demo_xpr, "Cross-polar ratio in dB");
    demo->add_option("--seed", demo_seed, "Seed");

    std::string stats_config, stats_out;
    int stats_draws = 1000, stats_bins = 20;
    std::uint64_t stats_seed = 1;
    auto *stats = app.add_subcommand("channel-stats", "XPD, XPC and condition-number histograms");
    stats->add_option("--config", stats_config, "Config file (JSON)")->check(CLI::ExistingFile);
    stats->add_option("--draws", stats_draws, "Channel draws")->check(CLI::Range(2, 100000000));
    stats->add_option("--bins", stats_bins, "Histogram bins")->check(CLI::PositiveNumber);
    stats->add_option("--seed", stats_seed, "Seed");
    stats->add_option("--out", stats_out, "Output directory (stdout when omitted)");

    std::string validate_path;
    auto *validate = app.add_subcommand("validate-config", "Check a config file and print the resolved config");
    validate->add_option("config", validate_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
    bool validate_quiet = false;
    validate->add_flag("-q,--quiet", validate_quiet, "Only report success or failure");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    try
    {
        if (*run)
        {
            const auto cfg = resolve(run_opt, run);
            write_outputs(cfg, sim::run_experiment(cfg), cfg.experiment.output_dir, !run_opt.no_timestamp);
        }
        else if (*sweep)
        {
            auto cfg = resolve(sweep_opt, sweep);
            cfg.experiment.sweep.param = sweep_param;
            cfg.experiment.sweep.values = sim::parse_values(sweep_values);
            cfg.validate();
            write_outputs(cfg, sim::run_experiment(cfg), cfg.experiment.output_dir, !sweep_opt.no_timestamp);
        }
        else if (*demo)
            return estimate_demo(demo_m, demo_n, demo_paths, demo_snr, demo_xpr, demo_seed);
        else if (*stats)
        {
            auto cfg = stats_config.empty() ? sim::parse_config("") : sim::load_config(stats_config);
            if (stats->count("--seed") > 0)
                cfg.experiment.seed = stats_seed;
            return channel_stats(cfg, stats_draws, stats_bins, stats_out);
        }
        else if (*validate)
        {
            const auto cfg = sim::load_config(validate_path);
            if (!validate_quiet)
                std::cout << sim::config_to_json(cfg).dump(2) << '\n';
            std::cout << "config OK\n";
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
