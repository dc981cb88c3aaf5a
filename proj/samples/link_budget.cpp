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

// Uplink link budget of a train passing two trackside APs.
//
//   sample_link_budget [config.json] [snr_db]
//
// Prints per-snapshot PADIC spectral efficiency for the three filters, then the uplink
// SINR decomposition of the MMSE combiner over all snapshots.

#include "dpmimo/dpmimo.hpp"

#include <cstdio>
#include <cstdlib>

using namespace dpmimo;

int main(int argc, char **argv)
{
    try
    {
        sim::ExperimentConfig c = argc > 1 ? sim::load_config(argv[1]) : sim::ExperimentConfig{};
        if (argc > 2)
            c.power.snr_db = std::atof(argv[2]);
        c.validate();

        const int k = c.experiment.users;
        const double noise = c.power.noise();
        const double prelog = precoding::prelog(c.pilot.pilot_len, c.pilot.coherence_len);
        auto power = precoding::PowerAllocation::equal(k, c.power.ul, noise);

        Rng rng(c.experiment.seed);
        std::vector<precoding::Realization> ensemble;
        std::printf("%8s %9s %9s %9s %9s %9s\n", "t[s]", "pos[m]", "cond[dB]", "SE mmse", "SE mr", "SE zf");
        const int snapshots = 31;
        for (int i = 0; i < snapshots; ++i)
        {
            const double t = c.experiment.observation_time * i / (snapshots - 1);
            const auto draw = sim::draw_channel(c, t, rng);
            const auto csi = sim::estimate_csi(draw, c.pilot.ul_power, c.pilot.pilot_len, noise, false, rng);
            const precoding::Realization r{draw.h, csi.h_est};
            ensemble.push_back(r);

            const double pos = gbsm::tau_position(c.scenario, t, 0.0).x();
            std::printf("%8.3f %9.2f %9.2f", t, pos, 20.0 * std::log10(pol::condition_number(draw.h)));
            for (auto s : {precoding::Scheme::mmse, precoding::Scheme::mr, precoding::Scheme::zf})
                std::printf(" %9.3f", precoding::padic_se(r, power, s, prelog).sum());
            std::printf("\n");
        }

        const auto rep = precoding::uplink_receive(ensemble, precoding::Scheme::mmse, power, rng);
        std::printf("\nMMSE uplink decomposition (linear power per stream)\n");
        std::printf("%7s %10s %10s %10s %10s %10s %9s\n", "stream", "desired", "est_err", "mui", "xpc", "noise",
                    "SINR[dB]");
        for (size_t s = 0; s < rep.simulated.size(); ++s)
        {
            const auto &b = rep.simulated[s];
            std::printf("%5zu%s %10.3e %10.3e %10.3e %10.3e %10.3e %9.2f\n", s / 2, s % 2 ? "H" : "V", b.desired,
                        b.est_error, b.mui, b.xpc, b.noise, linear_to_db(b.sinr()));
        }
        return 0;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
