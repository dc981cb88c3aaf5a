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


#ifndef DPMIMO_PRECODING_HPP
#define DPMIMO_PRECODING_HPP

#include "dpmimo/common.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

// Uplink combining, downlink precoding, spectral efficiency and the polarized-aware dynamic
// interference cancellation (PADIC) detector.
//
// Channel matrices are (AP ports) x (2 K): column 2k + p holds the channel of user k's
// polarization port p to every AP port. Streams are numbered the same way.

namespace dpmimo::precoding
{
    enum class Scheme
    {
        mmse,
        mr,
        zf
    };

    inline const char *scheme_name(Scheme s)
    {
        switch (s)
        {
        case Scheme::mmse:
            return "mmse";
        case Scheme::mr:
            return "mr";
        case Scheme::zf:
            return "zf";
        }
        return "?";
    }

    inline Scheme parse_scheme(const std::string &s)
    {
        if (s == "mmse")
            return Scheme::mmse;
        if (s == "mr")
            return Scheme::mr;
        if (s == "zf")
            return Scheme::zf;
        throw std::invalid_argument("unknown scheme '" + s + "'");
    }

    inline int stream(int user, Pol p) { return 2 * user + index(p); }

    struct PowerAllocation
    {
        RVec ul; // per stream
        RVec dl; // per stream
        double noise_ul = 1.0;
        double noise_dl = 1.0;

        static PowerAllocation equal(int users, double power, double noise)
        {
            return {RVec::Constant(2 * users, power), RVec::Constant(2 * users, power), noise, noise};
        }

        void validate(int streams) const
        {
            if (ul.size() != streams || dl.size() != streams)
                throw std::invalid_argument("power vectors must have one entry per stream");
            if ((ul.array() < 0.0).any() || (dl.array() < 0.0).any())
                throw std::invalid_argument("powers must be >= 0");
            if (!(noise_ul > 0.0) || !(noise_dl > 0.0))
                throw std::invalid_argument("noise powers must be > 0");
        }
    };

    inline int user_count(const CMat &h)
    {
        if (h.cols() == 0 || h.cols() % 2 != 0)
            throw std::invalid_argument("channel matrix must have 2 K columns");
        return static_cast<int>(h.cols() / 2);
    }

    struct PrecoderSet
    {
        Scheme scheme = Scheme::mmse;
        CMat vectors;        // one column per stream
        RVec normalization;  // scaling applied to each column
    };

    // ---------- Linear filters ----------

    // v_{k,p} = (sum_l H_l P_l H_l^H + sigma^2 I + E)^-1 h_{k,p}; E is an optional estimation-error covariance.
    inline PrecoderSet mmse_combiner(const CMat &h_est, const PowerAllocation &power,
                                     const std::optional<CMat> &error_cov = std::nullopt)
    {
        const int k = user_count(h_est);
        power.validate(2 * k);
        CMat r = h_est * power.ul.cast<cplx>().asDiagonal() * h_est.adjoint();
        r.diagonal().array() += power.noise_ul;
        if (error_cov)
            r += *error_cov;
        PrecoderSet out;
        out.scheme = Scheme::mmse;
        out.vectors = r.llt().solve(h_est);
        out.normalization = RVec::Ones(2 * k);
        return out;
    }

    // Expected squared norms of every estimated stream channel, from trace(Gamma) when given.
    inline RVec expected_norms(const CMat &h_est, std::span<const CMat> gamma)
    {
        RVec e(h_est.cols());
        for (Eigen::Index s = 0; s < h_est.cols(); ++s)
            e(s) = gamma.empty() ? h_est.col(s).squaredNorm() : gamma[static_cast<size_t>(s)].trace().real();
        return e;
    }

    // W_{k,p} = h_{k,p} / sqrt(E|h_{k,p}|^2 + sum_{l != k} sum_q E|h_{l,q}|^2), scaled by sqrt(P_dl).
    inline PrecoderSet mr_precoder(const CMat &h_est, const PowerAllocation &power, std::span<const CMat> gamma = {})
    {
        const int k = user_count(h_est);
        power.validate(2 * k);
        if (!gamma.empty() && static_cast<int>(gamma.size()) != 2 * k)
            throw std::invalid_argument("one estimate covariance per stream required");
        const RVec e = expected_norms(h_est, gamma);
        PrecoderSet out;
        out.scheme = Scheme::mr;
        out.vectors.resize(h_est.rows(), 2 * k);
        out.normalization.resize(2 * k);
        for (int u = 0; u < k; ++u)
            for (Pol p : {Pol::V, Pol::H})
            {
                const int s = stream(u, p);
                double denom = e(s);
                for (int l = 0; l < k; ++l)
                    if (l != u)
                        denom += e(stream(l, Pol::V)) + e(stream(l, Pol::H));
                if (!(denom > 0.0))
                    throw std::domain_error("zero MR normalization");
                out.normalization(s) = std::sqrt(power.dl(s) / denom);
                out.vectors.col(s) = out.normalization(s) * h_est.col(s);
            }
        return out;
    }

    // Right pseudo-inverse columns, unit-normalized, scaled by sqrt(P_dl).
    inline PrecoderSet zf_precoder(const CMat &h_est, const PowerAllocation &power)
    {
        const int k = user_count(h_est);
        power.validate(2 * k);
        if (h_est.rows() < h_est.cols())
            throw std::domain_error("ZF infeasible");
        Eigen::ColPivHouseholderQR<CMat> qr(h_est);
        qr.setThreshold(1e-10);
        if (qr.rank() < h_est.cols())
            throw std::domain_error("ZF infeasible");
        const CMat g = h_est.adjoint() * h_est;
        const CMat w = h_est * g.ldlt().solve(CMat::Identity(h_est.cols(), h_est.cols()));
        PrecoderSet out;
        out.scheme = Scheme::zf;
        out.vectors.resize(h_est.rows(), h_est.cols());
        out.normalization.resize(h_est.cols());
        for (Eigen::Index s = 0; s < h_est.cols(); ++s)
        {
            out.normalization(s) = std::sqrt(power.dl(s)) / w.col(s).norm();
            out.vectors.col(s) = out.normalization(s) * w.col(s);
        }
        return out;
    }

    inline PrecoderSet make_filters(Scheme scheme, const CMat &h_est, const PowerAllocation &power)
    {
        switch (scheme)
        {
        case Scheme::mmse:
            return mmse_combiner(h_est, power);
        case Scheme::mr:
            return mr_precoder(h_est, power);
        case Scheme::zf:
            return zf_precoder(h_est, power);
        }
        throw std::invalid_argument("unknown scheme");
    }

    // ---------- SINR bookkeeping ----------

    struct SinrBreakdown
    {
        double desired = 0.0;
        double est_error = 0.0;
        double mui = 0.0;
        double xpc = 0.0;
        double noise = 0.0;

        double interference() const { return est_error + mui + xpc + noise; }
        double sinr() const { return desired > 0.0 ? desired / interference() : 0.0; }
        double total() const { return desired + interference(); }
    };

    // One channel draw: true and estimated channels of all users.
    struct Realization
    {
        CMat h_true;
        CMat h_est;
    };

    struct LinkReport
    {
        std::vector<SinrBreakdown> simulated; // from transmitted symbols and noise
        std::vector<SinrBreakdown> formula;   // from channel moments on the same ensemble
        RVec received_power;                  // measured E|v^H y|^2 per stream
    };

    inline cplx qpsk_symbol(Rng &rng)
    {
        std::uniform_int_distribution<int> bit(0, 1);
        const double s = 1.0 / std::sqrt(2.0);
        const int b0 = bit(rng);
        const int b1 = bit(rng);
        return {b0 ? s : -s, b1 ? s : -s};
    }

    // Uplink: y = sum_s sqrt(P_s) h_s x_s + w, combined with filters built from the estimates.
    // Terms: desired uses E{v^H h} over the ensemble, est_error its fluctuation, MUI the other
    // users, XPC the same user's other port.
    inline LinkReport uplink_receive(std::span<const Realization> ensemble, Scheme scheme, const PowerAllocation &power,
                                     Rng &rng)
    {
        if (ensemble.empty())
            throw std::invalid_argument("empty ensemble");
        const int k = user_count(ensemble[0].h_true);
        const int ns = 2 * k;
        power.validate(ns);

        std::vector<PrecoderSet> filters;
        filters.reserve(ensemble.size());
        CVec mean_gain = CVec::Zero(ns);
        for (const auto &r : ensemble)
        {
            filters.push_back(make_filters(scheme, r.h_est, power));
            for (int s = 0; s < ns; ++s)
                mean_gain(s) += filters.back().vectors.col(s).dot(r.h_true.col(s));
        }
        const double n_real = static_cast<double>(ensemble.size());
        mean_gain /= n_real;

        LinkReport rep;
        rep.simulated.assign(static_cast<size_t>(ns), {});
        rep.formula.assign(static_cast<size_t>(ns), {});
        rep.received_power = RVec::Zero(ns);
        for (size_t i = 0; i < ensemble.size(); ++i)
        {
            const auto &h = ensemble[i].h_true;
            const CMat &v = filters[i].vectors;
            CVec x(ns);
            for (int s = 0; s < ns; ++s)
                x(s) = qpsk_symbol(rng);
            const CVec w = complex_normal_vector(rng, h.rows(), power.noise_ul);
            const CMat g = v.adjoint() * h; // g(s, t) = v_s^H h_t
            for (int u = 0; u < k; ++u)
                for (Pol p : {Pol::V, Pol::H})
                {
                    const int s = stream(u, p);
                    const int sx = stream(u, other(p));
                    const double ps = std::sqrt(power.ul(s));
                    const cplx desired = ps * mean_gain(s) * x(s);
                    const cplx est = ps * (g(s, s) - mean_gain(s)) * x(s);
                    cplx mui = 0.0;
                    double mui_f = 0.0;
                    for (int t = 0; t < ns; ++t)
                        if (t / 2 != u)
                        {
                            mui += std::sqrt(power.ul(t)) * g(s, t) * x(t);
                            mui_f += power.ul(t) * std::norm(g(s, t));
                        }
                    const cplx xpc = std::sqrt(power.ul(sx)) * g(s, sx) * x(sx);
                    const cplx noise = v.col(s).dot(w);

                    auto &sim = rep.simulated[static_cast<size_t>(s)];
                    sim.desired += std::norm(desired);
                    sim.est_error += std::norm(est);
                    sim.mui += std::norm(mui);
                    sim.xpc += std::norm(xpc);
                    sim.noise += std::norm(noise);
                    rep.received_power(s) += std::norm(desired + est + mui + xpc + noise);

                    auto &f = rep.formula[static_cast<size_t>(s)];
                    f.est_error += power.ul(s) * std::norm(g(s, s) - mean_gain(s));
                    f.mui += mui_f;
                    f.xpc += power.ul(sx) * std::norm(g(s, sx));
                    f.noise += power.noise_ul * v.col(s).squaredNorm();
                }
        }
        for (int s = 0; s < ns; ++s)
        {
            for (auto *b : {&rep.simulated[static_cast<size_t>(s)], &rep.formula[static_cast<size_t>(s)]})
            {
                b->desired /= n_real;
                b->est_error /= n_real;
                b->mui /= n_real;
                b->xpc /= n_real;
                b->noise /= n_real;
            }
            rep.formula[static_cast<size_t>(s)].desired = power.ul(s) * std::norm(mean_gain(s));
            rep.received_power(s) /= n_real;
        }
        return rep;
    }

    // Downlink: user port (k, p) receives h_{k,p}^H sum_s W_s x_s + n. The same user's other port
    // counts as MUI.
    inline LinkReport downlink_receive(std::span<const Realization> ensemble, Scheme scheme,
                                       const PowerAllocation &power, Rng &rng)
    {
        if (ensemble.empty())
            throw std::invalid_argument("empty ensemble");
        const int k = user_count(ensemble[0].h_true);
        const int ns = 2 * k;
        power.validate(ns);

        std::vector<PrecoderSet> prec;
        prec.reserve(ensemble.size());
        CVec mean_gain = CVec::Zero(ns);
        for (const auto &r : ensemble)
        {
            PrecoderSet w = make_filters(scheme, r.h_est, power);
            if (scheme == Scheme::mmse)
                for (int s = 0; s < ns; ++s)
                {
                    const double nrm = w.vectors.col(s).norm();
                    w.normalization(s) = std::sqrt(power.dl(s)) / nrm;
                    w.vectors.col(s) *= w.normalization(s);
                }
            for (int s = 0; s < ns; ++s)
                mean_gain(s) += r.h_true.col(s).dot(w.vectors.col(s));
            prec.push_back(std::move(w));
        }
        const double n_real = static_cast<double>(ensemble.size());
        mean_gain /= n_real;

        LinkReport rep;
        rep.simulated.assign(static_cast<size_t>(ns), {});
        rep.formula.assign(static_cast<size_t>(ns), {});
        rep.received_power = RVec::Zero(ns);
        for (size_t i = 0; i < ensemble.size(); ++i)
        {
            const auto &h = ensemble[i].h_true;
            const CMat &w = prec[i].vectors;
            CVec x(ns);
            for (int s = 0; s < ns; ++s)
                x(s) = qpsk_symbol(rng);
            const CMat g = h.adjoint() * w; // g(s, t) = h_s^H W_t
            for (int s = 0; s < ns; ++s)
            {
                const cplx desired = mean_gain(s) * x(s);
                const cplx est = (g(s, s) - mean_gain(s)) * x(s);
                cplx mui = 0.0;
                double mui_f = 0.0;
                for (int t = 0; t < ns; ++t)
                    if (t != s)
                    {
                        mui += g(s, t) * x(t);
                        mui_f += std::norm(g(s, t));
                    }
                const cplx noise = complex_normal(rng, power.noise_dl);

                auto &sim = rep.simulated[static_cast<size_t>(s)];
                sim.desired += std::norm(desired);
                sim.est_error += std::norm(est);
                sim.mui += std::norm(mui);
                sim.noise += std::norm(noise);
                rep.received_power(s) += std::norm(desired + est + mui + noise);

                auto &f = rep.formula[static_cast<size_t>(s)];
                f.est_error += std::norm(g(s, s) - mean_gain(s));
                f.mui += mui_f;
                f.noise += power.noise_dl;
            }
        }
        for (int s = 0; s < ns; ++s)
        {
            for (auto *b : {&rep.simulated[static_cast<size_t>(s)], &rep.formula[static_cast<size_t>(s)]})
            {
                b->desired /= n_real;
                b->est_error /= n_real;
                b->mui /= n_real;
                b->noise /= n_real;
            }
            rep.formula[static_cast<size_t>(s)].desired = std::norm(mean_gain(s));
            rep.received_power(s) /= n_real;
        }
        return rep;
    }

    // ---------- Closed-form spectral efficiency ----------

    // Second-order statistics of one (user, polarization) channel.
    struct StreamStatistics
    {
        CMat r;     // spatial correlation
        CMat gamma; // estimate covariance
        CMat c_err; // error covariance
    };

    inline double prelog(int pilot_len, int coherence_len)
    {
        if (pilot_len < 0 || coherence_len < 1 || pilot_len > coherence_len)
            throw std::invalid_argument("need 0 <= pilot_len <= coherence_len");
        return 1.0 - static_cast<double>(pilot_len) / coherence_len;
    }

    // stats[2k + p]; returns one SE per user.
    inline RVec se_uplink_closed(const RVec &power, std::span<const StreamStatistics> stats, double noise,
                                 double pilot_fraction)
    {
        const int ns = static_cast<int>(stats.size());
        if (ns == 0 || ns % 2 != 0 || power.size() != ns)
            throw std::invalid_argument("one statistics record and one power per stream required");
        const int k = ns / 2;
        RVec se = RVec::Zero(k);
        for (int u = 0; u < k; ++u)
            for (Pol p : {Pol::V, Pol::H})
            {
                const int s = stream(u, p);
                const auto &st = stats[static_cast<size_t>(s)];
                const double ma = static_cast<double>(st.r.rows());
                const double tg = st.gamma.trace().real() / ma;
                const double trgr = (st.r * st.gamma * st.r).trace().real() / ma;
                const double interf = power(s) * (k - 1) * trgr / ((1.0 + tg) * (1.0 + tg));
                const double err = power(s) / ma * st.c_err.trace().real();
                se(u) += std::log2(1.0 + power(s) * tg * tg / (interf + err + noise));
            }
        return pilot_fraction * se;
    }

    inline RVec se_downlink_closed(const RVec &power, std::span<const StreamStatistics> stats, double noise,
                                   double pilot_fraction)
    {
        const int ns = static_cast<int>(stats.size());
        if (ns == 0 || ns % 2 != 0 || power.size() != ns)
            throw std::invalid_argument("one statistics record and one power per stream required");
        const int k = ns / 2;
        RVec se = RVec::Zero(k);
        for (int u = 0; u < k; ++u)
            for (Pol p : {Pol::V, Pol::H})
            {
                const int s = stream(u, p);
                const auto &st = stats[static_cast<size_t>(s)];
                const double ma = static_cast<double>(st.r.rows());
                const double trg = st.gamma.trace().real();
                const double tg = trg / ma;
                const double interf =
                    trg > 0.0 ? power(s) * (k - 1) * (st.r * st.gamma * st.r).trace().real() / trg : 0.0;
                const double err = st.c_err.trace().real() / ma;
                se(u) += std::log2(1.0 + power(s) * tg * tg / (interf + err + noise));
            }
        return pilot_fraction * se;
    }

    // ---------- PADIC ----------

    // P * H_{S \ {k*}, p} H^H + sigma^2 I over the active users other than the excluded one.
    inline CMat interference_covariance(const CMat &h_est, std::span<const int> active_set, int excluded_user, Pol p,
                                        double power, double noise)
    {
        if (std::find(active_set.begin(), active_set.end(), excluded_user) == active_set.end())
            throw std::invalid_argument("excluded user is not active");
        CMat r = CMat::Zero(h_est.rows(), h_est.rows());
        for (int u : active_set)
            if (u != excluded_user)
                r += power * h_est.col(stream(u, p)) * h_est.col(stream(u, p)).adjoint();
        r.diagonal().array() += noise;
        return r;
    }

    struct Constellation
    {
        std::vector<cplx> points;

        static Constellation qpsk()
        {
            const double s = 1.0 / std::sqrt(2.0);
            return {{{s, s}, {-s, s}, {-s, -s}, {s, -s}}};
        }

        cplx slice(cplx z) const
        {
            cplx best = points.front();
            double d = std::numeric_limits<double>::infinity();
            for (const auto &c : points)
                if (std::norm(z - c) < d)
                {
                    d = std::norm(z - c);
                    best = c;
                }
            return best;
        }
    };

    struct DetectionResult
    {
        CVec symbols;                     // hard decisions per stream
        CVec soft;                        // filter outputs divided by the effective gain
        std::vector<int> order;           // processed users
        CVec residual;                    // y_r after the last stage
        std::vector<double> per_stage_power;
    };

    // Users sorted by |h_{k,V}|^2 + |h_{k,H}|^2, strongest first, lower index on ties.
    inline std::vector<int> detection_order(const CMat &h_est)
    {
        const int k = user_count(h_est);
        std::vector<int> order(static_cast<size_t>(k));
        std::iota(order.begin(), order.end(), 0);
        auto gain = [&](int u) { return h_est.col(stream(u, Pol::V)).squaredNorm() + h_est.col(stream(u, Pol::H)).squaredNorm(); };
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gain(a) > gain(b); });
        return order;
    }

    // A stream takes part in detection when it has power and a non-zero estimated channel.
    inline bool stream_active(const CMat &h_est, const RVec &power, int s)
    {
        return power(s) > 0.0 && h_est.col(s).squaredNorm() > 0.0;
    }

    // Receive filter of stream (k*, p) given the still-active users.
    inline CVec padic_filter(Scheme scheme, const CMat &h_est, std::span<const int> active, int user, Pol p,
                             const RVec &power, double noise)
    {
        const CVec h = h_est.col(stream(user, p));
        switch (scheme)
        {
        case Scheme::mr:
            return h;
        case Scheme::mmse:
        {
            CMat r = CMat::Zero(h_est.rows(), h_est.rows());
            for (int u : active)
                for (Pol q : {Pol::V, Pol::H})
                {
                    const int s = stream(u, q);
                    r += power(s) * h_est.col(s) * h_est.col(s).adjoint();
                }
            r.diagonal().array() += noise;
            return r.llt().solve(h);
        }
        case Scheme::zf:
        {
            std::vector<int> cols;
            int target = -1;
            for (int u : active)
                for (Pol q : {Pol::V, Pol::H})
                    if (stream_active(h_est, power, stream(u, q)))
                    {
                        if (u == user && q == p)
                            target = static_cast<int>(cols.size());
                        cols.push_back(stream(u, q));
                    }
            if (target < 0)
                throw std::invalid_argument("inactive stream");
            CMat ha(h_est.rows(), static_cast<Eigen::Index>(cols.size()));
            for (size_t i = 0; i < cols.size(); ++i)
                ha.col(static_cast<Eigen::Index>(i)) = h_est.col(cols[i]);
            if (ha.rows() < ha.cols())
                throw std::domain_error("ZF infeasible");
            Eigen::ColPivHouseholderQR<CMat> qr(ha);
            qr.setThreshold(1e-10);
            if (qr.rank() < ha.cols())
                throw std::domain_error("ZF infeasible");
            const CMat g = ha.adjoint() * ha;
            CVec e = CVec::Zero(ha.cols());
            e(target) = 1.0;
            return ha * g.ldlt().solve(e);
        }
        }
        throw std::invalid_argument("unknown scheme");
    }

    inline DetectionResult padic(const CVec &y, const CMat &h_est, const PowerAllocation &power, Scheme scheme,
                                 const Constellation &constellation = Constellation::qpsk())
    {
        const int k = user_count(h_est);
        power.validate(2 * k);
        if (y.size() != h_est.rows())
            throw std::invalid_argument("observation does not match the channel");

        DetectionResult out;
        out.symbols = CVec::Zero(2 * k);
        out.soft = CVec::Zero(2 * k);
        out.order = detection_order(h_est);
        out.residual = y;
        std::vector<int> active = out.order;
        if (active.empty())
            throw std::invalid_argument("empty active set");

        while (!active.empty())
        {
            const int u = active.front();
            for (Pol p : {Pol::V, Pol::H})
            {
                const int s = stream(u, p);
                if (!stream_active(h_est, power.ul, s))
                    continue;
                const CVec w = padic_filter(scheme, h_est, active, u, p, power.ul, power.noise_ul);
                const cplx gain = std::sqrt(power.ul(s)) * w.dot(h_est.col(s));
                out.soft(s) = std::abs(gain) > 0.0 ? w.dot(out.residual) / gain : cplx(0.0);
                out.symbols(s) = constellation.slice(out.soft(s));
            }
            for (Pol p : {Pol::V, Pol::H})
            {
                const int s = stream(u, p);
                out.residual -= std::sqrt(power.ul(s)) * h_est.col(s) * out.symbols(s);
            }
            out.per_stage_power.push_back(out.residual.squaredNorm());
            active.erase(active.begin());
        }
        return out;
    }

    // Post-cancellation SINR of every stream for one realization, assuming correct decisions;
    // cancelled streams leave the residual P |w^H (h - h_est)|^2.
    inline std::vector<SinrBreakdown> padic_sinr(const Realization &r, const PowerAllocation &power, Scheme scheme)
    {
        const int k = user_count(r.h_est);
        power.validate(2 * k);
        std::vector<SinrBreakdown> out(static_cast<size_t>(2 * k));
        std::vector<int> active = detection_order(r.h_est);
        std::vector<int> done;
        while (!active.empty())
        {
            const int u = active.front();
            for (Pol p : {Pol::V, Pol::H})
            {
                const int s = stream(u, p);
                const int sx = stream(u, other(p));
                if (!stream_active(r.h_est, power.ul, s))
                    continue;
                const CVec w = padic_filter(scheme, r.h_est, active, u, p, power.ul, power.noise_ul);
                auto &b = out[static_cast<size_t>(s)];
                b.desired = power.ul(s) * std::norm(w.dot(r.h_true.col(s)));
                b.xpc = power.ul(sx) * std::norm(w.dot(r.h_true.col(sx)));
                for (int l : active)
                    if (l != u)
                        for (Pol q : {Pol::V, Pol::H})
                            b.mui += power.ul(stream(l, q)) * std::norm(w.dot(r.h_true.col(stream(l, q))));
                for (int l : done)
                    for (Pol q : {Pol::V, Pol::H})
                    {
                        const int t = stream(l, q);
                        b.est_error += power.ul(t) * std::norm(w.dot(r.h_true.col(t) - r.h_est.col(t)));
                    }
                b.noise = power.noise_ul * w.squaredNorm();
            }
            done.push_back(u);
            active.erase(active.begin());
        }
        return out;
    }

    // Sum over polarizations of log2(1 + SINR) per user, times the prelog.
    inline RVec padic_se(const Realization &r, const PowerAllocation &power, Scheme scheme, double pilot_fraction)
    {
        const auto b = padic_sinr(r, power, scheme);
        RVec se = RVec::Zero(static_cast<Eigen::Index>(b.size() / 2));
        for (size_t s = 0; s < b.size(); ++s)
            se(static_cast<Eigen::Index>(s / 2)) += std::log2(1.0 + b[s].sinr());
        return pilot_fraction * se;
    }

    struct SeResult
    {
        RVec mean;     // per user
        RVec ci95;     // per user
        double sum_mean = 0.0;
        double sum_ci95 = 0.0;
        int trials = 0;
    };

    // Monte-Carlo SE of the PADIC receiver with the given filter over an ensemble of realizations.
    inline SeResult se_monte_carlo(std::span<const Realization> ensemble, const PowerAllocation &power, Scheme scheme,
                                   double pilot_fraction)
    {
        if (ensemble.empty())
            throw std::invalid_argument("empty ensemble");
        const int k = user_count(ensemble[0].h_est);
        const auto n = static_cast<double>(ensemble.size());
        RVec s1 = RVec::Zero(k), s2 = RVec::Zero(k);
        double t1 = 0.0, t2 = 0.0;
        for (const auto &r : ensemble)
        {
            const RVec se = padic_se(r, power, scheme, pilot_fraction);
            s1 += se;
            s2 += se.cwiseProduct(se);
            t1 += se.sum();
            t2 += se.sum() * se.sum();
        }
        SeResult out;
        out.trials = static_cast<int>(ensemble.size());
        out.mean = s1 / n;
        const RVec var = n > 1 ? RVec(((s2 / n) - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0) * (n / (n - 1))) : RVec(RVec::Zero(k));
        out.ci95 = 1.96 * var.cwiseSqrt() / std::sqrt(n);
        out.sum_mean = t1 / n;
        const double tvar = n > 1 ? std::max(0.0, t2 / n - out.sum_mean * out.sum_mean) * n / (n - 1) : 0.0;
        out.sum_ci95 = 1.96 * std::sqrt(tvar / n);
        return out;
    }
} // namespace dpmimo::precoding

#endif
