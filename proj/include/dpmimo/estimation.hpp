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


#ifndef DPMIMO_ESTIMATION_HPP
#define DPMIMO_ESTIMATION_HPP

#include "dpmimo/common.hpp"
#include "dpmimo/otfs.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

// Sparse delay-Doppler channel estimation for dual-polarized links.
//
// Observation layout: y = [y_V; y_H], one view per receive polarization. Each view holds MN
// DD samples times A receive antennas, antenna index fastest. The unknown vector stacks four
// polarization-pair blocks in the order [VV, HH, VH, HV] (pair = rx pol, tx pol); inside a
// block the coefficient of grid point g and antenna a sits at g A + a.

namespace dpmimo::est
{
    struct GridPoint
    {
        int delay_idx = 0;
        int doppler_idx = 0;

        bool operator==(const GridPoint &) const = default;
    };

    // Delays 0 .. delays-1, Dopplers -max_doppler .. max_doppler, delay-major.
    inline std::vector<GridPoint> make_grid(int delays, int max_doppler)
    {
        if (delays < 1 || max_doppler < 0)
            throw std::invalid_argument("invalid dictionary grid");
        std::vector<GridPoint> g;
        for (int l = 0; l < delays; ++l)
            for (int k = -max_doppler; k <= max_doppler; ++k)
                g.push_back({l, k});
        return g;
    }

    struct PolPair
    {
        Pol rx;
        Pol tx;
    };

    inline constexpr std::array<PolPair, 4> pair_order{
        {{Pol::V, Pol::V}, {Pol::H, Pol::H}, {Pol::V, Pol::H}, {Pol::H, Pol::V}}};

    inline int pair_index(Pol rx, Pol tx)
    {
        for (int b = 0; b < 4; ++b)
            if (pair_order[static_cast<size_t>(b)].rx == rx && pair_order[static_cast<size_t>(b)].tx == tx)
                return b;
        return -1;
    }

    // ---------- Pilots ----------

    struct PilotConfig
    {
        CMat pilots;               // length x (2 K), column 2k + q is the pilot of user k on tx port q
        int pilot_len = 1;         // tau_p
        int coherence_len = 200;   // tau_c
        Eigen::Matrix2d power_control = Eigen::Matrix2d::Ones(); // eta(rx, tx)
        double ul_power = 1.0;

        int users() const { return static_cast<int>(pilots.cols() / 2); }

        CVec pilot(int user, Pol q) const { return pilots.col(2 * user + index(q)); }

        void validate() const
        {
            if (pilot_len < 1 || coherence_len < 1)
                throw std::invalid_argument("pilot.pilot_len and pilot.coherence_len must be >= 1");
            if (pilot_len > coherence_len)
                throw std::invalid_argument("pilot.pilot_len exceeds pilot.coherence_len");
            if ((power_control.array() < 0.0).any())
                throw std::invalid_argument("pilot.power_control must be >= 0");
            if (!(ul_power >= 0.0))
                throw std::invalid_argument("pilot.ul_power must be >= 0");
        }
    };

    // `count` orthonormal pilot sequences of the given length.
    inline CMat orthogonal_pilots(Rng &rng, int length, int count)
    {
        if (count < 1 || count > length)
            throw std::invalid_argument("cannot build that many orthogonal pilots");
        const CMat g = complex_normal_matrix(rng, length, count);
        Eigen::HouseholderQR<CMat> qr(g);
        return qr.householderQ() * CMat::Identity(length, count);
    }

    // ---------- Dictionary ----------

    struct Atom
    {
        int pair = 0; // index into pair_order
        int grid = 0;
        int antenna = 0;
    };

    struct Dictionary
    {
        CMat phi;
        std::array<CMat, 4> xi; // per pair, MN x |G|
        CMat spatial_corr;
        CMat spatial_root;
        std::vector<GridPoint> grid;
        std::vector<Atom> atoms;
        int antennas = 1;
        int view_rows = 0; // MN A

        int columns_per_pair() const { return static_cast<int>(grid.size()) * antennas; }
        int column(int pair, int grid_idx, int antenna) const { return pair * columns_per_pair() + grid_idx * antennas + antenna; }
    };

    inline CMat psd_root(const CMat &r)
    {
        if (r.rows() != r.cols() || r.rows() == 0)
            throw std::invalid_argument("spatial correlation must be square");
        if ((r - r.adjoint()).norm() > 1e-10 * std::max(1.0, r.norm()))
            throw std::invalid_argument("spatial correlation is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMat> es(r);
        RVec ev = es.eigenvalues();
        const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
        if (ev.minCoeff() < -tol)
            throw std::invalid_argument("spatial correlation is not PSD");
        ev = ev.cwiseMax(0.0);
        return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
    }

    // Atoms sqrt(eta_pq) (T_g psi_q) kron (sqrt(R) e_a), placed in the rx-p view.
    inline Dictionary build_dictionary(const CVec &psi_v, const CVec &psi_h, std::span<const GridPoint> grid,
                                       const CMat &spatial_corr, const Eigen::Matrix2d &power_control,
                                       const otfs::OtfsFrameConfig &frame)
    {
        const int mn = frame.mn();
        if (psi_v.size() != mn || psi_h.size() != mn)
            throw std::invalid_argument("pilot length must equal M N");
        if (grid.empty())
            throw std::invalid_argument("empty dictionary grid");
        Dictionary d;
        d.grid.assign(grid.begin(), grid.end());
        d.spatial_corr = spatial_corr;
        d.spatial_root = psd_root(spatial_corr);
        d.antennas = static_cast<int>(spatial_corr.rows());
        d.view_rows = mn * d.antennas;
        const int a_n = d.antennas;
        const int g_n = static_cast<int>(grid.size());

        otfs::OtfsFrameConfig f = frame;
        f.cp_length = std::max(f.cp_length, f.delay_bins - 1);
        std::vector<CVec> shifted_v, shifted_h;
        for (const auto &g : grid)
        {
            const auto t = otfs::dd_shift_operator(g.delay_idx, g.doppler_idx, f);
            shifted_v.push_back(t * psi_v);
            shifted_h.push_back(t * psi_h);
        }

        d.phi = CMat::Zero(2 * d.view_rows, 4 * g_n * a_n);
        for (int b = 0; b < 4; ++b)
        {
            const PolPair pp = pair_order[static_cast<size_t>(b)];
            const double eta = power_control(index(pp.rx), index(pp.tx));
            if (eta < 0.0)
                throw std::invalid_argument("negative power control coefficient");
            const auto &shifted = pp.tx == Pol::V ? shifted_v : shifted_h;
            d.xi[static_cast<size_t>(b)].resize(mn, g_n);
            for (int g = 0; g < g_n; ++g)
            {
                d.xi[static_cast<size_t>(b)].col(g) = std::sqrt(eta) * shifted[static_cast<size_t>(g)];
                for (int a = 0; a < a_n; ++a)
                {
                    const int c = d.column(b, g, a);
                    for (int i = 0; i < mn; ++i)
                        d.phi.block(index(pp.rx) * d.view_rows + i * a_n, c, a_n, 1) =
                            d.xi[static_cast<size_t>(b)](i, g) * d.spatial_root.col(a);
                    d.atoms.push_back({b, g, a});
                }
            }
        }
        return d;
    }

    // Largest normalized inner product between distinct non-zero columns.
    inline double coherence(const CMat &phi)
    {
        const RVec norms = phi.colwise().norm();
        const CMat gram = phi.adjoint() * phi;
        double mu = 0.0;
        for (Eigen::Index i = 0; i < phi.cols(); ++i)
            for (Eigen::Index j = i + 1; j < phi.cols(); ++j)
                if (norms(i) > 0.0 && norms(j) > 0.0)
                    mu = std::max(mu, std::abs(gram(i, j)) / (norms(i) * norms(j)));
        return mu;
    }

    // ---------- Observation ----------

    inline CVec observe(const CVec &h_s, const Dictionary &d, double noise_power, Rng &rng)
    {
        if (h_s.size() != d.phi.cols())
            throw std::invalid_argument("channel vector does not match the dictionary");
        CVec y = d.phi * h_s;
        if (noise_power > 0.0)
            y += complex_normal_vector(rng, y.size(), noise_power);
        return y;
    }

    // Per-sample noise power giving the requested SNR for a noiseless observation.
    inline double noise_power_for_snr(const CVec &signal, double snr_db)
    {
        if (signal.size() == 0)
            throw std::invalid_argument("empty signal");
        return signal.squaredNorm() / static_cast<double>(signal.size()) / db_to_linear(snr_db);
    }

    // Random polarized channel with `paths` distinct grid points; co-polar gains CN(0,1),
    // cross-polar gains CN(0, 1/xpr).
    inline CVec random_sparse_channel(Rng &rng, const Dictionary &d, int paths, double xpr_linear,
                                      std::vector<int> *grid_support = nullptr)
    {
        const int g_n = static_cast<int>(d.grid.size());
        if (paths < 1 || paths > g_n)
            throw std::invalid_argument("invalid path count");
        std::vector<int> idx(static_cast<size_t>(g_n));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<size_t>(paths));
        std::sort(idx.begin(), idx.end());
        CVec h = CVec::Zero(d.phi.cols());
        for (int g : idx)
            for (int b = 0; b < 4; ++b)
            {
                const PolPair pp = pair_order[static_cast<size_t>(b)];
                const double var = pp.rx == pp.tx ? 1.0 : 1.0 / xpr_linear;
                for (int a = 0; a < d.antennas; ++a)
                    h(d.column(b, g, a)) = complex_normal(rng, var);
            }
        if (grid_support)
            *grid_support = idx;
        return h;
    }

    // ---------- Estimators ----------

    struct PasceParams
    {
        int sparsity = 1;
        double epsilon = 1e-3;
        int max_iter = 20;
        double reduction_factor = 0.5;
        double threshold = 0.9;
        double reg = 0.0;            // sigma_n^2
        double residual_floor = 0.0; // absolute residual norm that also stops the iteration

        void validate() const
        {
            if (sparsity < 1)
                throw std::invalid_argument("pasce.sparsity must be >= 1");
            if (!(epsilon > 0.0))
                throw std::invalid_argument("pasce.epsilon must be > 0");
            if (max_iter < 1)
                throw std::invalid_argument("pasce.max_iter must be >= 1");
            if (!(reduction_factor > 0.0 && reduction_factor < 1.0))
                throw std::invalid_argument("pasce.reduction_factor must be in (0, 1)");
            if (!(threshold > 0.0))
                throw std::invalid_argument("pasce.threshold must be > 0");
            if (!(reg >= 0.0))
                throw std::invalid_argument("pasce.reg must be >= 0");
            if (!(residual_floor >= 0.0))
                throw std::invalid_argument("pasce.residual_floor must be >= 0");
        }
    };

    struct SparseEstimate
    {
        CVec h_s;
        std::vector<int> support; // sorted column indices
        CMat gamma;
        CMat c_err;
        double nmse = std::numeric_limits<double>::quiet_NaN();
        int iterations = 0;
        long long inner_products = 0;
        std::vector<double> residual_history; // residual norm after each iteration
        std::vector<int> step_history;        // step size used in each iteration
    };

    inline CMat gather(const CMat &phi, std::span<const int> cols)
    {
        CMat s(phi.rows(), static_cast<Eigen::Index>(cols.size()));
        for (size_t i = 0; i < cols.size(); ++i)
            s.col(static_cast<Eigen::Index>(i)) = phi.col(cols[i]);
        return s;
    }

    // (Phi_s^H Phi_s + reg I)^-1 Phi_s^H y.
    inline CVec regularized_ls(const CMat &phi_s, const CVec &y, double reg)
    {
        const Eigen::Index n = phi_s.cols();
        if (reg <= 0.0)
        {
            Eigen::ColPivHouseholderQR<CMat> qr(phi_s);
            qr.setThreshold(1e-10);
            if (qr.rank() < n)
                throw std::domain_error("regularization required");
            return qr.solve(y);
        }
        CMat g = phi_s.adjoint() * phi_s;
        g.diagonal().array() += reg;
        Eigen::LLT<CMat> llt(g);
        if (llt.info() != Eigen::Success)
            throw std::domain_error("regularization required");
        return llt.solve(phi_s.adjoint() * y);
    }

    // Indices of the `count` largest entries, lowest index first on ties.
    inline std::vector<int> top_indices(const RVec &v, int count)
    {
        std::vector<int> idx(static_cast<size_t>(v.size()));
        std::iota(idx.begin(), idx.end(), 0);
        count = std::min<int>(count, static_cast<int>(idx.size()));
        std::partial_sort(idx.begin(), idx.begin() + count, idx.end(),
                          [&](int a, int b) { return v(a) != v(b) ? v(a) > v(b) : a < b; });
        idx.resize(static_cast<size_t>(count));
        return idx;
    }

    inline SparseEstimate pasce(const CVec &y, const Dictionary &d, const PasceParams &params)
    {
        params.validate();
        if (y.size() != d.phi.rows())
            throw std::invalid_argument("observation does not match the dictionary");

        const double y_norm = y.norm();
        const double stop = std::max(params.epsilon * y_norm, params.residual_floor);
        const Eigen::Index cols = d.phi.cols();
        std::vector<char> in_support(static_cast<size_t>(cols), 0);

        SparseEstimate out;
        out.h_s = CVec::Zero(cols);
        CVec residual = y;
        double prev_norm = y_norm;
        int step = params.sparsity;
        if (y_norm == 0.0)
            return out;

        for (int iter = 1; iter <= params.max_iter; ++iter)
        {
            out.step_history.push_back(step);
            bool grew = false;
            for (Pol p : {Pol::V, Pol::H})
            {
                CVec view = CVec::Zero(y.size());
                view.segment(index(p) * d.view_rows, d.view_rows) = residual.segment(index(p) * d.view_rows, d.view_rows);
                const RVec cor = (d.phi.adjoint() * view).cwiseAbs();
                out.inner_products += cols;
                for (int c : top_indices(cor, step))
                {
                    // A selected atom brings in every pair and antenna at its grid point.
                    const int g = d.atoms[static_cast<size_t>(c)].grid;
                    for (int b = 0; b < 4; ++b)
                        for (int a = 0; a < d.antennas; ++a)
                        {
                            const int col = d.column(b, g, a);
                            if (!in_support[static_cast<size_t>(col)])
                            {
                                in_support[static_cast<size_t>(col)] = 1;
                                grew = true;
                            }
                        }
                }
            }

            out.support.clear();
            for (Eigen::Index c = 0; c < cols; ++c)
                if (in_support[static_cast<size_t>(c)])
                    out.support.push_back(static_cast<int>(c));
            const CMat phi_s = gather(d.phi, out.support);
            const CVec h = regularized_ls(phi_s, y, params.reg);
            residual = y - phi_s * h;
            out.h_s.setZero();
            for (size_t i = 0; i < out.support.size(); ++i)
                out.h_s(out.support[i]) = h(static_cast<Eigen::Index>(i));

            const double r_norm = residual.norm();
            out.residual_history.push_back(r_norm);
            out.iterations = iter;
            if (r_norm / prev_norm >= params.threshold)
                step = std::max(1, static_cast<int>(step * params.reduction_factor));
            prev_norm = r_norm;
            if (r_norm <= stop || !grew)
                break;
        }
        return out;
    }

    inline SparseEstimate omp_baseline(const CVec &y, const Dictionary &d, int sparsity, double epsilon = 1e-3,
                                       double residual_floor = 0.0)
    {
        if (sparsity < 1)
            throw std::invalid_argument("OMP sparsity must be >= 1");
        if (y.size() != d.phi.rows())
            throw std::invalid_argument("observation does not match the dictionary");
        const Eigen::Index cols = d.phi.cols();
        const double stop = std::max(epsilon * y.norm(), residual_floor);
        std::vector<char> in_support(static_cast<size_t>(cols), 0);

        SparseEstimate out;
        out.h_s = CVec::Zero(cols);
        CVec residual = y;
        if (y.norm() == 0.0)
            return out;
        for (int iter = 1; iter <= sparsity && iter <= cols; ++iter)
        {
            RVec cor = (d.phi.adjoint() * residual).cwiseAbs();
            out.inner_products += cols;
            for (Eigen::Index c = 0; c < cols; ++c)
                if (in_support[static_cast<size_t>(c)])
                    cor(c) = -1.0;
            const int pick = top_indices(cor, 1).front();
            in_support[static_cast<size_t>(pick)] = 1;
            out.support.insert(std::upper_bound(out.support.begin(), out.support.end(), pick), pick);

            const CMat phi_s = gather(d.phi, out.support);
            const CVec h = regularized_ls(phi_s, y, 0.0);
            residual = y - phi_s * h;
            out.h_s.setZero();
            for (size_t i = 0; i < out.support.size(); ++i)
                out.h_s(out.support[i]) = h(static_cast<Eigen::Index>(i));
            out.residual_history.push_back(residual.norm());
            out.step_history.push_back(1);
            out.iterations = iter;
            if (residual.norm() <= stop)
                break;
        }
        return out;
    }

    // Keeps the atoms whose correlation with y reaches the given quantile, then least squares.
    inline SparseEstimate sfs_baseline(const CVec &y, const Dictionary &d, double suppression_quantile)
    {
        if (!(suppression_quantile >= 0.0 && suppression_quantile < 1.0))
            throw std::invalid_argument("suppression quantile must be in [0, 1)");
        if (y.size() != d.phi.rows())
            throw std::invalid_argument("observation does not match the dictionary");
        const RVec cor = (d.phi.adjoint() * y).cwiseAbs();
        std::vector<double> sorted(cor.data(), cor.data() + cor.size());
        std::sort(sorted.begin(), sorted.end());
        const auto pos = static_cast<size_t>(std::floor(suppression_quantile * static_cast<double>(sorted.size())));
        const double thr = sorted[std::min(pos, sorted.size() - 1)];

        SparseEstimate out;
        out.inner_products = cor.size();
        out.iterations = 1;
        for (Eigen::Index c = 0; c < cor.size(); ++c)
            if (cor(c) >= thr && cor(c) > 0.0)
                out.support.push_back(static_cast<int>(c));
        if (out.support.empty())
            throw std::domain_error("over-suppression");
        const CMat phi_s = gather(d.phi, out.support);
        const CVec h = phi_s.completeOrthogonalDecomposition().solve(y);
        out.h_s = CVec::Zero(d.phi.cols());
        for (size_t i = 0; i < out.support.size(); ++i)
            out.h_s(out.support[i]) = h(static_cast<Eigen::Index>(i));
        out.residual_history.push_back((y - phi_s * h).norm());
        return out;
    }

    inline double nmse(const CVec &estimate, const CVec &truth)
    {
        if (estimate.size() != truth.size())
            throw std::invalid_argument("dimension mismatch");
        const double t = truth.squaredNorm();
        if (!(t > 0.0))
            throw std::invalid_argument("zero truth");
        return (estimate - truth).squaredNorm() / t;
    }

    // ---------- Covariances ----------

    struct Covariances
    {
        CMat gamma; // estimate covariance
        CMat c_err; // error covariance R - gamma
    };

    // Estimate / error covariances of every user in a co-pilot group sharing the same pilot.
    inline std::vector<Covariances> estimate_covariances(std::span<const CMat> spatial_corr, double ul_power,
                                                         int pilot_len, double noise_power)
    {
        if (spatial_corr.empty())
            throw std::invalid_argument("no users");
        if (!(ul_power >= 0.0) || !(noise_power >= 0.0) || pilot_len < 1)
            throw std::invalid_argument("powers must be >= 0 and pilot_len >= 1");
        const Eigen::Index m = spatial_corr[0].rows();
        CMat inner = noise_power * CMat::Identity(m, m);
        for (const auto &r : spatial_corr)
        {
            if (r.rows() != m || r.cols() != m)
                throw std::invalid_argument("spatial correlation sizes differ");
            psd_root(r);
            inner += ul_power * pilot_len * r;
        }
        Eigen::FullPivLU<CMat> lu(inner);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible())
            throw std::domain_error("covariance inner matrix is not invertible");
        const CMat inv = lu.inverse();

        std::vector<Covariances> out;
        out.reserve(spatial_corr.size());
        for (const auto &r : spatial_corr)
        {
            Covariances c;
            c.gamma = ul_power * pilot_len * r * inv * r;
            c.gamma = 0.5 * (c.gamma + c.gamma.adjoint()).eval();
            c.c_err = r - c.gamma;
            c.c_err = 0.5 * (c.c_err + c.c_err.adjoint()).eval();
            out.push_back(std::move(c));
        }
        return out;
    }
} // namespace dpmimo::est

#endif
