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

#ifndef DPMIMO_COMMON_HPP
#define DPMIMO_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace dpmimo
{
    using cplx = std::complex<double>;
    using CMat = Eigen::MatrixXcd;
    using CVec = Eigen::VectorXcd;
    using RMat = Eigen::MatrixXd;
    using RVec = Eigen::VectorXd;
    using Mat2c = Eigen::Matrix2cd;
    using Vec3 = Eigen::Vector3d;

    inline constexpr double pi = std::numbers::pi;
    inline constexpr double two_pi = 2.0 * std::numbers::pi;
    inline constexpr double speed_of_light = 299792458.0;
    inline constexpr cplx j_unit{0.0, 1.0};

    // Polarization port index, V first throughout the library.
    enum class Pol : int
    {
        V = 0,
        H = 1
    };

    inline constexpr Pol other(Pol p) { return p == Pol::V ? Pol::H : Pol::V; }
    inline constexpr int index(Pol p) { return static_cast<int>(p); }
    inline const char *name(Pol p) { return p == Pol::V ? "V" : "H"; }

    inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
    inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

    inline cplx expj(double phase) { return std::polar(1.0, phase); }

    // Random engine used by every stochastic operation.
    using Rng = std::mt19937_64;

    // SplitMix64 finalizer; the mixing step of the counter-based sub-seed derivation.
    inline constexpr std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Sub-seed that depends only on (master, a, b). Used as seed = derive_seed(master, sweep_index, trial_index).
    inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
    {
        return splitmix64(splitmix64(splitmix64(master) ^ (a + 0x632BE59BD9B4E019ULL)) ^ (b + 0x85157AF5ULL));
    }

    // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    inline cplx complex_normal(Rng &rng, double variance = 1.0)
    {
        std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
        const double re = n(rng);
        const double im = n(rng);
        return {re, im};
    }

    inline CVec complex_normal_vector(Rng &rng, Eigen::Index n, double variance = 1.0)
    {
        CVec v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = complex_normal(rng, variance);
        return v;
    }

    inline CMat complex_normal_matrix(Rng &rng, Eigen::Index rows, Eigen::Index cols, double variance = 1.0)
    {
        CMat m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r)
                m(r, c) = complex_normal(rng, variance);
        return m;
    }

    inline double uniform(Rng &rng, double lo, double hi)
    {
        std::uniform_real_distribution<double> u(lo, hi);
        return u(rng);
    }

    inline double wrap_phase(double x)
    {
        x = std::fmod(x, two_pi);
        return x < 0.0 ? x + two_pi : x;
    }

    // Wraps to [-pi, pi).
    inline double wrap_angle(double x)
    {
        x = std::fmod(x + pi, two_pi);
        if (x < 0.0)
            x += two_pi;
        return x - pi;
    }

    inline void require(bool cond, const std::string &msg)
    {
        if (!cond)
            throw std::invalid_argument(msg);
    }
} // namespace dpmimo

#endif
