// SPDX-License-Identifier: Apache-2.0
//
// ris-sostat: second-order statistics of RIS-assisted fading channels
// Copyright (C) 2026 The ris-sostat authors
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

#pragma once

#include "errors.hpp"
#include "specfun.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

namespace ris_sostat
{

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double speed_of_light = 2.998e8;

enum class SpatialKind
{
    Sinc,
    Exponential
};

struct SpatialModel
{
    SpatialKind kind = SpatialKind::Sinc;
    double rho = 0.0; // adjacent-element correlation, exponential model only

    bool operator==(const SpatialModel &) const = default;
};

// Which distances feed the path-loss model. The 3-D distances are always
// available from layout_geometry.
enum class DistanceMode
{
    Planar,
    ThreeD
};

struct ScenarioConfig
{
    int M_x = 8, M_z = 4;
    int N_x = 16, N_z = 8;
    double d_b = 0.5, d_r = 0.1; // wavelengths
    double h_b = 15.0, h_r = 15.0, h_u = 1.5;
    double d_x = 27.0, d_y = 5.0, d_rb = 40.0;
    double alpha_d = 3.5, alpha_rb = 2.0, alpha_ur = 2.8;
    double f_c = 2.1e9;
    double f_d = 10.0, f_ur = 5.0;
    double kappa_rb = 1.0; // +inf for a pure LoS RIS-BS link
    SpatialModel spatial{};
    double phi_D = 5.0 * std::numbers::pi / 4.0, theta_D = std::numbers::pi / 2.0;
    double phi_A = std::numbers::pi / 4.0, theta_A = std::numbers::pi / 2.0;
    double tx_snr = 1.0; // E_s / sigma^2, linear
    DistanceMode path_loss_distance = DistanceMode::Planar;
    // power scaling applied to beta_d and beta_rb (shadowed-link studies)
    double direct_gain_scale = 1.0, ris_gain_scale = 1.0;

    int M() const { return M_x * M_z; }
    int N() const { return N_x * N_z; }
    bool los_only() const { return std::isinf(kappa_rb); }

    bool operator==(const ScenarioConfig &) const = default;

    void validate() const
    {
        if (M_x < 1 || M_z < 1 || N_x < 1 || N_z < 1)
            throw domain_error("ScenarioConfig: array counts must be >= 1");
        auto pos = [](double v, const char *name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw domain_error(std::string("ScenarioConfig: ") + name + " must be positive and finite");
        };
        pos(d_b, "d_b");
        pos(d_r, "d_r");
        pos(d_rb, "d_rb");
        pos(f_c, "f_c");
        if (!(d_x >= 0.0) || !(d_y >= 0.0) || !(f_d >= 0.0) || !(f_ur >= 0.0))
            throw domain_error("ScenarioConfig: d_x, d_y, f_d, f_ur must be nonnegative");
        if (!(h_b >= 0.0) || !(h_r >= 0.0) || !(h_u >= 0.0))
            throw domain_error("ScenarioConfig: heights must be nonnegative");
        if (!(kappa_rb >= 0.0))
            throw domain_error("ScenarioConfig: kappa_rb must be >= 0");
        if (spatial.kind == SpatialKind::Exponential && !(spatial.rho >= 0.0 && spatial.rho <= 1.0))
            throw domain_error("ScenarioConfig: exponential rho must lie in [0, 1]");
        if (!(tx_snr > 0.0) || !std::isfinite(tx_snr))
            throw domain_error("ScenarioConfig: tx_snr must be positive");
        if (!(direct_gain_scale >= 0.0) || !(ris_gain_scale >= 0.0))
            throw domain_error("ScenarioConfig: gain scales must be nonnegative");
    }
};

struct LinkGains
{
    double beta_d = 0, beta_ur = 0, beta_rb = 0;
    double eta_rb = 0, zeta_rb = 0;
};

struct LayoutDistances
{
    double d_ue_bs = 0, d_ue_ris = 0, d_ris_bs = 0;
};

// beta = C0 (d / D0)^-alpha with C0 = -30 dB at D0 = 1 m
inline double path_loss(double d, double alpha)
{
    if (!(d >= 1.0))
        throw domain_error("path_loss: distance below the 1 m reference");
    return 1e-3 * std::pow(d, -alpha);
}

// BS at the origin, RIS at planar distance d_rb, UE at planar offset (d_x, d_y) from the BS.
inline LayoutDistances layout_geometry(const ScenarioConfig &c)
{
    LayoutDistances g;
    g.d_ue_bs = std::sqrt(c.d_x * c.d_x + c.d_y * c.d_y + (c.h_b - c.h_u) * (c.h_b - c.h_u));
    g.d_ue_ris = std::sqrt((c.d_rb - c.d_x) * (c.d_rb - c.d_x) + c.d_y * c.d_y + (c.h_r - c.h_u) * (c.h_r - c.h_u));
    g.d_ris_bs = std::sqrt(c.d_rb * c.d_rb + (c.h_b - c.h_r) * (c.h_b - c.h_r));
    return g;
}

inline LayoutDistances planar_geometry(const ScenarioConfig &c)
{
    LayoutDistances g;
    g.d_ue_bs = std::hypot(c.d_x, c.d_y);
    g.d_ue_ris = std::hypot(c.d_rb - c.d_x, c.d_y);
    g.d_ris_bs = c.d_rb;
    return g;
}

inline LayoutDistances path_loss_geometry(const ScenarioConfig &c)
{
    return c.path_loss_distance == DistanceMode::Planar ? planar_geometry(c) : layout_geometry(c);
}

// Element (m, n) of a rows_x by rows_z array sits at (m d, 0, n d); storage index n * rows_x + m.
inline CVector steering_vector(int rows_x, int rows_z, double spacing, double azimuth, double elevation)
{
    if (rows_x < 1 || rows_z < 1)
        throw domain_error("steering_vector: counts must be >= 1");
    CVector a(rows_x * rows_z);
    const double ux = std::sin(elevation) * std::cos(azimuth);
    const double uz = std::cos(elevation);
    for (int n = 0; n < rows_z; ++n)
        for (int m = 0; m < rows_x; ++m)
        {
            const double phase = 2.0 * std::numbers::pi * (m * spacing * ux + n * spacing * uz);
            a(n * rows_x + m) = (m == 0 && n == 0) ? cplx(1.0, 0.0) : std::polar(1.0, phase);
        }
    return a;
}

// Largest eigenvalue below which a Hermitian matrix is treated as not PSD, relative to the spectral radius.
inline constexpr double psd_rel_tol = 1e-10;

inline void check_correlation(const CMatrix &R, const std::string &what = "correlation matrix")
{
    if (R.rows() != R.cols() || R.rows() == 0)
        throw model_error(what + ": not square");
    const double herm = (R - R.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12)
        throw model_error(what + ": not Hermitian");
    for (Eigen::Index i = 0; i < R.rows(); ++i)
        if (std::abs(R(i, i) - 1.0) > 1e-12)
            throw model_error(what + ": diagonal entry differs from 1");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(R, Eigen::EigenvaluesOnly);
    const RVector &w = es.eigenvalues();
    if (w.minCoeff() < -psd_rel_tol * std::max(1.0, w.maxCoeff()))
        throw model_error(what + ": not positive semidefinite");
}

inline CMatrix spatial_correlation(int rows_x, int rows_z, double spacing, const SpatialModel &model)
{
    const int L = rows_x * rows_z;
    CMatrix R(L, L);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
        {
            const double dx = spacing * (i % rows_x - j % rows_x);
            const double dz = spacing * (i / rows_x - j / rows_x);
            const double d = std::hypot(dx, dz);
            double v;
            if (model.kind == SpatialKind::Sinc)
                v = specfun::sinc(2.0 * d);
            else
                v = (i == j) ? 1.0 : std::pow(model.rho, d / spacing);
            R(i, j) = v;
        }
    check_correlation(R, "spatial_correlation");
    return R;
}

inline double jakes_rho(double f, double tau)
{
    if (!(f >= 0.0))
        throw domain_error("jakes_rho: negative Doppler frequency");
    return specfun::bessel_j0(2.0 * std::numbers::pi * f * tau);
}

inline double doppler(double v, double f_c, double theta)
{
    if (!(v >= 0.0))
        throw domain_error("doppler: negative speed");
    return std::fabs(v * f_c * std::cos(theta) / speed_of_light);
}

// Hermitian PSD square root; eigenvalues within tolerance below zero are clamped.
inline CMatrix psd_sqrt(const CMatrix &R)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(R);
    RVector w = es.eigenvalues();
    const double wmax = std::max(w.maxCoeff(), 0.0);
    if (w.minCoeff() < -psd_rel_tol * std::max(wmax, 1e-300))
        throw model_error("psd_sqrt: matrix is not positive semidefinite");
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w(i) = std::sqrt(std::max(w(i), 0.0));
    return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

// Tall factor F with F F^H = R up to the discarded eigenvalues (below rel_cut of the largest).
inline CMatrix psd_factor(const CMatrix &R, double rel_cut = 1e-12)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(R);
    const RVector &w = es.eigenvalues();
    const double wmax = std::max(w.maxCoeff(), 0.0);
    if (w.minCoeff() < -psd_rel_tol * std::max(wmax, 1e-300))
        throw model_error("psd_factor: matrix is not positive semidefinite");
    int keep = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > rel_cut * wmax)
            ++keep;
    CMatrix F(R.rows(), keep);
    int col = 0;
    for (Eigen::Index i = w.size() - 1; i >= 0; --i) // descending
        if (w(i) > rel_cut * wmax)
            F.col(col++) = es.eigenvectors().col(i) * std::sqrt(w(i));
    return F;
}

struct Links
{
    LinkGains gains;
    CVector a_b, a_r;
    CMatrix R_d, R_ur, R_b, R_r;
};

inline LinkGains link_gains(const ScenarioConfig &c)
{
    const LayoutDistances g = path_loss_geometry(c);
    LinkGains lg;
    lg.beta_d = c.direct_gain_scale * path_loss(g.d_ue_bs, c.alpha_d);
    lg.beta_ur = path_loss(g.d_ue_ris, c.alpha_ur);
    lg.beta_rb = c.ris_gain_scale * path_loss(g.d_ris_bs, c.alpha_rb);
    if (std::isinf(c.kappa_rb))
    {
        lg.eta_rb = 1.0;
        lg.zeta_rb = 0.0;
    }
    else
    {
        lg.eta_rb = std::sqrt(c.kappa_rb / (c.kappa_rb + 1.0));
        lg.zeta_rb = std::sqrt(1.0 / (c.kappa_rb + 1.0));
    }
    return lg;
}

inline Links build_links(const ScenarioConfig &c)
{
    c.validate();
    Links L;
    L.gains = link_gains(c);
    L.a_b = steering_vector(c.M_x, c.M_z, c.d_b, c.phi_A, c.theta_A);
    L.a_r = steering_vector(c.N_x, c.N_z, c.d_r, c.phi_D, c.theta_D);
    L.R_d = spatial_correlation(c.M_x, c.M_z, c.d_b, c.spatial);
    L.R_ur = spatial_correlation(c.N_x, c.N_z, c.d_r, c.spatial);
    L.R_b = L.R_d;
    L.R_r = L.R_ur;
    return L;
}

} // namespace ris_sostat
