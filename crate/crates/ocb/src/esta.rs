//! Correction amplitudes for the transport path beyond the harmonic model.
//!
//! The trap path is enhanced with six amplitudes eps_k weighting the
//! interpolation basis polynomials f_k. The amplitudes are built from two
//! auxiliary integrals per oscillator mode n: a scalar G_n measuring the
//! coupling of the full potential (relative to its harmonic approximation)
//! between the moving ground state and mode n, and a 6-vector K_n measuring
//! the sensitivity of that coupling to each basis amplitude. Both are
//! available through numerically exact 2D quadrature and through a much
//! faster frozen-waist reduction to 1D time integrals.
//!
//! Internal units throughout: hbar = 1, m = 1/2, k = 1.

use num_complex::Complex64;

use crate::error::Result;
use crate::mathkit::{
    binomial, factorial, gamma_half, gamma_half_integer_arg, hermite, hermite_gaussian_moment,
    partitions, quad1d, quad2d,
};
use crate::potential::{Axis, PotentialField};
use crate::scales::{DerivedScales, SystemParams};
use crate::trajectory::{f_basis_poly, Poly, TrapPath};
use crate::WAVE_K;

/// Oscillator mode (n_x, n_y, n_z); only even n_x, n_y couple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeIndex {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl ModeIndex {
    pub fn total(&self) -> usize {
        self.nx + self.ny + self.nz
    }

    fn norm_2n_nfact(&self) -> f64 {
        2.0f64.powi(self.total() as i32)
            * factorial(self.nx)
            * factorial(self.ny)
            * factorial(self.nz)
    }

    fn frequency(&self, s: &DerivedScales) -> f64 {
        self.nx as f64 * s.omega_x + self.ny as f64 * s.omega_y + self.nz as f64 * s.omega_z
    }
}

/// All modes with even transverse quantum numbers and 1 <= n <= cutoff.
pub fn modes_up_to(cutoff: usize) -> Vec<ModeIndex> {
    let mut out = Vec::new();
    for nx in (0..=cutoff).step_by(2) {
        for ny in (0..=cutoff - nx).step_by(2) {
            for nz in 0..=(cutoff - nx - ny) {
                if nx + ny + nz >= 1 {
                    out.push(ModeIndex { nx, ny, nz });
                }
            }
        }
    }
    out
}

/// How the auxiliary integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralRoute {
    /// Frozen-waist reduction; 1D quadrature in time.
    Approximate,
    /// Full 2D quadrature over time and the longitudinal coordinate.
    Exact,
}

/// Result of the correction solve.
#[derive(Debug, Clone)]
pub struct CorrectionVector {
    /// Basis amplitudes, internal length units.
    pub epsilon: [f64; 6],
    /// Sum of |G_n|^2 over the mode set.
    pub g_norm_sq: f64,
    /// Second-order fidelity estimate 1 - sum |G_n|^2.
    pub fidelity_estimate: f64,
}

/// Transverse factor S: integral of H_n(X) exp(-X^2) exp(-4 X^2 l^2 / w^2).
/// Zero for odd n.
pub fn s_factor(n: usize, w: f64, l: f64) -> f64 {
    let r = w * w / (4.0 * l * l + w * w);
    partitions(n)
        .iter()
        .filter(|t| t.k1 % 2 == 0)
        .map(|t| {
            let sgn = if t.k2 % 2 == 0 { 1.0 } else { -1.0 };
            t.multiplicity
                * sgn
                * 2.0f64.powi(t.k1 as i32)
                * r.powf((t.k1 + 1) as f64 / 2.0)
                * gamma_half_integer_arg(t.k1 + 1)
        })
        .sum()
}

/// Transverse factor with an extra X^2: integral of X^2 H_n(X) exp(-X^2)
/// exp(-4 X^2 l^2 / w^2). Zero for odd n.
pub fn q_factor(n: usize, w: f64, l: f64) -> f64 {
    let r = w * w / (4.0 * l * l + w * w);
    partitions(n)
        .iter()
        .filter(|t| t.k1 % 2 == 0)
        .map(|t| {
            let sgn = if t.k2 % 2 == 0 { 1.0 } else { -1.0 };
            t.multiplicity
                * sgn
                * 2.0f64.powi(t.k1 as i32)
                * r.powf((t.k1 + 3) as f64 / 2.0)
                * gamma_half_integer_arg(t.k1 + 3)
        })
        .sum()
}

pub struct EstaProblem {
    pub scales: DerivedScales,
    pub potential: PotentialField,
    pub path: TrapPath,
    pub depth: f64,
    pub final_time: f64,
}

impl EstaProblem {
    pub fn new(params: &SystemParams, scales: &DerivedScales) -> Result<Self> {
        let potential = PotentialField::new(params, scales);
        let d = params.distance_d * scales.l_z;
        let tf = params.final_time_tf * scales.tau_z;
        let path = TrapPath::sta(d, tf, scales.omega_z)?;
        Ok(EstaProblem {
            scales: *scales,
            potential,
            path,
            depth: params.depth_u0 * crate::RECOIL_ENERGY,
            final_time: tf,
        })
    }

    fn waist(&self, axis: Axis, z0: f64) -> f64 {
        // Waist at the dimensionless longitudinal offset Z0 (z = sqrt(2) l_z Z0).
        self.potential
            .waist_at(axis, std::f64::consts::SQRT_2 * self.scales.l_z * z0)
    }

    /// Product of the two transverse S factors at offset Z0.
    pub fn i_r1(&self, nx: usize, ny: usize, z0: f64) -> f64 {
        s_factor(nx, self.waist(Axis::X, z0), self.scales.l_x)
            * s_factor(ny, self.waist(Axis::Y, z0), self.scales.l_y)
    }

    fn w0(&self, axis: Axis) -> f64 {
        self.waist(axis, 0.0)
    }

    /// Longitudinal profile of the potential amplitude at offset Z0:
    /// U0 wx0 wy0 cos^2(sqrt(2) k l_z Z0) / (wx wy).
    fn amplitude(&self, z0: f64) -> f64 {
        let lz = self.scales.l_z;
        let wx = self.waist(Axis::X, z0);
        let wy = self.waist(Axis::Y, z0);
        self.depth * self.w0(Axis::X) * self.w0(Axis::Y)
            * (std::f64::consts::SQRT_2 * WAVE_K * lz * z0).cos().powi(2)
            / (wx * wy)
    }

    fn qc_over(&self, t: f64) -> f64 {
        self.path.classical_position(t) / (std::f64::consts::SQRT_2 * self.scales.l_z)
    }

    fn q0_over(&self, t: f64) -> f64 {
        self.path.position(t) / (std::f64::consts::SQRT_2 * self.scales.l_z)
    }

    /// Exact G_n by 2D quadrature over (t, Z). The Z window tracks the
    /// classical path; the Gaussian weight confines support to |Z_C| <= 8.
    pub fn g_mode_exact(&self, m: ModeIndex) -> Result<Complex64> {
        let s = self.scales;
        let omega = m.frequency(&s);
        let bracket = |t: f64, z: f64| -> f64 {
            let zc = z - self.qc_over(t);
            let z0 = z - self.q0_over(t);
            let mut b = self.amplitude(z0) * self.i_r1(m.nx, m.ny, z0) / std::f64::consts::PI;
            if m.nx == 0 && m.ny == 0 {
                b += 0.5 * s.omega_z * z0 * z0 + 0.25 * (s.omega_x + s.omega_y) - self.depth;
            }
            if m.nx == 2 && m.ny == 0 {
                b += s.omega_x;
            }
            if m.nx == 0 && m.ny == 2 {
                b += s.omega_y;
            }
            hermite(m.nz, zc) * (-zc * zc).exp() * b
        };
        let f = |t: f64, z: f64| Complex64::from_polar(1.0, omega * t) * bracket(t, z);
        let tol = self.scaled_tol_2d(&f, |t| {
            let c = self.qc_over(t);
            (c - 8.0, c + 8.0)
        });
        let (int, _) = quad2d(
            f,
            0.0,
            self.final_time,
            |t| {
                let c = self.qc_over(t);
                (c - 8.0, c + 8.0)
            },
            tol,
        )
        .map_err(|e| e.with_context("exact G quadrature"))?;
        Ok(-int / (m.norm_2n_nfact() * std::f64::consts::PI).sqrt())
    }

    /// Frozen-waist G_n: 1D quadrature in time over the analytic Z result.
    pub fn g_mode_approx(&self, m: ModeIndex) -> Result<Complex64> {
        let s = self.scales;
        let omega = m.frequency(&s);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let f = |t: f64| -> Complex64 {
            let qc = self.path.classical_position(t);
            let q0 = self.path.position(t);
            let mut term = Complex64::new(0.0, 0.0);
            if m.nz == 0 {
                if m.nx == 2 && m.ny == 0 {
                    term += s.omega_x;
                }
                if m.nx == 0 && m.ny == 2 {
                    term += s.omega_y;
                }
            }
            if m.nx == 0 && m.ny == 0 {
                // Harmonic restoring term: only n_z = 1, 2 survive.
                let delta = (qc - q0) / (std::f64::consts::SQRT_2 * s.l_z);
                if m.nz == 1 {
                    term += s.omega_z * delta;
                } else if m.nz == 2 {
                    term += s.omega_z;
                }
            }
            term += self.iz1_approx(m, qc, q0) / sqrt_pi;
            Complex64::from_polar(1.0, omega * t) * term
        };
        let tol = self.scaled_tol_1d(&f);
        let (int, _) = quad1d(f, 0.0, self.final_time, tol)
            .map_err(|e| e.with_context("approximate G quadrature"))?;
        Ok(-int / m.norm_2n_nfact().sqrt())
    }

    /// Auxiliary function for the frozen-waist longitudinal reductions.
    pub fn d_function(&self, l: usize, qc: f64, q0: f64) -> Complex64 {
        let lz = self.scales.l_z;
        let qc_s = qc / (std::f64::consts::SQRT_2 * lz);
        let beta = std::f64::consts::SQRT_2 * WAVE_K * lz;
        let damp = (-2.0 * WAVE_K * WAVE_K * lz * lz).exp();
        let phase = Complex64::from_polar(1.0, 2.0 * WAVE_K * (qc - q0));
        let zp = Complex64::new(qc_s, beta);
        let zm = Complex64::new(qc_s, -beta);
        let mut acc = Complex64::new(0.0, 0.0);
        for lam in 0..=l / 2 {
            let p = (l - 2 * lam) as u32;
            let w = binomial(l, 2 * lam) * gamma_half(lam);
            acc += w
                * (2.0 * qc_s.powi(p as i32)
                    + damp * (phase * zp.powu(p) + phase.conj() * zm.powu(p)));
        }
        acc
    }

    /// Frozen-waist longitudinal integral of the lattice term, assembled by
    /// expanding the Hermite polynomial around the classical path.
    pub fn iz1_approx(&self, m: ModeIndex, qc: f64, q0: f64) -> Complex64 {
        let lz = self.scales.l_z;
        let qc_s = qc / (std::f64::consts::SQRT_2 * lz);
        let pref = self.depth / (4.0 * std::f64::consts::PI)
            * self.i_r1_frozen(m.nx, m.ny);
        let mut acc = Complex64::new(0.0, 0.0);
        for part in partitions(m.nz) {
            let mut inner = Complex64::new(0.0, 0.0);
            for l in 0..=part.k1 {
                inner += binomial(part.k1, l)
                    * (-qc_s).powi((part.k1 - l) as i32)
                    * self.d_function(l, qc, q0);
            }
            acc += part.sign * part.multiplicity * 2.0f64.powi(part.k1 as i32) * inner;
        }
        pref * acc
    }

    /// Same quantity in closed form via Gaussian-weighted Hermite moments;
    /// used as an independent oracle for `iz1_approx`.
    pub fn iz1_closed_form(&self, m: ModeIndex, qc: f64, q0: f64) -> Complex64 {
        let lz = self.scales.l_z;
        let beta = std::f64::consts::SQRT_2 * WAVE_K * lz;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let damp = (-2.0 * WAVE_K * WAVE_K * lz * lz).exp();
        let phase = Complex64::from_polar(1.0, 2.0 * WAVE_K * (qc - q0));
        let b = Complex64::new(0.0, 2.0 * beta);
        let j = if m.nz == 0 {
            Complex64::new(0.5 * sqrt_pi, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        } + 0.25
            * damp
            * sqrt_pi
            * (phase * b.powu(m.nz as u32) + phase.conj() * (-b).powu(m.nz as u32));
        self.depth / std::f64::consts::PI * self.i_r1_frozen(m.nx, m.ny) * j
    }

    fn i_r1_frozen(&self, nx: usize, ny: usize) -> f64 {
        s_factor(nx, self.w0(Axis::X), self.scales.l_x)
            * s_factor(ny, self.w0(Axis::Y), self.scales.l_y)
    }

    /// The transverse-integrated sensitivity kernel at offset Z0 (exact
    /// waists); multiplies H_{nz}(Z_C) exp(-Z_C^2) in the K integrand.
    pub fn k_transverse_bracket(&self, m: ModeIndex, z0: f64) -> f64 {
        let s = self.scales;
        let lz = s.l_z;
        let wx = self.waist(Axis::X, z0);
        let wy = self.waist(Axis::Y, z0);
        let px = s_factor(m.nx, wx, s.l_x);
        let py = s_factor(m.ny, wy, s.l_y);
        let qx = q_factor(m.nx, wx, s.l_x);
        let qy = q_factor(m.ny, wy, s.l_y);
        let theta = 2.0 * std::f64::consts::SQRT_2 * WAVE_K * lz * z0;
        let rx = s.rayleigh_x / (s.rayleigh_x * s.rayleigh_x / (2.0 * lz * lz) + z0 * z0);
        let ry = s.rayleigh_y / (s.rayleigh_y * s.rayleigh_y / (2.0 * lz * lz) + z0 * z0);
        WAVE_K * theta.sin() * px * py
            + z0 / (2.0f64.powf(2.5) * lz.powi(3))
                * (theta.cos() + 1.0)
                * (rx * rx * (px * py - 8.0 * s.l_x * s.l_x / (wx * wx) * qx * py)
                    + ry * ry * (px * py - 8.0 * s.l_y * s.l_y / (wy * wy) * px * qy))
    }

    /// Exact K_n by 2D quadrature, one basis component at a time.
    pub fn k_mode_exact(&self, m: ModeIndex) -> Result<[Complex64; 6]> {
        let s = self.scales;
        let omega = m.frequency(&s);
        let w0_prod = self.w0(Axis::X) * self.w0(Axis::Y);
        let mut out = [Complex64::new(0.0, 0.0); 6];
        for (k, slot) in out.iter_mut().enumerate() {
            let basis = f_basis_poly(k);
            let f = |t: f64, z: f64| -> Complex64 {
                let zc = z - self.qc_over(t);
                let z0 = z - self.q0_over(t);
                let wx = self.waist(Axis::X, z0);
                let wy = self.waist(Axis::Y, z0);
                Complex64::from_polar(1.0, omega * t)
                    * basis.eval(t / self.final_time)
                    * (self.depth * w0_prod / (wx * wy))
                    * hermite(m.nz, zc)
                    * (-zc * zc).exp()
                    * self.k_transverse_bracket(m, z0)
            };
            let tol = self.scaled_tol_2d(&f, |t| {
                let c = self.qc_over(t);
                (c - 8.0, c + 8.0)
            });
            let (int, _) = quad2d(
                f,
                0.0,
                self.final_time,
                |t| {
                    let c = self.qc_over(t);
                    (c - 8.0, c + 8.0)
                },
                tol,
            )
            .map_err(|e| e.with_context("exact K quadrature"))?;
            *slot = -int / (m.norm_2n_nfact() * std::f64::consts::PI.powi(3)).sqrt();
        }
        Ok(out)
    }

    /// Frozen-waist Z reduction of the K integrand at time t (everything
    /// except exp(i omega t), the basis polynomial, and the prefactor).
    fn k_z_reduced(&self, m: ModeIndex, t: f64) -> Complex64 {
        let s = self.scales;
        let lz = s.l_z;
        let qc = self.path.classical_position(t);
        let q0 = self.path.position(t);
        let delta = (qc - q0) / (std::f64::consts::SQRT_2 * lz);
        let b0 = 2.0 * std::f64::consts::SQRT_2 * WAVE_K * lz;
        let phase = Complex64::from_polar(1.0, 2.0 * WAVE_K * (qc - q0));

        // Moments of H_{nz}(u) u^p exp(-u^2) against exp(i phi b0 u), shifted
        // by the path mismatch delta.
        let mom = |p: usize, phi: f64| -> Complex64 {
            let b = Complex64::new(0.0, phi * b0);
            let ph = match phi {
                x if x > 0.0 => phase,
                x if x < 0.0 => phase.conj(),
                _ => Complex64::new(1.0, 0.0),
            };
            let mut v = hermite_gaussian_moment(m.nz, p, b);
            if p == 1 {
                v += delta * hermite_gaussian_moment(m.nz, 0, b);
            }
            ph * v
        };

        let wx0 = self.w0(Axis::X);
        let wy0 = self.w0(Axis::Y);
        let px = s_factor(m.nx, wx0, s.l_x);
        let py = s_factor(m.ny, wy0, s.l_y);
        let qx = q_factor(m.nx, wx0, s.l_x);
        let qy = q_factor(m.ny, wy0, s.l_y);
        let rx0 = 2.0 * lz * lz / s.rayleigh_x;
        let ry0 = 2.0 * lz * lz / s.rayleigh_y;

        let sin_int = (mom(0, 1.0) - mom(0, -1.0)) / Complex64::new(0.0, 2.0);
        let cos_plus_one_int = 0.5 * (mom(1, 1.0) + mom(1, -1.0)) + mom(1, 0.0);
        let w = rx0 * rx0 * (px * py - 8.0 * s.l_x * s.l_x / (wx0 * wx0) * qx * py)
            + ry0 * ry0 * (px * py - 8.0 * s.l_y * s.l_y / (wy0 * wy0) * px * qy);
        WAVE_K * px * py * sin_int + w / (2.0f64.powf(2.5) * lz.powi(3)) * cos_plus_one_int
    }

    /// Frozen-waist K_n: 1D quadrature in time.
    pub fn k_mode_approx(&self, m: ModeIndex) -> Result<[Complex64; 6]> {
        let s = self.scales;
        let omega = m.frequency(&s);
        let pref = -self.depth / (m.norm_2n_nfact() * std::f64::consts::PI.powi(3)).sqrt();
        let mut out = [Complex64::new(0.0, 0.0); 6];
        let basis: Vec<Poly> = (0..6).map(f_basis_poly).collect();
        for (k, slot) in out.iter_mut().enumerate() {
            let f = |t: f64| -> Complex64 {
                Complex64::from_polar(1.0, omega * t)
                    * basis[k].eval(t / self.final_time)
                    * self.k_z_reduced(m, t)
            };
            let tol = self.scaled_tol_1d(&f);
            let (int, _) = quad1d(f, 0.0, self.final_time, tol)
                .map_err(|e| e.with_context("approximate K quadrature"))?;
            *slot = pref * int;
        }
        Ok(out)
    }

    /// Correction amplitudes from the mode set up to `cutoff`.
    pub fn correction(&self, cutoff: usize, route: IntegralRoute) -> Result<CorrectionVector> {
        let modes = modes_up_to(cutoff);
        let mut g_norm_sq = 0.0;
        let mut v = [0.0f64; 6];
        for m in modes {
            let (g, k) = match route {
                IntegralRoute::Approximate => (self.g_mode_approx(m)?, self.k_mode_approx(m)?),
                IntegralRoute::Exact => (self.g_mode_exact(m)?, self.k_mode_exact(m)?),
            };
            g_norm_sq += g.norm_sqr();
            for (vj, kj) in v.iter_mut().zip(&k) {
                *vj += (g.conj() * kj).re;
            }
        }
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv < 1e-300 {
            eprintln!("warning: degenerate fidelity gradient; correction set to zero");
            return Ok(CorrectionVector {
                epsilon: [0.0; 6],
                g_norm_sq,
                fidelity_estimate: 1.0 - g_norm_sq,
            });
        }
        let scale = -g_norm_sq / vv;
        let mut epsilon = [0.0; 6];
        for (e, vj) in epsilon.iter_mut().zip(&v) {
            *e = scale * vj;
        }
        Ok(CorrectionVector {
            epsilon,
            g_norm_sq,
            fidelity_estimate: 1.0 - g_norm_sq,
        })
    }

    /// Same amplitudes assembled through the quadratic fidelity model:
    /// eps = 2 (1 - F) grad F / ||grad F||^2 with F = 1 - sum |G_n|^2 and
    /// grad F = -2 sum Re(G_n K_n^*). Algebraically identical to
    /// `correction`; kept as a consistency check.
    pub fn correction_via_fidelity_gradient(
        &self,
        cutoff: usize,
        route: IntegralRoute,
    ) -> Result<CorrectionVector> {
        let modes = modes_up_to(cutoff);
        let mut g_norm_sq = 0.0;
        let mut grad = [0.0f64; 6];
        for m in modes {
            let (g, k) = match route {
                IntegralRoute::Approximate => (self.g_mode_approx(m)?, self.k_mode_approx(m)?),
                IntegralRoute::Exact => (self.g_mode_exact(m)?, self.k_mode_exact(m)?),
            };
            g_norm_sq += g.norm_sqr();
            for (gj, kj) in grad.iter_mut().zip(&k) {
                *gj += -2.0 * (g * kj.conj()).re;
            }
        }
        let gg: f64 = grad.iter().map(|x| x * x).sum();
        if gg < 1e-300 {
            eprintln!("warning: degenerate fidelity gradient; correction set to zero");
            return Ok(CorrectionVector {
                epsilon: [0.0; 6],
                g_norm_sq,
                fidelity_estimate: 1.0 - g_norm_sq,
            });
        }
        let one_minus_f = g_norm_sq;
        let mut epsilon = [0.0; 6];
        for (e, gj) in epsilon.iter_mut().zip(&grad) {
            *e = 2.0 * one_minus_f * gj / gg;
        }
        Ok(CorrectionVector {
            epsilon,
            g_norm_sq,
            fidelity_estimate: 1.0 - g_norm_sq,
        })
    }

    /// Absolute quadrature tolerance scaled to the integrand magnitude.
    fn scaled_tol_1d(&self, f: &dyn Fn(f64) -> Complex64) -> f64 {
        let n = 64;
        let mut mag = 0.0f64;
        for i in 0..=n {
            let t = self.final_time * i as f64 / n as f64;
            mag = mag.max(f(t).norm());
        }
        (mag * self.final_time * 1e-9).max(1e-300)
    }

    fn scaled_tol_2d(
        &self,
        f: &dyn Fn(f64, f64) -> Complex64,
        bounds: impl Fn(f64) -> (f64, f64),
    ) -> f64 {
        let n = 24;
        let mut mag = 0.0f64;
        let mut width = 0.0;
        for i in 0..=n {
            let t = self.final_time * i as f64 / n as f64;
            let (zl, zh) = bounds(t);
            width = zh - zl;
            for j in 0..=n {
                let z = zl + (zh - zl) * j as f64 / n as f64;
                mag = mag.max(f(t, z).norm());
            }
        }
        (mag * self.final_time * width * 1e-7).max(1e-300)
    }
}
