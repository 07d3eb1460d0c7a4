//! The full anharmonic conveyor-belt potential, its harmonic approximation
//! and the longitudinal derivative entering the correction-vector gradient.
//!
//! Sign convention: attractive wells. The focus value is -U0 and the harmonic
//! expansion is -U0 + (m/2)(wx^2 x^2 + wy^2 y^2 + wz^2 z^2).

use crate::scales::{DerivedScales, SystemParams};
use crate::{MASS, RECOIL_ENERGY, WAVE_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone)]
pub struct PotentialField {
    pub params: SystemParams,
    pub scales: DerivedScales,
    /// Waists in internal length units.
    wx0: f64,
    wy0: f64,
    u0: f64,
}

impl PotentialField {
    pub fn new(params: &SystemParams, scales: &DerivedScales) -> Self {
        PotentialField {
            params: *params,
            scales: *scales,
            wx0: params.waist_x_w0 * scales.l_z,
            wy0: params.waist_y_w0 * scales.l_z,
            u0: params.depth_u0 * RECOIL_ENERGY,
        }
    }

    /// Beam waist w(z) = w0 sqrt(1 + (z/Z_R)^2). Internal units.
    pub fn waist_at(&self, axis: Axis, z: f64) -> f64 {
        let (w0, zr) = match axis {
            Axis::X => (self.wx0, self.scales.rayleigh_x),
            Axis::Y => (self.wy0, self.scales.rayleigh_y),
        };
        w0 * (1.0 + (z / zr).powi(2)).sqrt()
    }

    /// Lattice depth U0 * wx0 * wy0 / (wx(z) wy(z)).
    pub fn depth_at(&self, z: f64) -> f64 {
        self.u0 * self.wx0 * self.wy0
            / (self.waist_at(Axis::X, z) * self.waist_at(Axis::Y, z))
    }

    /// Full 3D potential, attractive convention.
    pub fn full_potential(&self, x: f64, y: f64, z: f64) -> f64 {
        let wx = self.waist_at(Axis::X, z);
        let wy = self.waist_at(Axis::Y, z);
        let gauss = (-2.0 * (x * x / (wx * wx) + y * y / (wy * wy))).exp();
        -self.depth_at(z) * (WAVE_K * z).cos().powi(2) * gauss
    }

    /// Full potential with the trap minimum displaced to q0 (z -> z - q0
    /// everywhere, including waists).
    pub fn full_potential_shifted(&self, x: f64, y: f64, z: f64, q0: f64) -> f64 {
        self.full_potential(x, y, z - q0)
    }

    /// Harmonic approximation around the focus.
    pub fn harmonic_potential(&self, x: f64, y: f64, z: f64) -> f64 {
        let s = &self.scales;
        -self.u0
            + 0.5
                * MASS
                * (s.omega_x * s.omega_x * x * x
                    + s.omega_y * s.omega_y * y * y
                    + s.omega_z * s.omega_z * z * z)
    }

    /// Analytic d/dz of the shifted full potential at (x, y, z).
    ///
    /// U = -D(s) cos^2(k s) G(s) with s = z - q0, D the z-dependent depth and
    /// G the transverse Gaussian; each factor contributes through the waists.
    pub fn du_dz(&self, x: f64, y: f64, z: f64, q0: f64) -> f64 {
        let s = z - q0;
        let wx = self.waist_at(Axis::X, s);
        let wy = self.waist_at(Axis::Y, s);
        // w'(s) = w0^2 s / (Z_R^2 w(s))
        let dwx = self.wx0 * self.wx0 * s / (self.scales.rayleigh_x.powi(2) * wx);
        let dwy = self.wy0 * self.wy0 * s / (self.scales.rayleigh_y.powi(2) * wy);
        let depth = self.u0 * self.wx0 * self.wy0 / (wx * wy);
        let ddepth = -depth * (dwx / wx + dwy / wy);
        let cos = (WAVE_K * s).cos();
        let sin = (WAVE_K * s).sin();
        let gauss = (-2.0 * (x * x / (wx * wx) + y * y / (wy * wy))).exp();
        let dgauss = gauss
            * 4.0
            * (x * x * dwx / (wx * wx * wx) + y * y * dwy / (wy * wy * wy));
        -(ddepth * cos * cos * gauss - 2.0 * WAVE_K * depth * cos * sin * gauss
            + depth * cos * cos * dgauss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scales::derive_scales;
    use approx::assert_relative_eq;

    fn field(u0: f64, wx: f64, wy: f64) -> PotentialField {
        let p = SystemParams::new(u0, 85.0, 3.0, wx, wy).unwrap();
        let s = derive_scales(&p).unwrap();
        PotentialField::new(&p, &s)
    }

    #[test]
    fn waist_growth() {
        let f = field(60.0, 4.2e6, 4.2e6);
        assert_relative_eq!(f.waist_at(Axis::X, 0.0), f.wx0);
        assert_relative_eq!(
            f.waist_at(Axis::X, f.scales.rayleigh_x),
            f.wx0 * 2.0f64.sqrt(),
            max_relative = 1e-14
        );
        // At paper parameters the fractional growth over the transport range
        // is negligible.
        let z = 85.0 * f.scales.l_z;
        let frac = f.waist_at(Axis::X, z) / f.wx0 - 1.0;
        assert!(frac.abs() < 1e-9, "fractional growth {frac}");
    }

    #[test]
    fn depth_at_focus_and_rayleigh() {
        let f = field(60.0, 300.0, 300.0);
        assert_relative_eq!(f.depth_at(0.0), 60.0, max_relative = 1e-14);
        // Both waists grow by sqrt(2) at the (equal) Rayleigh length.
        assert_relative_eq!(
            f.depth_at(f.scales.rayleigh_x),
            30.0,
            max_relative = 1e-12
        );
        let g = field(60.0, 4.2e6, 4.2e6);
        let z = 10.0 * g.scales.l_z;
        assert!((g.depth_at(z) - 60.0).abs() / 60.0 < 1e-10);
    }

    #[test]
    fn full_potential_focus_node_and_waist_point() {
        let f = field(60.0, 4.2e6, 4.2e6);
        assert_relative_eq!(f.full_potential(0.0, 0.0, 0.0), -60.0, max_relative = 1e-12);
        let node = std::f64::consts::PI / (2.0 * WAVE_K);
        assert!(f.full_potential(0.0, 0.0, node).abs() < 1e-10);
        assert_relative_eq!(
            f.full_potential(f.wx0 / 2.0, 0.0, 0.0),
            -60.0 * (-0.5f64).exp(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn harmonic_matches_full_curvature() {
        let f = field(100.0, 300.0, 450.0);
        assert_relative_eq!(f.harmonic_potential(0.0, 0.0, 0.0), -100.0);
        // Numeric second z-derivative of the full potential at the origin.
        let h = 1e-4;
        let d2 = (f.full_potential(0.0, 0.0, h) - 2.0 * f.full_potential(0.0, 0.0, 0.0)
            + f.full_potential(0.0, 0.0, -h))
            / (h * h);
        assert_relative_eq!(
            d2,
            MASS * f.scales.omega_z * f.scales.omega_z,
            max_relative = 1e-6
        );
        // Harmonic value at one transverse oscillator length.
        let lx = f.scales.l_x;
        assert_relative_eq!(
            f.harmonic_potential(lx, 0.0, 0.0),
            -100.0 + 0.5 * MASS * f.scales.omega_x.powi(2) * lx * lx,
            max_relative = 1e-12
        );
    }

    #[test]
    fn harmonic_agrees_with_full_near_origin() {
        let f = field(60.0, 4.2e6, 4.2e6);
        let zmax = 0.05 / WAVE_K;
        let xmax = 1e-3 * f.wx0;
        for i in 0..10 {
            let z = -zmax + 2.0 * zmax * i as f64 / 9.0;
            let x = -xmax + 2.0 * xmax * i as f64 / 9.0;
            let diff = (f.full_potential(x, 0.0, z) - f.harmonic_potential(x, 0.0, z)).abs();
            assert!(diff < 1e-3 * RECOIL_ENERGY, "diff {diff} at z={z}");
        }
    }

    #[test]
    fn near_periodicity_along_z() {
        let f = field(60.0, 4.2e6, 4.2e6);
        let period = std::f64::consts::PI / WAVE_K;
        for i in 0..8 {
            let z = -2.0 * period + i as f64 * period / 2.0;
            let a = f.full_potential(0.0, 0.0, z);
            let b = f.full_potential(0.0, 0.0, z + period);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn du_dz_stationary_at_minimum_and_matches_finite_differences() {
        let f = field(100.0, 300.0, 450.0);
        let q0 = 7.3;
        assert!(f.du_dz(0.0, 0.0, q0, q0).abs() < 1e-10 * 100.0);

        // Deterministic pseudo-random points.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let scale = 100.0 * WAVE_K; // U0 k
        for _ in 0..100 {
            let x = (rand() - 0.5) * 2.0 * f.scales.l_x;
            let y = (rand() - 0.5) * 2.0 * f.scales.l_y;
            let z = (rand() - 0.5) * 20.0;
            let q0 = (rand() - 0.5) * 10.0;
            let h = 1e-6;
            let fd = (f.full_potential_shifted(x, y, z + h, q0)
                - f.full_potential_shifted(x, y, z - h, q0))
                / (2.0 * h);
            let an = f.du_dz(x, y, z, q0);
            assert!(
                (an - fd).abs() / scale < 1e-8,
                "at ({x},{y},{z};{q0}): analytic {an}, fd {fd}"
            );
        }
    }

    #[test]
    fn du_dz_transverse_flat_limit() {
        // With enormous waists the derivative reduces to
        // U0 k sin(2k(z-q0)) * (transverse Gaussian).
        let f = field(60.0, 4.2e6, 4.2e6);
        for z in [-3.0, -0.4, 0.9, 2.7] {
            let q0 = 0.55;
            let expect = 60.0 * WAVE_K * (2.0 * WAVE_K * (z - q0)).sin();
            let got = f.du_dz(0.0, 0.0, z, q0);
            assert_relative_eq!(got, expect, max_relative = 1e-8);
        }
    }

    #[test]
    fn du_dz_integrates_back_to_potential_difference() {
        let f = field(100.0, 300.0, 450.0);
        let (za, zb) = (-1.3, 2.1);
        let (x, y, q0) = (0.2 * f.scales.l_x, -0.1 * f.scales.l_y, 0.7);
        let (integral, _) = crate::mathkit::quad1d(
            |z| f.du_dz(x, y, z, q0),
            za,
            zb,
            1e-11,
        )
        .unwrap();
        let diff = f.full_potential_shifted(x, y, zb, q0)
            - f.full_potential_shifted(x, y, za, q0);
        assert_relative_eq!(integral, diff, max_relative = 1e-9);
    }
}
