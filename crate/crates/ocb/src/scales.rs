//! Unit system, the five independent physical parameters and all derived
//! scales (trap frequencies, Rayleigh lengths, oscillator lengths, the trap
//! acceleration limit).
//!
//! The waists are quoted in units of `l_z`, but `l_z` itself depends on
//! `omega_z`, which depends on the Rayleigh lengths, which depend on the
//! waists. `derive_scales` closes this loop by fixed-point iteration seeded
//! with the paraxial frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{HBAR, MASS, RECOIL_ENERGY, WAVE_K};

/// The five independent inputs, in reporting units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Lattice depth U0 in recoil energies E_R.
    pub depth_u0: f64,
    /// Transport distance d in units of l_z.
    pub distance_d: f64,
    /// Transport time t_f in units of tau_z.
    pub final_time_tf: f64,
    /// Transverse waist w_{x,0} in units of l_z.
    pub waist_x_w0: f64,
    /// Transverse waist w_{y,0} in units of l_z.
    pub waist_y_w0: f64,
}

impl SystemParams {
    pub fn new(
        depth_u0: f64,
        distance_d: f64,
        final_time_tf: f64,
        waist_x_w0: f64,
        waist_y_w0: f64,
    ) -> Result<Self> {
        let p = SystemParams {
            depth_u0,
            distance_d,
            final_time_tf,
            waist_x_w0,
            waist_y_w0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("depth_u0", self.depth_u0),
            ("distance_d", self.distance_d),
            ("final_time_tf", self.final_time_tf),
            ("waist_x_w0", self.waist_x_w0),
            ("waist_y_w0", self.waist_y_w0),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Optional pass-through metadata tying the dimensionless depth to a concrete
/// laser setup. Not used by any computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalCalibration {
    pub wavelength_lambda: f64,
    pub laser_power_p0: f64,
    pub setup_constant_c: f64,
}

/// Everything derivable from [`SystemParams`], in internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
    pub rayleigh_x: f64,
    pub rayleigh_y: f64,
    pub l_z: f64,
    pub tau_z: f64,
    pub recoil_e_r: f64,
    /// Dimensionless product k * l_z.
    pub k_lz: f64,
    pub l_x: f64,
    pub l_y: f64,
    /// Trap acceleration limit U0 * k / m.
    pub a_max: f64,
}

/// Roles for unit conversion between I/O units and internal recoil units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitRole {
    /// Lengths quoted in l_z.
    Length,
    /// Times quoted in tau_z.
    Time,
    /// Energies quoted in E_R.
    Energy,
}

const MAX_FIXED_POINT_ITERS: usize = 100;
const FIXED_POINT_TOL: f64 = 1e-12;

/// Paraxial longitudinal frequency sqrt(2 U0 k^2 / m).
pub fn paraxial_omega_z(depth_u0: f64) -> f64 {
    (2.0 * depth_u0 * RECOIL_ENERGY * WAVE_K * WAVE_K / MASS).sqrt()
}

pub fn derive_scales(params: &SystemParams) -> Result<DerivedScales> {
    params.validate()?;
    let u0 = params.depth_u0 * RECOIL_ENERGY;

    // Close the l_z <-> omega_z circularity: waists are quoted in l_z.
    let mut omega_z = paraxial_omega_z(params.depth_u0);
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let l_z = (HBAR / (2.0 * MASS * omega_z)).sqrt();
        let wx = params.waist_x_w0 * l_z;
        let wy = params.waist_y_w0 * l_z;
        let zrx = WAVE_K * wx * wx / 2.0;
        let zry = WAVE_K * wy * wy / 2.0;
        // A grossly non-paraxial iterate makes the iteration oscillate;
        // reject as soon as it appears rather than time out.
        for (axis, zr) in [('x', zrx), ('y', zry)] {
            if WAVE_K * zr <= 10.0 {
                return Err(Error::ParaxialViolation {
                    axis,
                    k_zr: WAVE_K * zr,
                });
            }
        }
        let next = (u0 / MASS
            * (zrx.powi(-2) + zry.powi(-2) + 2.0 * WAVE_K * WAVE_K))
            .sqrt();
        last_change = ((next - omega_z) / next).abs();
        omega_z = next;
        if last_change < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: MAX_FIXED_POINT_ITERS,
            last_change,
        });
    }

    let l_z = (HBAR / (2.0 * MASS * omega_z)).sqrt();
    let wx = params.waist_x_w0 * l_z;
    let wy = params.waist_y_w0 * l_z;
    let rayleigh_x = WAVE_K * wx * wx / 2.0;
    let rayleigh_y = WAVE_K * wy * wy / 2.0;
    for (axis, zr) in [('x', rayleigh_x), ('y', rayleigh_y)] {
        if WAVE_K * zr <= 10.0 {
            return Err(Error::ParaxialViolation {
                axis,
                k_zr: WAVE_K * zr,
            });
        }
    }

    let omega_x = (4.0 * u0 / (MASS * wx * wx)).sqrt();
    let omega_y = (4.0 * u0 / (MASS * wy * wy)).sqrt();

    Ok(DerivedScales {
        omega_x,
        omega_y,
        omega_z,
        rayleigh_x,
        rayleigh_y,
        l_z,
        tau_z: 2.0 * std::f64::consts::PI / omega_z,
        recoil_e_r: RECOIL_ENERGY,
        k_lz: WAVE_K * l_z,
        l_x: (HBAR / (2.0 * MASS * omega_x)).sqrt(),
        l_y: (HBAR / (2.0 * MASS * omega_y)).sqrt(),
        a_max: u0 * WAVE_K / MASS,
    })
}

/// The acceleration above which the standing-wave minima are fully tilted
/// away: |a_max| = U0 k / m.
pub fn max_trap_acceleration(params: &SystemParams) -> f64 {
    params.depth_u0 * RECOIL_ENERGY * WAVE_K / MASS
}

impl DerivedScales {
    /// Convert a value from I/O units (E_R, l_z, tau_z) to internal units.
    pub fn to_internal(&self, value: f64, role: UnitRole) -> f64 {
        match role {
            UnitRole::Length => value * self.l_z,
            UnitRole::Time => value * self.tau_z,
            UnitRole::Energy => value * self.recoil_e_r,
        }
    }

    /// Convert a value from internal units back to I/O units.
    pub fn from_internal(&self, value: f64, role: UnitRole) -> f64 {
        match role {
            UnitRole::Length => value / self.l_z,
            UnitRole::Time => value / self.tau_z,
            UnitRole::Energy => value / self.recoil_e_r,
        }
    }

    /// Residual of the omega_z self-consistency relation, relative.
    pub fn omega_z_residual(&self, params: &SystemParams) -> f64 {
        let u0 = params.depth_u0 * RECOIL_ENERGY;
        let rhs = (u0 / MASS
            * (self.rayleigh_x.powi(-2)
                + self.rayleigh_y.powi(-2)
                + 2.0 * WAVE_K * WAVE_K))
            .sqrt();
        ((self.omega_z - rhs) / rhs).abs()
    }
}
