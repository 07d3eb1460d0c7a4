//! 3D Fourier split-operator Schroedinger solver in the frame comoving with
//! the trap.
//!
//! In the comoving (and velocity-boosted) frame the potential is static and
//! the trap motion enters only through an inertial impulse: per step the
//! velocity increment dv = qdot(t+dt) - qdot(t) applies a position phase
//! exp(-i m z dv / hbar) and a compensating momentum cross phase
//! exp(+i k_z dv dt / 2). Because the commutator chain of the kinetic and
//! linear-impulse generators terminates in a c-number, this factorization is
//! exact for the impulse term; the overall step is the usual second-order
//! Strang splitting in the potential.
//!
//! Internal units: hbar = 1, m = 1/2, k = 1 (so the kinetic factor is k^2).

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::potential::PotentialField;
use crate::scales::DerivedScales;
use crate::trajectory::TrapPath;

/// Uniform periodic grid; z is the fastest (contiguous) index.
#[derive(Debug, Clone)]
pub struct Grid3 {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    pub kxs: Vec<f64>,
    pub kys: Vec<f64>,
    pub kzs: Vec<f64>,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Shift of the z window relative to a symmetric one.
    pub z_offset: f64,
}

fn axis_coords(n: usize, length: f64, offset: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let d = length / n as f64;
    let xs = (0..n)
        .map(|i| -0.5 * length + offset + i as f64 * d)
        .collect();
    let dk = 2.0 * std::f64::consts::PI / length;
    let ks = (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            m * dk
        })
        .collect();
    (xs, ks, d)
}

impl Grid3 {
    /// Raw constructor; dimensions must be powers of two.
    pub fn new(n: (usize, usize, usize), lengths: (f64, f64, f64)) -> Result<Self> {
        Self::with_z_offset(n, lengths, 0.0)
    }

    /// Like `new` with the z window translated by `z_offset`.
    pub fn with_z_offset(
        n: (usize, usize, usize),
        lengths: (f64, f64, f64),
        z_offset: f64,
    ) -> Result<Self> {
        let (nx, ny, nz) = n;
        for (d, axis) in [(nx, 'x'), (ny, 'y'), (nz, 'z')] {
            if d < 4 || !d.is_power_of_two() {
                return Err(Error::InvalidParams(format!(
                    "grid dimension {axis} = {d} must be a power of two >= 4"
                )));
            }
        }
        if lengths.0 <= 0.0 || lengths.1 <= 0.0 || lengths.2 <= 0.0 {
            return Err(Error::InvalidParams("grid lengths must be positive".into()));
        }
        let (xs, kxs, dx) = axis_coords(nx, lengths.0, 0.0);
        let (ys, kys, dy) = axis_coords(ny, lengths.1, 0.0);
        let (zs, kzs, dz) = axis_coords(nz, lengths.2, z_offset);
        Ok(Grid3 {
            nx,
            ny,
            nz,
            xs,
            ys,
            zs,
            kxs,
            kys,
            kzs,
            dx,
            dy,
            dz,
            z_offset,
        })
    }

    /// Grid sized for a transport run. Transverse half-spans are chosen so
    /// the 3-cell boundary margin starts at least 6.5 oscillator lengths
    /// out, keeping the ground state's outer-cell mass below the 1e-8
    /// monitor (exactly +-8 l at 32 cells). The z axis covers an even
    /// number of lattice periods (at least 4 and at least 12 l_z), shifted
    /// a quarter period backward so both z boundaries land on barrier tops
    /// rather than on wells, with the extra room on the side a lagging atom
    /// drifts toward.
    pub fn for_scales(scales: &DerivedScales, n: (usize, usize, usize)) -> Result<Self> {
        let half_span = |cells: usize, l: f64| 6.5 * l / (1.0 - 6.0 / cells as f64);
        let period = std::f64::consts::PI / crate::WAVE_K;
        let mut periods = 4usize;
        while (periods as f64) * period < 12.0 * scales.l_z {
            periods += 2;
        }
        Self::with_z_offset(
            n,
            (
                2.0 * half_span(n.0, scales.l_x),
                2.0 * half_span(n.1, scales.l_y),
                periods as f64 * period,
            ),
            -0.25 * period,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ny + iy) * self.nz + iz
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }
}

/// A complex field on a Grid3.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: Grid3,
    pub data: Vec<Complex64>,
}

impl WaveField {
    pub fn zeros(grid: &Grid3) -> Self {
        WaveField {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Separable Gaussian exp(-x^2/4sx^2 - y^2/4sy^2 - z^2/4sz^2), normalized.
    pub fn gaussian(grid: &Grid3, sx: f64, sy: f64, sz: f64) -> Self {
        let mut f = WaveField::zeros(grid);
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                for iz in 0..grid.nz {
                    let v = (-grid.xs[ix].powi(2) / (4.0 * sx * sx)
                        - grid.ys[iy].powi(2) / (4.0 * sy * sy)
                        - grid.zs[iz].powi(2) / (4.0 * sz * sz))
                        .exp();
                    f.data[grid.idx(ix, iy, iz)] = Complex64::new(v, 0.0);
                }
            }
        }
        f.normalize();
        f
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.data.iter_mut().for_each(|c| *c *= inv);
        }
    }

    pub fn inner(&self, other: &WaveField) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.cell_volume()
    }

    /// Probability within 3 cells of any boundary, per axis maximum.
    pub fn boundary_mass(&self) -> f64 {
        self.boundary_mass_by_axis().1
    }

    /// Worst axis and its 3-cell boundary probability.
    pub fn boundary_mass_by_axis(&self) -> (char, f64) {
        let g = &self.grid;
        let dv = g.cell_volume();
        let edge = |i: usize, n: usize| i < 3 || i >= n - 3;
        let mut mx = 0.0;
        let mut my = 0.0;
        let mut mz = 0.0;
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                for iz in 0..g.nz {
                    let p = self.data[g.idx(ix, iy, iz)].norm_sqr() * dv;
                    if edge(ix, g.nx) {
                        mx += p;
                    }
                    if edge(iy, g.ny) {
                        my += p;
                    }
                    if edge(iz, g.nz) {
                        mz += p;
                    }
                }
            }
        }
        let mut worst = ('x', mx);
        if my > worst.1 {
            worst = ('y', my);
        }
        if mz > worst.1 {
            worst = ('z', mz);
        }
        worst
    }

    /// Mean longitudinal position.
    pub fn mean_z(&self) -> f64 {
        let g = &self.grid;
        let dv = g.cell_volume();
        let mut acc = 0.0;
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                for iz in 0..g.nz {
                    acc += g.zs[iz] * self.data[g.idx(ix, iy, iz)].norm_sqr() * dv;
                }
            }
        }
        acc / self.norm_sq()
    }

    /// Versioned binary checkpoint: text header then little-endian f64 pairs.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "wavefield v1")?;
        writeln!(f, "{} {} {}", self.grid.nx, self.grid.ny, self.grid.nz)?;
        writeln!(
            f,
            "{:.17e} {:.17e} {:.17e} {:.17e}",
            self.grid.dx * self.grid.nx as f64,
            self.grid.dy * self.grid.ny as f64,
            self.grid.dz * self.grid.nz as f64,
            self.grid.z_offset
        )?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for c in &self.data {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read(path)?;
        let header_end = raw
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .map(|(i, _)| i)
            .nth(2)
            .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        let header = std::str::from_utf8(&raw[..header_end])
            .map_err(|_| Error::Checkpoint("non-text header".into()))?;
        let mut lines = header.lines();
        let magic = lines.next().unwrap_or("");
        if magic != "wavefield v1" {
            return Err(Error::Checkpoint(format!("unknown format `{magic}`")));
        }
        let dims: Vec<usize> = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .filter_map(|s| s.parse().ok())
            .collect();
        let lens: Vec<f64> = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .filter_map(|s| s.parse().ok())
            .collect();
        if dims.len() != 3 || lens.len() != 4 {
            return Err(Error::Checkpoint("malformed header".into()));
        }
        let grid = Grid3::with_z_offset(
            (dims[0], dims[1], dims[2]),
            (lens[0], lens[1], lens[2]),
            lens[3],
        )?;
        let body = &raw[header_end + 1..];
        if body.len() != grid.len() * 16 {
            return Err(Error::Checkpoint(format!(
                "payload size {} does not match grid {}",
                body.len(),
                grid.len() * 16
            )));
        }
        let mut data = Vec::with_capacity(grid.len());
        let mut rdr = std::io::Cursor::new(body);
        let mut b8 = [0u8; 8];
        for _ in 0..grid.len() {
            rdr.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            rdr.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            data.push(Complex64::new(re, im));
        }
        Ok(WaveField { grid, data })
    }
}

/// Per-axis FFT plans for a fixed grid shape.
pub struct Fft3 {
    nx: usize,
    ny: usize,
    nz: usize,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    lane: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(grid: &Grid3) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(grid.nx),
            planner.plan_fft_forward(grid.ny),
            planner.plan_fft_forward(grid.nz),
        ];
        let inv = [
            planner.plan_fft_inverse(grid.nx),
            planner.plan_fft_inverse(grid.ny),
            planner.plan_fft_inverse(grid.nz),
        ];
        let lane_len = grid.nx.max(grid.ny).max(grid.nz);
        Fft3 {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            fwd,
            inv,
            lane: vec![Complex64::new(0.0, 0.0); lane_len],
        }
    }

    fn transform_axis(&mut self, data: &mut [Complex64], axis: usize, forward: bool) {
        let plan = if forward {
            self.fwd[axis].clone()
        } else {
            self.inv[axis].clone()
        };
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        match axis {
            2 => {
                for chunk in data.chunks_exact_mut(nz) {
                    plan.process(chunk);
                }
            }
            1 => {
                let lane = &mut self.lane[..ny];
                for ix in 0..nx {
                    for iz in 0..nz {
                        let base = ix * ny * nz + iz;
                        for iy in 0..ny {
                            lane[iy] = data[base + iy * nz];
                        }
                        plan.process(lane);
                        for iy in 0..ny {
                            data[base + iy * nz] = lane[iy];
                        }
                    }
                }
            }
            0 => {
                let lane = &mut self.lane[..nx];
                let stride = ny * nz;
                for rest in 0..stride {
                    for ix in 0..nx {
                        lane[ix] = data[rest + ix * stride];
                    }
                    plan.process(lane);
                    for ix in 0..nx {
                        data[rest + ix * stride] = lane[ix];
                    }
                }
            }
            _ => unreachable!(),
        }
        if !forward {
            let n = [nx, ny, nz][axis] as f64;
            let inv_n = 1.0 / n;
            data.iter_mut().for_each(|c| *c *= inv_n);
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform_axis(data, 2, true);
        self.transform_axis(data, 1, true);
        self.transform_axis(data, 0, true);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform_axis(data, 0, false);
        self.transform_axis(data, 1, false);
        self.transform_axis(data, 2, false);
    }
}

/// Variational energy: kinetic part from the spectral representation plus
/// the pointwise potential average. `pot` holds V on the grid.
pub fn energy_expectation(field: &WaveField, pot: &[f64], fft: &mut Fft3) -> f64 {
    let g = &field.grid;
    let mut hat = field.data.clone();
    fft.forward(&mut hat);
    let mut t_num = 0.0;
    let mut den = 0.0;
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            for iz in 0..g.nz {
                let k2 = g.kxs[ix] * g.kxs[ix] + g.kys[iy] * g.kys[iy] + g.kzs[iz] * g.kzs[iz];
                let p = hat[g.idx(ix, iy, iz)].norm_sqr();
                t_num += k2 * p;
                den += p;
            }
        }
    }
    let kinetic = t_num / den;
    let dv = g.cell_volume();
    let mut v_num = 0.0;
    let mut v_den = 0.0;
    for (c, &v) in field.data.iter().zip(pot) {
        let p = c.norm_sqr() * dv;
        v_num += v * p;
        v_den += p;
    }
    kinetic + v_num / v_den
}

/// Potential sampled on the grid.
pub fn potential_on_grid(grid: &Grid3, mut v: impl FnMut(f64, f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            for iz in 0..grid.nz {
                out[grid.idx(ix, iy, iz)] = v(grid.xs[ix], grid.ys[iy], grid.zs[iz]);
            }
        }
    }
    out
}

/// Imaginary-time relaxation to the ground state of the given potential.
/// Starts from `trial`, renormalizes each step, stops when the variational
/// energy changes by less than `tol` between checks.
pub fn ground_state(
    grid: &Grid3,
    pot: &[f64],
    trial: &WaveField,
    dtau: f64,
    tol: f64,
) -> Result<(WaveField, f64)> {
    let mut fft = Fft3::new(grid);
    let mut field = trial.clone();
    field.normalize();

    let half: Vec<f64> = pot.iter().map(|&v| (-0.5 * v * dtau).exp()).collect();
    let mut kin = vec![0.0f64; grid.len()];
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            for iz in 0..grid.nz {
                let k2 = grid.kxs[ix] * grid.kxs[ix]
                    + grid.kys[iy] * grid.kys[iy]
                    + grid.kzs[iz] * grid.kzs[iz];
                kin[grid.idx(ix, iy, iz)] = (-k2 * dtau).exp();
            }
        }
    }

    let max_iters = 200_000;
    let mut last_e = f64::INFINITY;
    for iter in 0..max_iters {
        for (c, &h) in field.data.iter_mut().zip(&half) {
            *c *= h;
        }
        fft.forward(&mut field.data);
        for (c, &k) in field.data.iter_mut().zip(&kin) {
            *c *= k;
        }
        fft.inverse(&mut field.data);
        for (c, &h) in field.data.iter_mut().zip(&half) {
            *c *= h;
        }
        field.normalize();

        if iter % 20 == 19 {
            let e = energy_expectation(&field, pot, &mut fft);
            if !e.is_finite() {
                return Err(Error::NanDetected { step: iter });
            }
            if (e - last_e).abs() < tol {
                let (axis, mass) = field.boundary_mass_by_axis();
                if mass > 1e-8 {
                    return Err(Error::GridTooSmall { axis, mass });
                }
                return Ok((field, e));
            }
            last_e = e;
        }
    }
    Err(Error::GroundStateNonConvergence(max_iters))
}

/// Diagnostics accumulated over a real-time propagation.
#[derive(Debug, Clone)]
pub struct RunDiagnostics {
    pub initial_norm: f64,
    pub final_norm: f64,
    pub max_boundary_mass: f64,
    pub steps: usize,
    /// (t, <z>) samples, at most ~200 entries.
    pub mean_z_trace: Vec<(f64, f64)>,
}

/// Split-operator propagator in the comoving frame.
pub struct Propagator {
    grid: Grid3,
    fft: Fft3,
    pot_half: Vec<Complex64>,
    kin: Vec<Complex64>,
    path: TrapPath,
    pub dt: f64,
    pub n_steps: usize,
    trace_mean_z: bool,
}

impl Propagator {
    /// `pot` must hold the static comoving potential (trap minimum at the
    /// origin). The number of steps is chosen so that n dt = t_f exactly.
    pub fn new(grid: &Grid3, pot: &[f64], path: TrapPath, dt_request: f64) -> Result<Self> {
        if !dt_request.is_finite() || dt_request <= 0.0 {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        let n_steps = (path.final_time / dt_request).ceil().max(1.0) as usize;
        let dt = path.final_time / n_steps as f64;
        let pot_half: Vec<Complex64> = pot
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt))
            .collect();
        let mut kin = vec![Complex64::new(0.0, 0.0); grid.len()];
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                for iz in 0..grid.nz {
                    let k2 = grid.kxs[ix] * grid.kxs[ix]
                        + grid.kys[iy] * grid.kys[iy]
                        + grid.kzs[iz] * grid.kzs[iz];
                    kin[grid.idx(ix, iy, iz)] = Complex64::from_polar(1.0, -k2 * dt);
                }
            }
        }
        Ok(Propagator {
            grid: grid.clone(),
            fft: Fft3::new(grid),
            pot_half,
            kin,
            path,
            dt,
            n_steps,
            trace_mean_z: false,
        })
    }

    pub fn with_mean_z_trace(mut self) -> Self {
        self.trace_mean_z = true;
        self
    }

    pub fn propagate(&mut self, field: &mut WaveField) -> Result<RunDiagnostics> {
        let g = self.grid.clone();
        let initial_norm = field.norm_sq();
        let mut max_boundary = 0.0f64;
        let mut trace = Vec::new();
        let sample_every = (self.n_steps / 200).max(1);

        for step in 0..self.n_steps {
            let t = step as f64 * self.dt;
            let dv_kick = self.path.velocity(t + self.dt) - self.path.velocity(t);

            for (c, &p) in field.data.iter_mut().zip(&self.pot_half) {
                *c *= p;
            }
            if dv_kick != 0.0 {
                // Position impulse exp(-i m z dv), m = 1/2.
                for ix in 0..g.nx {
                    for iy in 0..g.ny {
                        let base = (ix * g.ny + iy) * g.nz;
                        for iz in 0..g.nz {
                            field.data[base + iz] *=
                                Complex64::from_polar(1.0, -0.5 * g.zs[iz] * dv_kick);
                        }
                    }
                }
            }
            self.fft.forward(&mut field.data);
            for (c, &k) in field.data.iter_mut().zip(&self.kin) {
                *c *= k;
            }
            if dv_kick != 0.0 {
                // Cross phase restoring exactness of the kinetic/impulse split.
                for ix in 0..g.nx {
                    for iy in 0..g.ny {
                        let base = (ix * g.ny + iy) * g.nz;
                        for iz in 0..g.nz {
                            field.data[base + iz] *= Complex64::from_polar(
                                1.0,
                                0.5 * g.kzs[iz] * dv_kick * self.dt,
                            );
                        }
                    }
                }
            }
            self.fft.inverse(&mut field.data);
            for (c, &p) in field.data.iter_mut().zip(&self.pot_half) {
                *c *= p;
            }

            if step % sample_every == 0 {
                if self.trace_mean_z {
                    trace.push((t + self.dt, field.mean_z()));
                }
                max_boundary = max_boundary.max(field.boundary_mass());
                if !field.data[0].re.is_finite() {
                    return Err(Error::NanDetected { step });
                }
            }
        }

        let final_norm = field.norm_sq();
        if !final_norm.is_finite() {
            return Err(Error::NanDetected { step: self.n_steps });
        }
        Ok(RunDiagnostics {
            initial_norm,
            final_norm,
            max_boundary_mass: max_boundary,
            steps: self.n_steps,
            mean_z_trace: trace,
        })
    }
}

/// |<a|b>|^2 for normalized states.
pub fn fidelity(a: &WaveField, b: &WaveField) -> f64 {
    a.inner(b).norm_sqr()
}

/// Comoving potential and trial widths for a transport problem.
pub fn comoving_potential(grid: &Grid3, field: &PotentialField) -> Vec<f64> {
    potential_on_grid(grid, |x, y, z| field.full_potential(x, y, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scales::{derive_scales, SystemParams};
    use approx::assert_relative_eq;

    fn harmonic_setup(
        n: (usize, usize, usize),
    ) -> (Grid3, Vec<f64>, DerivedScales, PotentialField) {
        let p = SystemParams::new(100.0, 85.0, 3.0, 300.0, 300.0).unwrap();
        let s = derive_scales(&p).unwrap();
        let f = PotentialField::new(&p, &s);
        let grid = Grid3::for_scales(&s, n).unwrap();
        let pot = potential_on_grid(&grid, |x, y, z| f.harmonic_potential(x, y, z));
        (grid, pot, s, f)
    }

    #[test]
    fn grid_construction_and_spectral_axes() {
        let g = Grid3::new((8, 8, 16), (4.0, 4.0, 8.0)).unwrap();
        assert_eq!(g.len(), 8 * 8 * 16);
        assert_relative_eq!(g.dx, 0.5);
        assert_relative_eq!(g.xs[0], -2.0);
        // k ordering: 0, dk, ..., -dk.
        assert_relative_eq!(g.kxs[0], 0.0);
        assert_relative_eq!(g.kxs[1], std::f64::consts::PI / 2.0);
        assert_relative_eq!(g.kxs[7], -std::f64::consts::PI / 2.0);
        assert!(Grid3::new((7, 8, 16), (4.0, 4.0, 8.0)).is_err());
    }

    #[test]
    fn fft_roundtrip_preserves_field() {
        let g = Grid3::new((8, 4, 16), (3.0, 2.0, 5.0)).unwrap();
        let mut f = WaveField::gaussian(&g, 0.4, 0.3, 0.7);
        let orig = f.data.clone();
        let mut fft = Fft3::new(&g);
        fft.forward(&mut f.data);
        fft.inverse(&mut f.data);
        let err: f64 = f
            .data
            .iter()
            .zip(&orig)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "roundtrip error {err}");
    }

    #[test]
    fn harmonic_ground_state_energy() {
        let (grid, pot, s, _) = harmonic_setup((32, 32, 64));
        let trial = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
        let dtau = s.tau_z / 200.0;
        let (gs, e) = ground_state(&grid, &pot, &trial, dtau, 1e-10).unwrap();
        let expect = -100.0 + 0.5 * (s.omega_x + s.omega_y + s.omega_z);
        assert!(
            ((e - expect) / expect).abs() < 5e-3,
            "E = {e}, harmonic value {expect}"
        );
        assert!(gs.boundary_mass() < 1e-8);
    }

    #[test]
    fn free_gaussian_spreads_analytically() {
        // Pure kinetic evolution of a 1D-separable Gaussian; the z factor
        // spreads as sigma^2(t) = sigma0^2 (1 + (t / sigma0^2)^2) with m = 1/2.
        let g = Grid3::new((4, 4, 128), (2.0, 2.0, 32.0)).unwrap();
        let s0: f64 = 0.8;
        let mut f = WaveField::zeros(&g);
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                for iz in 0..g.nz {
                    let v = (-g.zs[iz].powi(2) / (4.0 * s0 * s0)).exp();
                    f.data[g.idx(ix, iy, iz)] = Complex64::new(v, 0.0);
                }
            }
        }
        f.normalize();
        let t = 0.5;
        let path = TrapPath::sta(0.0, t, 1.0).unwrap();
        let pot = vec![0.0; g.len()];
        let mut prop = Propagator::new(&g, &pot, path, t / 32.0).unwrap();
        let diag = prop.propagate(&mut f).unwrap();
        assert_eq!(diag.steps, 32);
        // Analytic complex width: e^{-z^2/4a} -> sqrt(a/(a+it)) e^{-z^2/4(a+it)}
        // for i dpsi/dt = -psi'' (hbar = 1, m = 1/2).
        let norm0 = 1.0 / ((2.0 * std::f64::consts::PI).powf(0.25) * s0.sqrt());
        let st2 = Complex64::new(s0 * s0, t);
        let center = norm0 * (s0 * s0 / st2).sqrt();
        let mut max_err = 0.0f64;
        for iz in 0..g.nz {
            let z = g.zs[iz];
            let want = center * (-z * z / (4.0 * st2)).exp();
            // Transverse factors are uniform; compare z-profiles through the
            // ratio at the transverse origin (zs[nz/2] = 0).
            let got = f.data[g.idx(0, 0, iz)] / f.data[g.idx(0, 0, g.nz / 2)] * center;
            max_err = max_err.max((got - want).norm());
        }
        assert!(max_err < 1e-6, "max deviation from analytic spread {max_err}");
    }

    #[test]
    fn norm_is_conserved_over_thousand_steps() {
        let (grid, _, s, f) = harmonic_setup((8, 8, 32));
        let pot = potential_on_grid(&grid, |x, y, z| f.full_potential(x, y, z));
        let mut field = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
        let path = TrapPath::sta(0.5 * s.l_z, 1000.0 * s.tau_z / 400.0, s.omega_z).unwrap();
        let mut prop = Propagator::new(&grid, &pot, path, s.tau_z / 400.0).unwrap();
        assert_eq!(prop.n_steps, 1000);
        let diag = prop.propagate(&mut field).unwrap();
        assert!(
            (diag.final_norm - diag.initial_norm).abs() < 1e-10,
            "norm drift {}",
            diag.final_norm - diag.initial_norm
        );
    }

    #[test]
    fn transport_error_scales_as_dt_squared() {
        let (grid, _, s, f) = harmonic_setup((8, 8, 64));
        let pot = potential_on_grid(&grid, |x, y, z| f.full_potential(x, y, z));
        // Any smooth state exposes the splitting error; the trial Gaussian
        // avoids a full ground-state relaxation here.
        let gs = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
        let d = 2.0 * s.l_z;
        let tf = 2.0 * s.tau_z;

        let run = |dt: f64| -> Complex64 {
            let path = TrapPath::sta(d, tf, s.omega_z).unwrap();
            let mut prop = Propagator::new(&grid, &pot, path, dt).unwrap();
            let mut field = gs.clone();
            prop.propagate(&mut field).unwrap();
            gs.inner(&field)
        };
        let reference = run(tf / 4096.0);
        let err_a = (run(tf / 256.0) - reference).norm();
        let err_b = (run(tf / 512.0) - reference).norm();
        let ratio = err_a / err_b;
        assert!(
            (ratio - 4.0).abs() < 0.5,
            "convergence ratio {ratio} (errors {err_a}, {err_b})"
        );
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        // Real static Hamiltonian: conjugation reverses time, so
        // conjugate-propagate-conjugate after a forward run must return the
        // initial state up to the splitting's reversible global phase.
        let (grid, _, s, f) = harmonic_setup((8, 8, 32));
        let pot = potential_on_grid(&grid, |x, y, z| f.full_potential(x, y, z));
        let initial = WaveField::gaussian(&grid, 1.2 * s.l_x, s.l_y, 0.8 * s.l_z);
        let mut field = initial.clone();
        let tf = 0.7 * s.tau_z;
        let path = TrapPath::sta(0.0, tf, s.omega_z).unwrap();
        let mut prop = Propagator::new(&grid, &pot, path, s.tau_z / 400.0).unwrap();
        prop.propagate(&mut field).unwrap();
        field.data.iter_mut().for_each(|c| *c = c.conj());
        let path = TrapPath::sta(0.0, tf, s.omega_z).unwrap();
        let mut prop = Propagator::new(&grid, &pot, path, s.tau_z / 400.0).unwrap();
        prop.propagate(&mut field).unwrap();
        field.data.iter_mut().for_each(|c| *c = c.conj());
        let f_back = fidelity(&initial, &field);
        assert!(f_back > 1.0 - 1e-8, "return fidelity {f_back}");
    }

    #[test]
    fn lattice_ground_energy_below_harmonic_value() {
        let (grid, _, s, f) = harmonic_setup((32, 32, 64));
        let pot = potential_on_grid(&grid, |x, y, z| f.full_potential(x, y, z));
        let trial = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
        let (_, e) = ground_state(&grid, &pot, &trial, s.tau_z / 200.0, 1e-10).unwrap();
        let harmonic = -100.0 + 0.5 * (s.omega_x + s.omega_y + s.omega_z);
        assert!(
            e < harmonic,
            "anharmonic softening should lower E: {e} vs {harmonic}"
        );
    }

    #[test]
    fn checkpoint_roundtrip() {
        let g = Grid3::new((4, 4, 8), (1.0, 2.0, 3.0)).unwrap();
        let f = WaveField::gaussian(&g, 0.2, 0.3, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("field.bin");
        f.save(&p).unwrap();
        let g2 = WaveField::load(&p).unwrap();
        assert_eq!(g2.grid.nx, 4);
        let err: f64 = f
            .data
            .iter()
            .zip(&g2.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err == 0.0);
        assert!(WaveField::load(&dir.path().join("missing.bin")).is_err());
    }
}
