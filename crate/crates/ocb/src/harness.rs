//! Run orchestration: configs, single transport runs, fidelity sweeps,
//! threshold-time searches, method comparisons, and result persistence.
//!
//! Everything here is deterministic: identical configs produce identical
//! records byte for byte.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::esta::{EstaProblem, IntegralRoute};
use crate::potential::PotentialField;
use crate::scales::{derive_scales, DerivedScales, SystemParams};
use crate::tdse::{comoving_potential, fidelity, ground_state, Grid3, Propagator, WaveField};
use crate::trajectory::{Method, TrapPath};

fn default_grid() -> (usize, usize, usize) {
    (32, 32, 256)
}

fn default_dt_tauz() -> f64 {
    1.0 / 400.0
}

fn default_cutoff() -> usize {
    2
}

fn default_sweep_tf() -> Vec<f64> {
    // 12 points from 1 to 12 trap periods.
    (1..=12).map(|i| i as f64).collect()
}

/// Full description of a run or sweep. Times in trap periods, lengths in
/// longitudinal oscillator lengths, depth in recoil energies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub depth_u0: f64,
    pub distance_d: f64,
    pub waist_x: f64,
    pub waist_y: f64,
    pub method: Method,
    /// Transport time for single runs.
    #[serde(default)]
    pub tf_tauz: Option<f64>,
    /// t_f axis for sweeps, t099 searches, and comparisons.
    #[serde(default = "default_sweep_tf")]
    pub sweep_tf_tauz: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid: (usize, usize, usize),
    #[serde(default = "default_dt_tauz")]
    pub dt_tauz: f64,
    /// Mode-sum cutoff for the corrected path.
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system_params(self.tf_tauz.unwrap_or(1.0))?.validate()?;
        if self.sweep_tf_tauz.is_empty()
            || self.sweep_tf_tauz.windows(2).any(|w| w[1] <= w[0])
            || self.sweep_tf_tauz.iter().any(|&t| !t.is_finite() || t <= 0.0)
        {
            return Err(Error::BadSweepAxis);
        }
        if self.dt_tauz > 1.0 / 200.0 {
            return Err(Error::TimeStepTooLarge {
                dt_tauz: self.dt_tauz,
            });
        }
        if !(1..=4).contains(&self.cutoff) {
            return Err(Error::InvalidParams(format!(
                "mode cutoff {} outside 1..=4",
                self.cutoff
            )));
        }
        Ok(())
    }

    pub fn system_params(&self, tf_tauz: f64) -> Result<SystemParams> {
        SystemParams::new(
            self.depth_u0,
            self.distance_d,
            tf_tauz,
            self.waist_x,
            self.waist_y,
        )
    }
}

/// One transport result row; the CSV column order is the field order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FidelityRecord {
    pub method: String,
    pub u0_er: f64,
    pub d_lz: f64,
    pub wx_lz: f64,
    pub wy_lz: f64,
    pub tf_tauz: f64,
    pub fidelity: f64,
    pub accel_ratio: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dt_tauz: f64,
    pub runtime_seconds: f64,
    pub version: String,
}

/// State shared across the t_f points of a sweep: scales, grid, comoving
/// potential, and the relaxed ground state (none depend on t_f).
pub struct TransportContext {
    pub config: RunConfig,
    pub scales: DerivedScales,
    pub grid: Grid3,
    pub potential_values: Vec<f64>,
    pub ground: WaveField,
    pub ground_energy: f64,
}

impl TransportContext {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let params = config.system_params(1.0)?;
        let scales = derive_scales(&params)?;
        let field = PotentialField::new(&params, &scales);
        let grid = Grid3::for_scales(&scales, config.grid)?;
        let pot = comoving_potential(&grid, &field);
        let trial = WaveField::gaussian(&grid, scales.l_x, scales.l_y, scales.l_z);
        let (ground, ground_energy) =
            ground_state(&grid, &pot, &trial, scales.tau_z / 200.0, 1e-10)
                .map_err(|e| e.with_context("ground-state preparation"))?;
        Ok(TransportContext {
            config: config.clone(),
            scales,
            grid,
            potential_values: pot,
            ground,
            ground_energy,
        })
    }

    fn build_path(&self, method: Method, tf_tauz: f64) -> Result<TrapPath> {
        let s = &self.scales;
        let d = self.config.distance_d * s.l_z;
        let tf = tf_tauz * s.tau_z;
        let correction;
        let corr_slice = if method == Method::Esta {
            let params = self.config.system_params(tf_tauz)?;
            let problem = EstaProblem::new(&params, s)?;
            correction = problem
                .correction(self.config.cutoff, IntegralRoute::Approximate)
                .map_err(|e| e.with_context(format!("path correction at tf = {tf_tauz} tau_z")))?;
            Some(&correction.epsilon[..])
        } else {
            None
        };
        TrapPath::with_method(method, d, tf, s.omega_z, corr_slice)
    }

    /// Run one transport at the given time and report the resulting record.
    pub fn run(&self, method: Method, tf_tauz: f64) -> Result<FidelityRecord> {
        let started = Instant::now();
        let s = &self.scales;
        let path = self.build_path(method, tf_tauz)?;
        let accel_ratio = path.max_atom_acceleration() / s.a_max;
        let dt = self.config.dt_tauz * s.tau_z;
        let mut prop = Propagator::new(&self.grid, &self.potential_values, path, dt)?;
        let mut field = self.ground.clone();
        prop.propagate(&mut field).map_err(|e| {
            e.with_context(format!(
                "{} transport at tf = {tf_tauz} tau_z",
                method.as_str()
            ))
        })?;
        let f = fidelity(&self.ground, &field);
        debug_assert!(f <= 1.0 + 1e-9);
        Ok(FidelityRecord {
            method: method.as_str().to_string(),
            u0_er: self.config.depth_u0,
            d_lz: self.config.distance_d,
            wx_lz: self.config.waist_x,
            wy_lz: self.config.waist_y,
            tf_tauz,
            fidelity: f,
            accel_ratio,
            nx: self.grid.nx,
            ny: self.grid.ny,
            nz: self.grid.nz,
            dt_tauz: self.config.dt_tauz,
            runtime_seconds: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// Single transport at `config.tf_tauz`.
pub fn run_transport(config: &RunConfig) -> Result<FidelityRecord> {
    let tf = config
        .tf_tauz
        .ok_or_else(|| Error::InvalidParams("transport requires tf_tauz".into()))?;
    TransportContext::prepare(config)?.run(config.method, tf)
}

/// Fidelity at every point of the configured t_f axis.
pub fn sweep_tf(config: &RunConfig) -> Result<Vec<FidelityRecord>> {
    let ctx = TransportContext::prepare(config)?;
    config
        .sweep_tf_tauz
        .iter()
        .map(|&tf| ctx.run(config.method, tf))
        .collect()
}

/// Result of a threshold-time search.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    pub t099_tauz: f64,
    pub records: Vec<FidelityRecord>,
}

/// First t_f reaching fidelity 0.99: coarse scan over the configured axis,
/// then bisection to 0.02 trap periods (at most 8 extra runs). Errors as
/// censored when the axis never reaches the threshold.
pub fn t099(config: &RunConfig) -> Result<ThresholdResult> {
    let ctx = TransportContext::prepare(config)?;
    t099_with_context(&ctx, config.method)
}

pub fn t099_with_context(ctx: &TransportContext, method: Method) -> Result<ThresholdResult> {
    const TARGET: f64 = 0.99;
    let mut records = Vec::new();
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for &tf in &ctx.config.sweep_tf_tauz {
        let rec = ctx.run(method, tf)?;
        let f = rec.fidelity;
        records.push(rec);
        if f >= TARGET {
            bracket = Some(match prev {
                Some((t_lo, _)) => (t_lo, tf),
                None => (0.0, tf),
            });
            break;
        }
        prev = Some((tf, f));
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::Censored { target: TARGET })?;
    for _ in 0..8 {
        if hi - lo <= 0.02 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let rec = ctx.run(method, mid)?;
        let f = rec.fidelity;
        records.push(rec);
        if f >= TARGET {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        t099_tauz: hi,
        records,
    })
}

/// All four methods over the shared t_f axis, in a fixed method order.
pub fn compare_methods(config: &RunConfig) -> Result<Vec<FidelityRecord>> {
    let ctx = TransportContext::prepare(config)?;
    let mut out = Vec::new();
    for method in [Method::Triangle, Method::Sine, Method::Sta, Method::Esta] {
        for &tf in &config.sweep_tf_tauz {
            out.push(ctx.run(method, tf)?);
        }
    }
    Ok(out)
}

/// Fixed-column CSV of records.
pub fn write_csv(records: &[FidelityRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON report: config echo, records, and a content hash over the record
/// payload for reproducibility checks.
pub fn write_json(config: &RunConfig, records: &[FidelityRecord], path: &Path) -> Result<()> {
    let payload = serde_json::to_string(records)?;
    let hash = hex_digest(payload.as_bytes());
    let doc = serde_json::json!({
        "config": config,
        "records": records,
        "content_sha256": hash,
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
