//! Command-line front end: trajectory design, mode-integral evaluation,
//! ground-state preparation, transport runs, sweeps, threshold searches,
//! and method comparisons.
//!
//! Exit codes: 0 success, 2 censored threshold search, 1 any other failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ocb::error::{Error, Result};
use ocb::esta::{modes_up_to, EstaProblem, IntegralRoute};
use ocb::harness::{
    compare_methods, run_transport, sweep_tf, t099, write_csv, write_json, RunConfig,
};
use ocb::scales::derive_scales;
use ocb::tdse::{comoving_potential, ground_state, Grid3, WaveField};
use ocb::trajectory::{Method, TrapPath};

#[derive(Parser)]
#[command(name = "ocb", version, about = "Single-atom conveyor-belt transport designer and solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid as NX,NY,NZ.
    #[arg(long)]
    grid: Option<String>,
    /// Time step in trap periods.
    #[arg(long = "dt-tauz")]
    dt_tauz: Option<f64>,
    /// Path method: sta | esta | sine | triangle.
    #[arg(long)]
    method: Option<String>,
    /// Mode-sum cutoff for the corrected path.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Lattice depth in recoil energies.
    #[arg(long)]
    u0: Option<f64>,
    /// Transport distance in longitudinal oscillator lengths.
    #[arg(long)]
    d: Option<f64>,
    /// Beam waists in longitudinal oscillator lengths.
    #[arg(long)]
    wx: Option<f64>,
    #[arg(long)]
    wy: Option<f64>,
    /// Transport time in trap periods (single runs).
    #[arg(long)]
    tf: Option<f64>,
    /// Comma-separated t_f axis in trap periods (sweeps and searches).
    #[arg(long = "tf-list")]
    tf_list: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit sampled trap path (position, velocity, acceleration).
    Design(Common),
    /// Evaluate mode integrals and the path correction amplitudes.
    Gk(Common),
    /// Relax and store the initial ground state.
    Groundstate(Common),
    /// Single transport run at --tf.
    Transport(Common),
    /// Fidelity over the configured t_f axis.
    Sweep(Common),
    /// First t_f reaching fidelity 0.99.
    T099(Common),
    /// All four methods over the shared t_f axis.
    Compare(Common),
}

fn parse_grid(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParams(format!("bad grid spec `{s}`")))?;
    if parts.len() != 3 {
        return Err(Error::InvalidParams(format!("grid spec `{s}` needs NX,NY,NZ")));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn parse_method(s: &str) -> Result<Method> {
    match s.to_ascii_lowercase().as_str() {
        "sta" => Ok(Method::Sta),
        "esta" => Ok(Method::Esta),
        "sine" => Ok(Method::Sine),
        "triangle" => Ok(Method::Triangle),
        other => Err(Error::InvalidParams(format!("unknown method `{other}`"))),
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig {
                depth_u0: 100.0,
                distance_d: 85.0,
                waist_x: 1790.0,
                waist_y: 537.0,
                method: Method::Sta,
                tf_tauz: None,
                sweep_tf_tauz: (1..=12).map(|i| i as f64).collect(),
                grid: (32, 32, 256),
                dt_tauz: 1.0 / 400.0,
                cutoff: 2,
            },
        };
        if let Some(v) = self.u0 {
            cfg.depth_u0 = v;
        }
        if let Some(v) = self.d {
            cfg.distance_d = v;
        }
        if let Some(v) = self.wx {
            cfg.waist_x = v;
        }
        if let Some(v) = self.wy {
            cfg.waist_y = v;
        }
        if let Some(v) = self.tf {
            cfg.tf_tauz = Some(v);
        }
        if let Some(list) = &self.tf_list {
            cfg.sweep_tf_tauz = list
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidParams(format!("bad tf list `{list}`")))?;
        }
        if let Some(g) = &self.grid {
            cfg.grid = parse_grid(g)?;
        }
        if let Some(v) = self.dt_tauz {
            cfg.dt_tauz = v;
        }
        if let Some(m) = &self.method {
            cfg.method = parse_method(m)?;
        }
        if let Some(n) = self.cutoff {
            cfg.cutoff = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn build_path(cfg: &RunConfig, tf_tauz: f64) -> Result<TrapPath> {
    let params = cfg.system_params(tf_tauz)?;
    let scales = derive_scales(&params)?;
    let correction;
    let corr_slice = if cfg.method == Method::Esta {
        let problem = EstaProblem::new(&params, &scales)?;
        correction = problem.correction(cfg.cutoff, IntegralRoute::Approximate)?;
        Some(&correction.epsilon[..])
    } else {
        None
    };
    TrapPath::with_method(
        cfg.method,
        cfg.distance_d * scales.l_z,
        tf_tauz * scales.tau_z,
        scales.omega_z,
        corr_slice,
    )
}

fn cmd_design(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let tf_tauz = cfg.tf_tauz.unwrap_or(3.0);
    let params = cfg.system_params(tf_tauz)?;
    let scales = derive_scales(&params)?;
    let path = build_path(&cfg, tf_tauz)?;
    let dir = common.out_dir()?;
    let file = dir.join(format!("design_{}.csv", cfg.method.as_str()));
    let mut w = csv::Writer::from_path(&file)?;
    w.write_record(["t_tauz", "q0_lz", "v_lz_per_tauz", "a_lz_per_tauz2"])?;
    let n = 400;
    for i in 0..=n {
        let t = path.final_time * i as f64 / n as f64;
        w.write_record(&[
            format!("{:.8}", t / scales.tau_z),
            format!("{:.10}", path.position(t) / scales.l_z),
            format!("{:.10}", path.velocity(t) * scales.tau_z / scales.l_z),
            format!(
                "{:.10}",
                path.acceleration(t) * scales.tau_z * scales.tau_z / scales.l_z
            ),
        ])?;
    }
    w.flush()?;
    let ratio = path.max_atom_acceleration() / scales.a_max;
    println!(
        "design method={} tf={tf_tauz} tau_z accel_ratio={ratio:.4} -> {}",
        cfg.method.as_str(),
        file.display()
    );
    Ok(())
}

fn cmd_gk(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let tf_tauz = cfg.tf_tauz.unwrap_or(3.0);
    let params = cfg.system_params(tf_tauz)?;
    let scales = derive_scales(&params)?;
    let problem = EstaProblem::new(&params, &scales)?;
    let mut mode_rows = Vec::new();
    for m in modes_up_to(cfg.cutoff) {
        let g = problem.g_mode_approx(m)?;
        let k = problem.k_mode_approx(m)?;
        mode_rows.push(serde_json::json!({
            "mode": [m.nx, m.ny, m.nz],
            "g": [g.re, g.im],
            "k": k.iter().map(|c| vec![c.re, c.im]).collect::<Vec<_>>(),
        }));
    }
    let corr = problem.correction(cfg.cutoff, IntegralRoute::Approximate)?;
    let doc = serde_json::json!({
        "config": cfg,
        "tf_tauz": tf_tauz,
        "modes": mode_rows,
        "epsilon": corr.epsilon,
        "g_norm_sq": corr.g_norm_sq,
        "fidelity_estimate": corr.fidelity_estimate,
    });
    let dir = common.out_dir()?;
    let file = dir.join("modes.json");
    std::fs::write(&file, serde_json::to_string_pretty(&doc)?)?;
    println!(
        "gk cutoff={} fidelity_estimate={:.6} -> {}",
        cfg.cutoff,
        corr.fidelity_estimate,
        file.display()
    );
    Ok(())
}

fn cmd_groundstate(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let params = cfg.system_params(1.0)?;
    let scales = derive_scales(&params)?;
    let field = ocb::potential::PotentialField::new(&params, &scales);
    let grid = Grid3::for_scales(&scales, cfg.grid)?;
    let pot = comoving_potential(&grid, &field);
    let trial = WaveField::gaussian(&grid, scales.l_x, scales.l_y, scales.l_z);
    let (state, energy) = ground_state(&grid, &pot, &trial, scales.tau_z / 200.0, 1e-10)?;
    let dir = common.out_dir()?;
    let ckpt = dir.join("ground.ckpt");
    state.save(&ckpt)?;
    let doc = serde_json::json!({
        "config": cfg,
        "energy_er": energy,
        "boundary_mass": state.boundary_mass(),
        "checkpoint": ckpt.display().to_string(),
    });
    std::fs::write(dir.join("groundstate.json"), serde_json::to_string_pretty(&doc)?)?;
    println!("groundstate energy={energy:.8} E_R -> {}", ckpt.display());
    Ok(())
}

fn cmd_transport(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let rec = run_transport(&cfg)?;
    let dir = common.out_dir()?;
    write_csv(std::slice::from_ref(&rec), &dir.join("transport.csv"))?;
    write_json(&cfg, std::slice::from_ref(&rec), &dir.join("transport.json"))?;
    println!(
        "transport method={} tf={} tau_z fidelity={:.6}",
        rec.method, rec.tf_tauz, rec.fidelity
    );
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let records = sweep_tf(&cfg)?;
    let dir = common.out_dir()?;
    write_csv(&records, &dir.join("sweep.csv"))?;
    write_json(&cfg, &records, &dir.join("sweep.json"))?;
    for r in &records {
        println!("sweep tf={:.4} fidelity={:.6}", r.tf_tauz, r.fidelity);
    }
    Ok(())
}

fn cmd_t099(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let res = t099(&cfg)?;
    let dir = common.out_dir()?;
    write_csv(&res.records, &dir.join("t099_records.csv"))?;
    write_json(&cfg, &res.records, &dir.join("t099.json"))?;
    println!("t099 method={} t099={:.4} tau_z", cfg.method.as_str(), res.t099_tauz);
    Ok(())
}

fn cmd_compare(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let records = compare_methods(&cfg)?;
    let dir = common.out_dir()?;
    write_csv(&records, &dir.join("compare.csv"))?;
    write_json(&cfg, &records, &dir.join("compare.json"))?;
    for r in &records {
        println!(
            "compare method={} tf={:.4} fidelity={:.6}",
            r.method, r.tf_tauz, r.fidelity
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Design(c) => cmd_design(c),
        Cmd::Gk(c) => cmd_gk(c),
        Cmd::Groundstate(c) => cmd_groundstate(c),
        Cmd::Transport(c) => cmd_transport(c),
        Cmd::Sweep(c) => cmd_sweep(c),
        Cmd::T099(c) => cmd_t099(c),
        Cmd::Compare(c) => cmd_compare(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut cur: Option<&Error> = Some(&e);
            let censored = loop {
                match cur {
                    Some(Error::Censored { .. }) => break true,
                    Some(Error::WithContext { source, .. }) => cur = Some(source),
                    _ => break false,
                }
            };
            if censored {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
