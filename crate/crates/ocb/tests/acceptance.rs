//! End-to-end acceptance gate. Each test prints one `criterion N ... PASS`
//! line (a failed assertion marks the criterion FAIL). Criterion 7 checks a
//! single depth regime by default; set OCB_ACCEPTANCE_FULL=1 to run all
//! three and the cross-regime monotonicity check.

use ocb::esta::{modes_up_to, EstaProblem, IntegralRoute, ModeIndex};
use ocb::harness::{RunConfig, TransportContext};
use ocb::scales::{derive_scales, SystemParams};
use ocb::trajectory::{
    f_basis_poly, solve_f_basis, sta_trap_coeffs, Method, TrapPath, F_BASIS_TABLE,
};

fn pass(n: usize, detail: &str) {
    println!("criterion {n}: PASS ({detail})");
}

const WIDE_WAIST: f64 = 4.2e6;

fn reference_problem(depth: f64, tf_tauz: f64) -> (SystemParams, EstaProblem) {
    let p = SystemParams::new(depth, 85.0, tf_tauz, WIDE_WAIST, WIDE_WAIST).unwrap();
    let s = derive_scales(&p).unwrap();
    let problem = EstaProblem::new(&p, &s).unwrap();
    (p, problem)
}

#[test]
fn criterion_1_polynomial_coefficients() {
    // Depth-independent part sums to 1 (unit transport), the curvature
    // correction part sums to 0.
    let base = sta_trap_coeffs(0.0);
    let with_g = sta_trap_coeffs(1.0);
    let sum_base: f64 = base.iter().sum();
    let sum_g: f64 = with_g.iter().zip(&base).map(|(a, b)| a - b).sum();
    assert!((sum_base - 1.0).abs() < 1e-12, "sum of base coefficients {sum_base}");
    assert!(sum_g.abs() < 1e-12, "sum of correction coefficients {sum_g}");

    // Basis-polynomial table against the interpolation-system oracle.
    let solved = solve_f_basis().unwrap();
    let mut worst = 0.0f64;
    for (n, row) in solved.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let rel = (F_BASIS_TABLE[n][k] - v).abs() / v.abs();
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-6, "worst table deviation {worst:.3e}");
    // Node property: exact for the solved system; the tabulated values are
    // rounded to 8 significant figures on entries of order 1e6, so their
    // node residuals can only be bounded at the rounding scale.
    for k in 1..=6usize {
        for j in 1..=6usize {
            let s = j as f64 / 7.0;
            let expect = if j == k { 1.0 } else { 0.0 };
            let solved_val: f64 = solved
                .iter()
                .enumerate()
                .map(|(n, row)| row[k - 1] * s.powi(n as i32 + 3))
                .sum();
            assert!((solved_val - expect).abs() < 1e-7);
            assert!((f_basis_poly(k - 1).eval(s) - expect).abs() < 0.2);
        }
    }
    pass(1, &format!("coefficient sums exact, table within {worst:.1e}"));
}

#[test]
fn criterion_2_peak_classical_acceleration() {
    let d = 3.7;
    let tf = 2.9;
    let path = TrapPath::sta(d, tf, 5.0).unwrap();
    let ratio = path.max_atom_acceleration() / (d / (tf * tf));
    assert!(
        (ratio - 9.372).abs() < 1e-3,
        "peak acceleration ratio {ratio}"
    );
    pass(2, &format!("max accel = {ratio:.4} d/tf^2"));
}

#[test]
fn criterion_3_reduced_integrals_match_quadrature() {
    let (_, problem) = reference_problem(60.0, 3.0);
    let mut detail = String::new();
    for m in modes_up_to(2) {
        let g_exact = problem.g_mode_exact(m).unwrap();
        let g_approx = problem.g_mode_approx(m).unwrap();
        if g_exact.norm() > 1e-12 {
            let rel = (g_approx - g_exact).norm() / g_exact.norm();
            assert!(
                rel <= 1e-3,
                "mode ({},{},{}) g mismatch {rel:.3e}",
                m.nx,
                m.ny,
                m.nz
            );
            detail.push_str(&format!("g{}{}{}={rel:.1e} ", m.nx, m.ny, m.nz));
        }
        let k_exact = problem.k_mode_exact(m).unwrap();
        let k_approx = problem.k_mode_approx(m).unwrap();
        let norm: f64 = k_exact.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let diff: f64 = k_exact
                .iter()
                .zip(&k_approx)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let rel = diff / norm;
            assert!(
                rel <= 1e-3,
                "mode ({},{},{}) k mismatch {rel:.3e}",
                m.nx,
                m.ny,
                m.nz
            );
            detail.push_str(&format!("k{}{}{}={rel:.1e} ", m.nx, m.ny, m.nz));
        }
    }
    pass(3, detail.trim());
}

#[test]
fn criterion_4_correction_routes_and_cutoff() {
    let (_, problem) = reference_problem(60.0, 3.0);
    let via_grad = problem
        .correction_via_fidelity_gradient(2, IntegralRoute::Approximate)
        .unwrap();
    let direct = problem.correction(2, IntegralRoute::Approximate).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in via_grad.epsilon.iter().zip(&direct.epsilon) {
        worst = worst.max((a - b).abs());
    }
    let scale: f64 = direct.epsilon.iter().map(|e| e * e).sum::<f64>().sqrt();
    assert!(worst / scale < 1e-12, "route mismatch {:.3e}", worst / scale);

    let single = problem.correction(1, IntegralRoute::Approximate).unwrap();
    let diff: f64 = single
        .epsilon
        .iter()
        .zip(&direct.epsilon)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel = diff / scale;
    assert!(rel < 0.05, "cutoff sensitivity {rel:.3e}");
    pass(4, &format!("routes identical, cutoff shift {:.2}%", rel * 100.0));
}

#[test]
fn criterion_5_solver_validation() {
    // The detailed checks live in the solver module's test suite; this
    // criterion reruns the two load-bearing ones at acceptance parameters.
    use num_complex::Complex64;
    use ocb::potential::PotentialField;
    use ocb::tdse::*;

    let p = SystemParams::new(100.0, 85.0, 3.0, 300.0, 300.0).unwrap();
    let s = derive_scales(&p).unwrap();
    let f = PotentialField::new(&p, &s);

    // Harmonic ground-state energy.
    let grid = Grid3::for_scales(&s, (32, 32, 64)).unwrap();
    let pot = potential_on_grid(&grid, |x, y, z| f.harmonic_potential(x, y, z));
    let trial = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
    let (_, e) = ground_state(&grid, &pot, &trial, s.tau_z / 200.0, 1e-10).unwrap();
    let expect = -100.0 + 0.5 * (s.omega_x + s.omega_y + s.omega_z);
    let e_rel = ((e - expect) / expect).abs();
    assert!(e_rel < 5e-3, "harmonic energy off by {e_rel:.3e}");

    // Free-particle spreading against the closed form.
    let g = Grid3::new((4, 4, 128), (2.0, 2.0, 32.0)).unwrap();
    let s0: f64 = 0.8;
    let mut field = WaveField::zeros(&g);
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            for iz in 0..g.nz {
                let v = (-g.zs[iz].powi(2) / (4.0 * s0 * s0)).exp();
                field.data[g.idx(ix, iy, iz)] = Complex64::new(v, 0.0);
            }
        }
    }
    field.normalize();
    let t = 0.5;
    let path = TrapPath::sta(0.0, t, 1.0).unwrap();
    let free = vec![0.0; g.len()];
    let mut prop = Propagator::new(&g, &free, path, t / 32.0).unwrap();
    prop.propagate(&mut field).unwrap();
    let norm0 = 1.0 / ((2.0 * std::f64::consts::PI).powf(0.25) * s0.sqrt());
    let st2 = Complex64::new(s0 * s0, t);
    let center = norm0 * (s0 * s0 / st2).sqrt();
    let mut spread_err = 0.0f64;
    for iz in 0..g.nz {
        let z = g.zs[iz];
        let want = center * (-z * z / (4.0 * st2)).exp();
        let got = field.data[g.idx(0, 0, iz)] / field.data[g.idx(0, 0, g.nz / 2)] * center;
        spread_err = spread_err.max((got - want).norm());
    }
    assert!(spread_err < 1e-6, "spreading error {spread_err:.3e}");

    // Norm conservation over 10^3 steps in the full potential.
    let grid = Grid3::for_scales(&s, (8, 8, 128)).unwrap();
    let pot = potential_on_grid(&grid, |x, y, z| f.full_potential(x, y, z));
    let mut field = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
    let path = TrapPath::sta(0.5 * s.l_z, 1000.0 * s.tau_z / 400.0, s.omega_z).unwrap();
    let mut prop = Propagator::new(&grid, &pot, path, s.tau_z / 400.0).unwrap();
    let diag = prop.propagate(&mut field).unwrap();
    let drift = (diag.final_norm - diag.initial_norm).abs();
    assert!(drift < 1e-10, "norm drift {drift:.3e}");

    // Second-order convergence in dt.
    let start = WaveField::gaussian(&grid, s.l_x, s.l_y, s.l_z);
    let tf = 2.0 * s.tau_z;
    let run = |dt: f64| -> Complex64 {
        let path = TrapPath::sta(2.0 * s.l_z, tf, s.omega_z).unwrap();
        let mut prop = Propagator::new(&grid, &pot, path, dt).unwrap();
        let mut field = start.clone();
        prop.propagate(&mut field).unwrap();
        start.inner(&field)
    };
    let reference = run(tf / 4096.0);
    let err_a = (run(tf / 256.0) - reference).norm();
    let err_b = (run(tf / 512.0) - reference).norm();
    let ratio = err_a / err_b;
    assert!((ratio - 4.0).abs() < 0.5, "dt convergence ratio {ratio:.3}");
    pass(
        5,
        &format!(
            "harmonic E rel {e_rel:.1e}, spread {spread_err:.1e}, drift {drift:.1e}, order ratio {ratio:.2}"
        ),
    );
}

fn config(depth: f64, grid: (usize, usize, usize)) -> RunConfig {
    RunConfig {
        depth_u0: depth,
        distance_d: 85.0,
        waist_x: WIDE_WAIST,
        waist_y: WIDE_WAIST,
        method: Method::Sta,
        tf_tauz: None,
        sweep_tf_tauz: vec![1.0, 2.0],
        grid,
        dt_tauz: 1.0 / 400.0,
        cutoff: 2,
    }
}

#[test]
fn criterion_6_adiabatic_transport() {
    let cfg = config(100.0, (32, 32, 256));
    let ctx = TransportContext::prepare(&cfg).unwrap();
    let rec = ctx.run(Method::Sta, 10.0).unwrap();
    assert!(rec.fidelity >= 0.99, "fidelity {}", rec.fidelity);
    pass(6, &format!("fidelity {:.6} at tf = 10 tau_z", rec.fidelity));
}

/// First t_f (scanning downward in 0.2 tau_z steps) where fidelity < 0.5.
fn collapse_time(ctx: &TransportContext, expected: f64) -> f64 {
    let mut tf = expected + 0.6;
    while tf >= expected - 0.7 {
        let rec = ctx.run(Method::Sta, tf).unwrap();
        if rec.fidelity < 0.5 {
            return tf;
        }
        tf -= 0.2;
    }
    f64::NEG_INFINITY
}

#[test]
fn criterion_7_collapse_times() {
    let regimes = [(30.0, 4.5), (90.0, 3.4), (1500.0, 2.8)];
    let full = std::env::var("OCB_ACCEPTANCE_FULL").is_ok();
    let selected: &[(f64, f64)] = if full { &regimes } else { &regimes[1..2] };
    let mut found = Vec::new();
    for &(depth, expected) in selected {
        let cfg = config(depth, (32, 32, 128));
        let ctx = TransportContext::prepare(&cfg).unwrap();
        let tc = collapse_time(&ctx, expected);
        assert!(
            (tc - expected).abs() <= 0.4,
            "U0 = {depth}: collapse at {tc} tau_z, expected {expected}"
        );
        found.push((depth, tc));
    }
    if full {
        assert!(
            found[0].1 > found[1].1 && found[1].1 > found[2].1,
            "collapse times not decreasing: {found:?}"
        );
    }
    let detail: Vec<String> = found
        .iter()
        .map(|(u, t)| format!("U0={u}: {t:.1} tau_z"))
        .collect();
    pass(7, &detail.join(", "));
}

#[test]
fn criterion_8_method_ordering_deep_lattice() {
    let cfg = RunConfig {
        depth_u0: 2610.0,
        distance_d: 140.0,
        waist_x: 1790.0,
        waist_y: 537.0,
        method: Method::Sta,
        tf_tauz: None,
        sweep_tf_tauz: vec![1.6, 1.9, 2.2, 2.5, 2.8, 3.1, 3.4],
        grid: (32, 32, 256),
        dt_tauz: 1.0 / 400.0,
        cutoff: 2,
    };
    cfg.validate().unwrap();
    let ctx = TransportContext::prepare(&cfg).unwrap();

    // Breakdown time: smallest t_f at which the fidelity recovers above 0.5;
    // for every shorter t_f it stays collapsed. Scanning upward (rather than
    // downward as in the single-method collapse search) is robust to the
    // post-breakdown fidelity oscillations of the triangle and sine profiles,
    // which dip below 0.5 well above their breakdown points.
    let breakdown = |method: Method, expected: f64| -> f64 {
        let mut tf = expected - 0.4;
        while tf <= expected + 0.55 {
            let rec = ctx.run(method, tf).unwrap();
            if rec.fidelity >= 0.5 {
                return tf;
            }
            tf += 0.1;
        }
        f64::INFINITY
    };

    let mut times = std::collections::HashMap::new();
    for (method, expected) in [
        (Method::Triangle, 2.1),
        (Method::Sine, 2.3),
        (Method::Sta, 2.9),
    ] {
        let tb = breakdown(method, expected);
        assert!(
            (tb - expected).abs() <= 0.3,
            "{}: breakdown {} tau_z, expected {expected}",
            method.as_str(),
            tb
        );
        times.insert(method.as_str(), tb);
    }
    assert!(
        times["triangle"] < times["sine"] && times["sine"] < times["sta"],
        "breakdown ordering violated: {times:?}"
    );

    // Corrected path at least matches the uncorrected one above breakdown.
    let samples = [3.2, 3.6, 4.0, 4.4, 4.8];
    let mut wins = 0;
    for &tf in &samples {
        let sta = ctx.run(Method::Sta, tf).unwrap();
        let esta = ctx.run(Method::Esta, tf).unwrap();
        if esta.fidelity >= sta.fidelity {
            wins += 1;
        }
    }
    let frac = wins as f64 / samples.len() as f64;
    assert!(frac >= 0.7, "corrected path wins only {frac:.2} of samples");
    pass(
        8,
        &format!(
            "breakdown: triangle {:.1}, sine {:.1}, sta {:.1} tau_z; corrected wins {:.0}%",
            times["triangle"],
            times["sine"],
            times["sta"],
            frac * 100.0
        ),
    );
}

#[test]
fn criterion_9_property_suite() {
    // The module-level invariants run in the library test suite; spot-check
    // representative members here so this gate fails loudly if they rot.
    // Parity zeros of the mode integrals.
    let (_, problem) = reference_problem(60.0, 3.0);
    let odd = problem
        .g_mode_approx(ModeIndex { nx: 1, ny: 0, nz: 0 })
        .unwrap();
    assert!(odd.norm() < 1e-12, "odd transverse mode must vanish");
    // Determinism of a full pipeline pass.
    let cfg = RunConfig {
        depth_u0: 100.0,
        distance_d: 2.0,
        waist_x: 300.0,
        waist_y: 300.0,
        method: Method::Sta,
        tf_tauz: Some(1.0),
        sweep_tf_tauz: vec![1.0, 2.0],
        grid: (16, 16, 128),
        dt_tauz: 1.0 / 200.0,
        cutoff: 2,
    };
    let a = ocb::harness::run_transport(&cfg).unwrap();
    let b = ocb::harness::run_transport(&cfg).unwrap();
    assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
    pass(9, "parity zeros and pipeline determinism hold");
}
