//! Trap trajectories for the transport: the shortcut polynomial, its
//! corrected variant, and the sine / triangle references, together with the
//! classical (harmonic-model) atom response used for diagnostics.

use crate::error::{Error, Result};
use crate::mathkit::solve_linear;

/// Dense polynomial with ascending coefficients, evaluated by Horner.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, &c)| n as f64 * c)
                .collect(),
        )
    }

    pub fn scaled(&self, a: f64) -> Poly {
        Poly(self.0.iter().map(|&c| a * c).collect())
    }

    pub fn add_assign_scaled(&mut self, other: &Poly, a: f64) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (c, &o) in self.0.iter_mut().zip(&other.0) {
            *c += a * o;
        }
    }
}

/// Classical-path coefficients for the shortcut: q_c(s)/d = sum c_n s^n,
/// n = 5..9. The minimal-jerk-style profile with five vanishing boundary
/// derivatives on each end.
pub const STA_CLASSICAL_COEFFS: [f64; 5] = [126.0, -420.0, 540.0, -315.0, 70.0];

/// Trap-path coefficients for the shortcut, b_n for s^n with n = 3..9.
/// g = 1/(omega_z t_f)^2; the g-terms carry the trap displacement needed to
/// drive the classical path, the constants reproduce it as g -> 0.
pub fn sta_trap_coeffs(g: f64) -> [f64; 7] {
    [
        2520.0 * g,
        -12600.0 * g,
        22680.0 * g + 126.0,
        -17640.0 * g - 420.0,
        5040.0 * g + 540.0,
        -315.0,
        70.0,
    ]
}

/// Trap polynomial in s = t/t_f, normalized to unit transport distance.
pub fn sta_trap_poly(g: f64) -> Poly {
    let b = sta_trap_coeffs(g);
    let mut c = vec![0.0; 10];
    c[3..10].copy_from_slice(&b);
    Poly(c)
}

/// Classical polynomial in s, normalized to unit transport distance.
pub fn sta_classical_poly() -> Poly {
    let mut c = vec![0.0; 10];
    c[5..10].copy_from_slice(&STA_CLASSICAL_COEFFS);
    Poly(c)
}

/// Coefficients of the six degree-11 correction basis polynomials
/// f_k(s) = sum_{n=3}^{11} a[n-3][k-1] s^n. Each f_k is 1 at s = k/7, 0 at
/// the other interior sevenths, and has value and first two derivatives
/// vanishing at s = 1.
pub const F_BASIS_TABLE: [[f64; 6]; 9] = [
    [3268.0278, -1764.7350, 1361.6782, -1021.2587, 705.89400, -544.67130],
    [-42974.565, 29382.838, -24260.567, 18791.160, -13235.513, 10339.677],
    [238311.85, -188292.32, 168031.09, -135594.78, 97923.184, -77792.678],
    [-731080.51, 636579.13, -607620.55, 512478.95, -381148.45, 309119.12],
    [1362055.0, -1270967.0, 1282059.8, -1128042.6, 865989.78, -719297.45],
    [-1583096.2, 1555055.1, -1640810.9, 1500138.2, -1188990.2, 1013733.1],
    [1124047.2, -1148396.4, 1257158.1, -1189045.8, 971849.37, -851598.11],
    [-446816.56, 470792.08, -531275.79, 517653.33, -435482.68, 392326.73],
    [76285.754, -82388.614, 95357.192, -95357.192, 82388.614, -76285.754],
];

/// Basis polynomial f_k (k = 0..5) from the embedded table.
pub fn f_basis_poly(k: usize) -> Poly {
    let mut c = vec![0.0; 12];
    for n in 0..9 {
        c[n + 3] = F_BASIS_TABLE[n][k];
    }
    Poly(c)
}

/// Re-derive the basis coefficients by solving the defining 9x9 system per
/// column; used as an oracle against the embedded table.
pub fn solve_f_basis() -> Result<[[f64; 6]; 9]> {
    let mut out = [[0.0; 6]; 9];
    for k in 0..6 {
        let mut a = Vec::with_capacity(9);
        let mut rhs = vec![0.0; 6];
        for j in 1..=6 {
            let s = j as f64 / 7.0;
            a.push((3..=11).map(|n| s.powi(n)).collect::<Vec<_>>());
            if j == k + 1 {
                rhs[j - 1] = 1.0;
            }
        }
        a.push((3..=11).map(|_| 1.0).collect()); // f(1) = 0
        a.push((3..=11).map(|n| n as f64).collect()); // f'(1) = 0
        a.push((3..=11).map(|n| (n * (n - 1)) as f64).collect()); // f''(1) = 0
        rhs.extend_from_slice(&[0.0, 0.0, 0.0]);
        let x = solve_linear(a, rhs)?;
        for (row, &v) in out.iter_mut().zip(&x) {
            row[k] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sta,
    Esta,
    Sine,
    Triangle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sta => "sta",
            Method::Esta => "esta",
            Method::Sine => "sine",
            Method::Triangle => "triangle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sta" => Ok(Method::Sta),
            "esta" => Ok(Method::Esta),
            "sine" => Ok(Method::Sine),
            "triangle" => Ok(Method::Triangle),
            other => Err(Error::InvalidParams(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
enum Kind {
    /// Shortcut paths: trap polynomial in s with absolute-length
    /// coefficients, plus the closed-form classical response
    /// q_c(t) = p(s) + A cos(w t) + B sin(w t).
    Polynomial {
        trap: Poly,
        dtrap: Poly,
        ddtrap: Poly,
        classical: Poly,
        a_cos: f64,
        b_sin: f64,
    },
    Sine,
    Triangle,
}

/// A trap trajectory q0(t) over [0, t_f], with the classical atom response
/// in the comoving harmonic model where available.
#[derive(Debug, Clone)]
pub struct TrapPath {
    pub method: Method,
    pub distance: f64,
    pub final_time: f64,
    pub omega_z: f64,
    kind: Kind,
}

impl TrapPath {
    pub fn sta(distance: f64, final_time: f64, omega_z: f64) -> Result<Self> {
        Self::polynomial_path(Method::Sta, distance, final_time, omega_z, None)
    }

    /// Corrected shortcut: the six `correction` amplitudes (absolute length
    /// units) weight the f_k basis polynomials added to the trap path.
    pub fn esta(
        distance: f64,
        final_time: f64,
        omega_z: f64,
        correction: &[f64],
    ) -> Result<Self> {
        if correction.len() != 6 {
            return Err(Error::BadCorrectionDimension(correction.len()));
        }
        Self::polynomial_path(Method::Esta, distance, final_time, omega_z, Some(correction))
    }

    pub fn sine(distance: f64, final_time: f64, omega_z: f64) -> Result<Self> {
        Self::check_times(distance, final_time)?;
        Ok(TrapPath {
            method: Method::Sine,
            distance,
            final_time,
            omega_z,
            kind: Kind::Sine,
        })
    }

    pub fn triangle(distance: f64, final_time: f64, omega_z: f64) -> Result<Self> {
        Self::check_times(distance, final_time)?;
        Ok(TrapPath {
            method: Method::Triangle,
            distance,
            final_time,
            omega_z,
            kind: Kind::Triangle,
        })
    }

    pub fn with_method(
        method: Method,
        distance: f64,
        final_time: f64,
        omega_z: f64,
        correction: Option<&[f64]>,
    ) -> Result<Self> {
        match method {
            Method::Sta => Self::sta(distance, final_time, omega_z),
            Method::Esta => Self::esta(
                distance,
                final_time,
                omega_z,
                correction.ok_or_else(|| {
                    Error::InvalidParams("corrected path requires correction amplitudes".into())
                })?,
            ),
            Method::Sine => Self::sine(distance, final_time, omega_z),
            Method::Triangle => Self::triangle(distance, final_time, omega_z),
        }
    }

    fn check_times(distance: f64, final_time: f64) -> Result<()> {
        if !(final_time > 0.0 && final_time.is_finite()) || !distance.is_finite() {
            return Err(Error::InvalidParams(
                "transport distance and final time must be finite, t_f > 0".into(),
            ));
        }
        Ok(())
    }

    fn polynomial_path(
        method: Method,
        distance: f64,
        final_time: f64,
        omega_z: f64,
        correction: Option<&[f64]>,
    ) -> Result<Self> {
        Self::check_times(distance, final_time)?;
        if !(omega_z > 0.0 && omega_z.is_finite()) {
            return Err(Error::InvalidParams("omega_z must be positive".into()));
        }
        let g = 1.0 / (final_time * omega_z).powi(2);
        let mut trap = sta_trap_poly(g).scaled(distance);
        if let Some(eps) = correction {
            for (k, &e) in eps.iter().enumerate() {
                trap.add_assign_scaled(&f_basis_poly(k), e);
            }
        }
        let dtrap = trap.derivative();
        let ddtrap = dtrap.derivative();

        // Classical response to a polynomial drive: the particular solution
        // of q_c'' + w^2 q_c = w^2 trap(t/t_f) is the finite operator series
        // sum_j (-g)^j trap^(2j); trig terms enforce q_c(0) = q_c'(0) = 0.
        let mut classical = Poly(vec![0.0]);
        let mut term = trap.clone();
        let mut coef = 1.0;
        loop {
            classical.add_assign_scaled(&term, coef);
            if term.0.len() <= 2 {
                break;
            }
            term = term.derivative().derivative();
            coef = -coef * g;
        }
        let a_cos = -classical.eval(0.0);
        let b_sin = -classical.derivative().eval(0.0) / (final_time * omega_z);

        Ok(TrapPath {
            method,
            distance,
            final_time,
            omega_z,
            kind: Kind::Polynomial {
                trap,
                dtrap,
                ddtrap,
                classical,
                a_cos,
                b_sin,
            },
        })
    }

    fn clamp_s(&self, t: f64) -> f64 {
        (t / self.final_time).clamp(0.0, 1.0)
    }

    pub fn position(&self, t: f64) -> f64 {
        let s = self.clamp_s(t);
        match &self.kind {
            Kind::Polynomial { trap, .. } => trap.eval(s),
            Kind::Sine => {
                let v0 = 2.0 * self.distance / self.final_time;
                0.5 * v0
                    * (s * self.final_time
                        - (2.0 * std::f64::consts::PI * s).sin() * self.final_time
                            / (2.0 * std::f64::consts::PI))
            }
            Kind::Triangle => {
                let v0 = 2.0 * self.distance / self.final_time;
                let tf = self.final_time;
                let tc = s * tf;
                if s <= 0.5 {
                    v0 * tc * tc / tf
                } else {
                    v0 * (2.0 * tc - 0.5 * tf - tc * tc / tf)
                }
            }
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.final_time {
            return 0.0;
        }
        let s = self.clamp_s(t);
        match &self.kind {
            Kind::Polynomial { dtrap, .. } => dtrap.eval(s) / self.final_time,
            Kind::Sine => {
                let v0 = 2.0 * self.distance / self.final_time;
                0.5 * v0 * (1.0 - (2.0 * std::f64::consts::PI * s).cos())
            }
            Kind::Triangle => {
                let v0 = 2.0 * self.distance / self.final_time;
                if s <= 0.5 {
                    2.0 * v0 * s
                } else {
                    2.0 * v0 * (1.0 - s)
                }
            }
        }
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.final_time {
            return 0.0;
        }
        let s = self.clamp_s(t);
        match &self.kind {
            Kind::Polynomial { ddtrap, .. } => {
                ddtrap.eval(s) / (self.final_time * self.final_time)
            }
            Kind::Sine => {
                let v0 = 2.0 * self.distance / self.final_time;
                v0 * std::f64::consts::PI / self.final_time
                    * (2.0 * std::f64::consts::PI * s).sin()
            }
            Kind::Triangle => {
                let v0 = 2.0 * self.distance / self.final_time;
                if s <= 0.5 {
                    2.0 * v0 / self.final_time
                } else {
                    -2.0 * v0 / self.final_time
                }
            }
        }
    }

    /// Classical atom position in the harmonic model. For the sine and
    /// triangle references this returns the trap position itself (no
    /// closed-form response is tracked for them).
    pub fn classical_position(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Polynomial {
                classical,
                a_cos,
                b_sin,
                ..
            } => {
                let tc = t.clamp(0.0, self.final_time);
                let s = tc / self.final_time;
                let phase = self.omega_z * tc;
                classical.eval(s) + a_cos * phase.cos() + b_sin * phase.sin()
            }
            _ => self.position(t),
        }
    }

    /// Classical atom acceleration via q_c'' = w^2 (q0 - q_c); for sine and
    /// triangle the trap acceleration is used as the diagnostic proxy.
    pub fn classical_acceleration(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Polynomial { .. } => {
                self.omega_z * self.omega_z * (self.position(t) - self.classical_position(t))
            }
            _ => self.acceleration(t),
        }
    }

    /// Max |classical acceleration| over the transport: dense scan plus
    /// golden-section refinement around the best sample.
    pub fn max_atom_acceleration(&self) -> f64 {
        let n = 10_000;
        let tf = self.final_time;
        let mut best_i: usize = 0;
        let mut best = 0.0f64;
        for i in 0..=n {
            let t = tf * i as f64 / n as f64;
            let a = self.classical_acceleration(t).abs();
            if a > best {
                best = a;
                best_i = i;
            }
        }
        let lo = tf * best_i.saturating_sub(1) as f64 / n as f64;
        let hi = tf * (best_i + 1).min(n) as f64 / n as f64;
        let (_, v) =
            crate::mathkit::golden_section_max(|t| self.classical_acceleration(t).abs(), lo, hi);
        v.max(best)
    }
}
