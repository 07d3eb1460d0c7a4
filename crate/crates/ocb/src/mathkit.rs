//! Special functions and quadrature shared by the eSTA overlap integrals:
//! physicists' Hermite polynomials, half-integer Gamma values, Faa di Bruno
//! partition sums, Gaussian moment integrals and adaptive Gauss-Kronrod
//! quadrature in one and two dimensions.

use num_complex::Complex64;

use crate::error::{Error, Result};

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// Values integrable by the adaptive quadrature (f64 and Complex64).
pub trait QuadValue: Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    fn zero() -> Self;
    fn scale(self, s: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for m in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * (m as f64) * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Gamma(j + 1/2) for integer j >= 0, by the product recursion from
/// Gamma(1/2) = sqrt(pi).
pub fn gamma_half(j: usize) -> f64 {
    let mut g = std::f64::consts::PI.sqrt();
    for m in 0..j {
        g *= m as f64 + 0.5;
    }
    g
}

/// Gamma((p)/2) for integer p >= 1; the transverse reductions need both the
/// half-integer and integer ladders.
pub fn gamma_half_integer_arg(p: usize) -> f64 {
    assert!(p >= 1);
    if p % 2 == 1 {
        gamma_half((p - 1) / 2)
    } else {
        // Gamma of a positive integer p/2.
        let mut g = 1.0;
        for m in 1..(p / 2) {
            g *= m as f64;
        }
        g
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|m| m as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// One term of the Faa di Bruno expansion of H_n: indices with k1 + 2 k2 = n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionTerm {
    pub k1: usize,
    pub k2: usize,
    /// n! / (k1! k2!)
    pub multiplicity: f64,
    /// (-1)^(n + k1 + k2)
    pub sign: f64,
}

/// Enumerate the floor(n/2)+1 partition terms with k1 + 2 k2 = n.
pub fn partitions(n: usize) -> Vec<PartitionTerm> {
    (0..=n / 2)
        .map(|k2| {
            let k1 = n - 2 * k2;
            PartitionTerm {
                k1,
                k2,
                multiplicity: factorial(n) / (factorial(k1) * factorial(k2)),
                sign: if (n + k1 + k2).is_multiple_of(2) { 1.0 } else { -1.0 },
            }
        })
        .collect()
}

/// H_n(x) assembled from the Faa di Bruno monomial representation.
pub fn hermite_faa_di_bruno(n: usize, x: f64) -> f64 {
    partitions(n)
        .iter()
        .map(|t| t.sign * t.multiplicity * (2.0 * x).powi(t.k1 as i32))
        .sum()
}

/// Closed form of int x^n exp(-a x^2 + b x + c) dx over the real line.
pub fn gaussian_moment_integral(n: usize, a: f64, b: f64, c: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "gaussian moment integral requires a > 0, got {a}"
        )));
    }
    let prefactor = (b * b / (4.0 * a) + c).exp();
    let sum: f64 = (0..=n / 2)
        .map(|k| {
            binomial(n, 2 * k)
                * (b / (2.0 * a)).powi((n - 2 * k) as i32)
                * gamma_half(k)
                / a.powf(k as f64 + 0.5)
        })
        .sum();
    Ok(prefactor * sum)
}

/// int H_n(u) u^m exp(-u^2 + b u) du for complex b, by expanding u^m H_n(u)
/// in the Hermite basis with u H_j = H_{j+1}/2 + j H_{j-1} and using
/// int H_j(u) exp(-u^2 + b u) du = sqrt(pi) exp(b^2/4) b^j.
pub fn hermite_gaussian_moment(n: usize, m: usize, b: Complex64) -> Complex64 {
    let mut coeffs = vec![0.0f64; n + m + 1];
    coeffs[n] = 1.0;
    for _ in 0..m {
        let prev = coeffs.clone();
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for (j, &c) in prev.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            coeffs[j + 1] += 0.5 * c;
            if j > 0 {
                coeffs[j - 1] += j as f64 * c;
            }
        }
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let pre = (b * b / 4.0).exp() * sqrt_pi;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut bj = Complex64::new(1.0, 0.0);
    for (j, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            // b^0 = 1 also when b = 0.
            acc += bj * c;
        }
        let _ = j;
        bj *= b;
    }
    pre * acc
}

fn gauss_kronrod<V: QuadValue>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64) -> (V, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let mut kronrod = V::zero();
    let mut gauss = V::zero();
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        if x == 0.0 {
            let fc = f(center);
            kronrod = kronrod + fc.scale(wk);
            gauss = gauss + fc.scale(WG[3]);
        } else {
            let f1 = f(center - half * x);
            let f2 = f(center + half * x);
            kronrod = kronrod + (f1 + f2).scale(wk);
            if i % 2 == 1 {
                gauss = gauss + (f1 + f2).scale(WG[i / 2]);
            }
        }
    }
    let value = kronrod.scale(half);
    let err = (kronrod - gauss).magnitude() * half.abs();
    (value, err)
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]` to absolute
/// tolerance `tol`. Returns the value and an error estimate.
pub fn quad1d<V: QuadValue>(
    mut f: impl FnMut(f64) -> V,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(V, f64)> {
    // Interval worklist ordered by local error.
    struct Seg<V> {
        a: f64,
        b: f64,
        value: V,
        err: f64,
    }
    let (v0, e0) = gauss_kronrod(&mut f, a, b);
    let mut segs = vec![Seg {
        a,
        b,
        value: v0,
        err: e0,
    }];
    let max_segments = 4000;
    loop {
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        if total_err <= tol {
            let mut acc = V::zero();
            for s in &segs {
                acc = acc + s.value;
            }
            return Ok((acc, total_err));
        }
        if segs.len() >= max_segments {
            return Err(Error::QuadratureFailure {
                error: total_err,
                tol,
            });
        }
        // Split the worst interval.
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let seg = segs.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid == seg.a || mid == seg.b {
            return Err(Error::QuadratureFailure {
                error: seg.err,
                tol,
            });
        }
        let (vl, el) = gauss_kronrod(&mut f, seg.a, mid);
        let (vr, er) = gauss_kronrod(&mut f, mid, seg.b);
        segs.push(Seg {
            a: seg.a,
            b: mid,
            value: vl,
            err: el,
        });
        segs.push(Seg {
            a: mid,
            b: seg.b,
            value: vr,
            err: er,
        });
    }
}

/// Adaptive 2D quadrature over the rectangle `[ax,bx] x [ay,by]` by nesting
/// `quad1d`, with y-bounds allowed to depend on x.
pub fn quad2d<V: QuadValue>(
    mut f: impl FnMut(f64, f64) -> V,
    ax: f64,
    bx: f64,
    ybounds: impl Fn(f64) -> (f64, f64),
    tol: f64,
) -> Result<(V, f64)> {
    let inner_tol = tol / (bx - ax).abs() * 0.5;
    let mut inner_failed: Option<Error> = None;
    let outer = quad1d(
        |x| {
            let (ay, by) = ybounds(x);
            match quad1d(|y| f(x, y), ay, by, inner_tol) {
                Ok((v, _)) => v,
                Err(e) => {
                    inner_failed.get_or_insert(e);
                    V::zero()
                }
            }
        },
        ax,
        bx,
        tol,
    );
    if let Some(e) = inner_failed {
        return Err(e);
    }
    outer
}

/// Locate the maximum of a smooth scalar function on `[a, b]` by golden
/// section search. Returns (argmax, max).
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (a.abs() + b.abs() + 1.0) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Solve a dense n x n linear system by Gaussian elimination with partial
/// pivoting. `a` is row-major; consumed.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n) && rhs.len() == n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidParams("singular linear system".into()));
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (row, rr) in lower.iter_mut().enumerate() {
            let factor = rr[col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            for (v, p) in rr[col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= factor * p;
            }
            rhs[col + 1 + row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}
