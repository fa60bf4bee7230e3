//! Padé approximants of power series: construction by the coefficient linear
//! system and by continued-fraction convergents, rational evaluation, and the
//! Taylor-vs-Padé error tables for `f(x) = 1/(1 - x)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::lstsq::min_norm_solve;
use crate::matrix::Matrix;
use crate::spectral::Precision;

/// Maclaurin coefficients `a_0 ... a_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::invalid("power series needs at least two coefficients"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("power series coefficients must be finite"));
        }
        Ok(Self { coeffs })
    }

    /// `1 + x + x^2 + ...`, the series of `1/(1 - x)`.
    pub fn geometric(len: usize) -> Result<Self> {
        Self::new(vec![1.0; len])
    }

    /// Series of `exp(x)`.
    pub fn exp(len: usize) -> Result<Self> {
        let mut c = Vec::with_capacity(len);
        let mut term = 1.0;
        for k in 0..len {
            if k > 0 {
                term /= k as f64;
            }
            c.push(term);
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn get(&self, i: isize) -> f64 {
        if i < 0 {
            0.0
        } else {
            self.coeffs.get(i as usize).copied().unwrap_or(0.0)
        }
    }
}

/// `[M/N] = P_M(x) / Q_N(x)` with `Q_N(0) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PadeApproximant {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl PadeApproximant {
    /// Numerator `p_0 ... p_M`, denominator tail `q_1 ... q_N`.
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("numerator needs at least one coefficient"));
        }
        Ok(Self { p, q })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.p
    }

    /// `q_1 ... q_N`; `q_0 = 1` is implicit.
    pub fn denominator_tail(&self) -> &[f64] {
        &self.q
    }

    /// `(M, N)`
    pub fn degrees(&self) -> (usize, usize) {
        (self.p.len() - 1, self.q.len())
    }

    /// Largest relative mismatch between the first `M + N + 1` coefficients
    /// of `Q * A` and of `P`. Zero means `P/Q` reproduces the series through
    /// order `M + N`.
    pub fn series_mismatch(&self, s: &PowerSeries) -> f64 {
        let (m, n) = self.degrees();
        let mut worst = 0.0f64;
        for k in 0..=(m + n) {
            let mut conv = s.get(k as isize);
            for j in 1..=n.min(k) {
                conv += self.q[j - 1] * s.get((k - j) as isize);
            }
            let target = self.p.get(k).copied().unwrap_or(0.0);
            let scale = target.abs().max(s.get(k as isize).abs()).max(1.0);
            worst = worst.max((conv - target).abs() / scale);
        }
        worst
    }

    /// `Σ p_m / (1 + Σ q_n)`, the value at `x = 1`.
    pub fn value_at_one(&self) -> f64 {
        self.p.iter().sum::<f64>() / (1.0 + self.q.iter().sum::<f64>())
    }
}

/// Solves the Padé coefficient equations for `[m/n]`.
///
/// The denominator comes from the `n x n` Toeplitz block in
/// `a_{m-n+1} ... a_{m+n}`; the numerator is then the truncated product
/// `Q * A`. The block is solved in the minimum-norm least-squares sense, so
/// singular systems (the geometric series gives an all-ones block) still
/// produce a deterministic answer.
pub fn pade_from_series(s: &PowerSeries, m: usize, n: usize) -> Result<PadeApproximant> {
    let need = m + n + 1;
    if s.coeffs.len() < need {
        return Err(Error::invalid(format!(
            "[{m}/{n}] needs {need} series coefficients, got {}",
            s.coeffs.len()
        )));
    }
    let q = if n == 0 {
        Vec::new()
    } else {
        let c = Matrix::from_fn(n, n, |r, col| s.get(m as isize + r as isize - col as isize));
        let rhs: Vec<f64> = (0..n).map(|r| -s.get((m + 1 + r) as isize)).collect();
        min_norm_solve(&c, &rhs)
    };
    let p = (0..=m)
        .map(|k| {
            let mut acc = s.get(k as isize);
            for j in 1..=n.min(k) {
                acc += q[j - 1] * s.get((k - j) as isize);
            }
            acc
        })
        .collect();
    Ok(PadeApproximant { p, q })
}

/// `(M, N)` of the diagonal approximant standing in for a degree-`k` Taylor
/// expansion: `M + N + 1 = k`, `N = floor((k - 1) / 2)`.
pub fn diagonal_degrees(k: usize) -> (usize, usize) {
    let n = (k.max(1) - 1) / 2;
    (k.max(1) - 1 - n, n)
}

/// The diagonal approximant of `1/(1 - x)` used by the Padé backward scheme.
pub fn geometric_pade(k: usize) -> Result<PadeApproximant> {
    if k == 0 {
        return Err(Error::invalid("Padé degree must be at least 1"));
    }
    let (m, n) = diagonal_degrees(k);
    pade_from_series(&PowerSeries::geometric((m + n + 1).max(2))?, m, n)
}

fn poly_add_scaled_shift(a: &[f64], b: &[f64], c: f64) -> Vec<f64> {
    // a(x) + c * x * b(x)
    let len = a.len().max(b.len() + 1);
    let mut out = vec![0.0; len];
    out[..a.len()].copy_from_slice(a);
    for (i, &bi) in b.iter().enumerate() {
        out[i + 1] += c * bi;
    }
    out
}

/// Builds the diagonal `[n+1/n]` approximant as a convergent of the
/// corresponding continued fraction
/// `c_0 + c_1 x / (1 + c_2 x / (1 + c_3 x / ...))`.
///
/// With `b_k = 1` and `a_k = c_k x` the convergents follow
/// `A_k = b_k A_{k-1} + a_k A_{k-2}` (likewise `B_k`); `[n+1/n]` is convergent
/// `2n + 1`. A fraction that terminates early (a rational series) keeps its
/// last convergent.
pub fn pade_from_continued_fraction(s: &PowerSeries, n: usize) -> Result<PadeApproximant> {
    let steps = 2 * n + 1;
    if s.coeffs.len() < steps + 1 {
        return Err(Error::invalid(format!(
            "[{}/{n}] needs {} series coefficients, got {}",
            n + 1,
            steps + 1,
            s.coeffs.len()
        )));
    }
    let cf = continued_fraction_coeffs(&s.coeffs[..=steps])?;

    let mut a_prev = vec![1.0];
    let mut b_prev = vec![0.0];
    let mut a_cur = vec![cf[0]];
    let mut b_cur = vec![1.0];
    for &c in &cf[1..] {
        let a_next = poly_add_scaled_shift(&a_cur, &a_prev, c);
        let b_next = poly_add_scaled_shift(&b_cur, &b_prev, c);
        a_prev = core::mem::replace(&mut a_cur, a_next);
        b_prev = core::mem::replace(&mut b_cur, b_next);
    }
    a_cur.resize(n + 2, 0.0);
    b_cur.resize(n + 1, 0.0);
    Ok(PadeApproximant { p: a_cur, q: b_cur[1..].to_vec() })
}

/// Viskovatov's scheme: repeatedly peel off the constant term and invert the
/// remainder. Each step consumes one series coefficient.
fn continued_fraction_coeffs(series: &[f64]) -> Result<Vec<f64>> {
    let steps = series.len() - 1;
    let mut out = Vec::with_capacity(series.len());
    out.push(series[0]);
    let mut t: Vec<f64> = series.to_vec();
    for step in 1..=steps {
        // u = (t - t_0) / x
        let u: Vec<f64> = t[1..].to_vec();
        let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        if u.iter().all(|v| v.abs() <= tol) {
            out.resize(steps + 1, 0.0);
            return Ok(out);
        }
        if u[0].abs() <= tol {
            return Err(Error::numerical(format!(
                "continued fraction breaks down at step {step}: zero partial numerator"
            )));
        }
        let c = u[0];
        out.push(c);
        // t = c / u as a series, normalized so t_0 = 1.
        let mut inv = vec![0.0; u.len()];
        inv[0] = 1.0 / u[0];
        for k in 1..u.len() {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += u[j] * inv[k - j];
            }
            inv[k] = -acc / u[0];
        }
        t = inv.iter().map(|v| c * v).collect();
    }
    Ok(out)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `P(x) / Q(x)`, each by Horner's rule.
pub fn eval_rational(pa: &PadeApproximant, x: f64) -> Result<f64> {
    let num = horner(&pa.p, x);
    let den = horner(&pa.q, x) * x + 1.0;
    if !(den.abs() >= 1e-300) {
        return Err(Error::Pole { x });
    }
    Ok(num / den)
}

fn eval_rational_f32(pa: &PadeApproximant, x: f32) -> Result<f32> {
    let h = |c: &[f64]| c.iter().rev().fold(0.0f32, |acc, &v| acc * x + v as f32);
    let num = h(&pa.p);
    let den = h(&pa.q) * x + 1.0;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Pole { x: x as f64 });
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ApproxKind {
    Taylor,
    Pade,
}

impl ApproxKind {
    pub fn name(self) -> &'static str {
        match self {
            ApproxKind::Taylor => "taylor",
            ApproxKind::Pade => "pade",
        }
    }
}

impl core::str::FromStr for ApproxKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "taylor" => Ok(ApproxKind::Taylor),
            "pade" => Ok(ApproxKind::Pade),
            other => Err(Error::invalid(format!("unknown approximation kind `{other}`"))),
        }
    }
}

/// Absolute errors `|f(x) - approx(x)|`; `values[r][c]` is ratio `r`,
/// degree `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub kind: ApproxKind,
    pub precision: Precision,
    pub degrees: Vec<usize>,
    pub ratios: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ErrorTable {
    pub fn get(&self, ratio: f64, degree: usize) -> Option<f64> {
        let r = self.ratios.iter().position(|&x| x == ratio)?;
        let c = self.degrees.iter().position(|&k| k == degree)?;
        Some(self.values[r][c])
    }
}

fn taylor_sum(x: f64, k: usize, prec: Precision) -> f64 {
    match prec {
        Precision::Double => (0..=k).fold(0.0, |acc, _| acc * x + 1.0),
        Precision::Single => {
            let x = x as f32;
            (0..=k).fold(0.0f32, |acc, _| acc * x + 1.0) as f64
        }
    }
}

/// Error grid of degree-`K` Taylor polynomials or the matching diagonal Padé
/// approximants against `1/(1 - x)`, evaluated in the given precision.
pub fn approximation_error_table(
    kind: ApproxKind,
    degrees: &[usize],
    ratios: &[f64],
    prec: Precision,
) -> Result<ErrorTable> {
    for &r in ratios {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::invalid(format!("ratio {r} outside [0, 1)")));
        }
    }
    if degrees.iter().any(|&k| k == 0) {
        return Err(Error::invalid("degrees must be positive"));
    }
    let approximants = match kind {
        ApproxKind::Pade => degrees.iter().map(|&k| geometric_pade(k).map(Some)).collect::<Result<Vec<_>>>()?,
        ApproxKind::Taylor => vec![None; degrees.len()],
    };
    let mut values = Vec::with_capacity(ratios.len());
    for &r in ratios {
        // In single precision the ratio itself is rounded first; the reference
        // is taken at the rounded point so only the approximation error shows.
        let x = match prec {
            Precision::Double => r,
            Precision::Single => r as f32 as f64,
        };
        let exact = 1.0 / (1.0 - x);
        let mut row = Vec::with_capacity(degrees.len());
        for (&k, pa) in degrees.iter().zip(&approximants) {
            let approx = match (kind, pa) {
                (ApproxKind::Taylor, _) => taylor_sum(x, k, prec),
                (ApproxKind::Pade, Some(pa)) => match prec {
                    Precision::Double => eval_rational(pa, x)?,
                    Precision::Single => eval_rational_f32(pa, x as f32)? as f64,
                },
                (ApproxKind::Pade, None) => unreachable!(),
            };
            row.push((exact - approx).abs());
        }
        values.push(row);
    }
    Ok(ErrorTable { kind, precision: prec, degrees: degrees.to_vec(), ratios: ratios.to_vec(), values })
}
