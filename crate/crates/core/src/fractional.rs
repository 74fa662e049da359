//! Caputo derivatives on a uniform time grid via the L1 scheme.
//!
//! For order `α ∈ (0, 1]` and step `τ` the discrete derivative at level `n` is
//!
//! ```text
//! ζ_τ [ (vⁿ − vⁿ⁻¹) + Σ_{j=2..n} ζ_{j−1} (vⁿ⁻ʲ⁺¹ − vⁿ⁻ʲ) ],
//! ζ_τ = 1 / (τ^α Γ(2 − α)),   ζ_k = (k+1)^{1−α} − k^{1−α}.
//! ```
//!
//! The module also carries the Γ function and the Mittag-Leffler function,
//! which is the exact solution of scalar fractional relaxation and serves as
//! the verification oracle for the scheme.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(z: f64) -> f64 {
    let mut a = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    a
}

/// Γ(x) by the Lanczos approximation (g = 7, 9 terms) with reflection for
/// `x < 1/2`. Small positive integers return the exact factorial.
pub fn gamma(x: f64) -> f64 {
    if x == x.floor() {
        if x <= 0.0 {
            return f64::NAN;
        }
        if x <= 21.0 {
            return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
        }
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "fractional order {alpha} outside (0, 1]"
        )))
    }
}

/// Precomputed L1 weights for one order and step size.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Weights {
    alpha: f64,
    tau: f64,
    /// τ^α Γ(2 − α); exactly τ when α = 1.
    denominator: f64,
    /// `memory[k] = ζ_k = (k+1)^{1−α} − k^{1−α}`, k = 0..=n_max.
    memory: Vec<f64>,
}

impl L1Weights {
    pub fn new(alpha: f64, tau: f64, n_max: usize) -> Result<Self> {
        check_order(alpha)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("time step {tau} must be positive")));
        }
        if n_max == 0 {
            return Err(Error::Domain("weight table needs n_max >= 1".into()));
        }
        let beta = 1.0 - alpha;
        let memory = (0..=n_max)
            .map(|k| {
                if k == 0 {
                    if beta == 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    let k = k as f64;
                    k.powf(beta) * (beta * (1.0 / k).ln_1p()).exp_m1()
                }
            })
            .collect();
        Ok(Self {
            alpha,
            tau,
            denominator: tau.powf(alpha) * gamma(2.0 - alpha),
            memory,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// ζ_τ = 1 / (τ^α Γ(2 − α)).
    pub fn zeta_tau(&self) -> f64 {
        1.0 / self.denominator
    }

    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    /// Largest level `n` the table supports.
    pub fn n_max(&self) -> usize {
        self.memory.len() - 1
    }

    /// ζ_k for `k ≥ 1`.
    pub fn weight(&self, k: usize) -> f64 {
        self.memory[k]
    }

    /// The history part of the scheme at level `n = hist.len()`:
    /// `vⁿ⁻¹ − Σ_{j=2..n} ζ_{j−1} (vⁿ⁻ʲ⁺¹ − vⁿ⁻ʲ)` restricted to `range`.
    ///
    /// The discrete derivative is then `(vⁿ − memory) / denominator`.
    pub fn memory_term(&self, hist: &TimeHistory, range: Range<usize>) -> Result<Vec<f64>> {
        let n = hist.len();
        if n == 0 {
            return Err(Error::Contract(
                "memory term needs at least v⁰ in the history".into(),
            ));
        }
        if n > self.n_max() {
            return Err(Error::Contract(format!(
                "level {n} exceeds weight table size {}",
                self.n_max()
            )));
        }
        if range.end > hist.dim() {
            return Err(Error::Contract(format!(
                "range {range:?} outside history dimension {}",
                hist.dim()
            )));
        }
        let mut out = hist.get(n - 1)[range.clone()].to_vec();
        for j in 2..=n {
            let w = self.memory[j - 1];
            if w == 0.0 {
                continue;
            }
            let newer = &hist.get(n - j + 1)[range.clone()];
            let older = &hist.get(n - j)[range.clone()];
            for ((o, a), b) in out.iter_mut().zip(newer).zip(older) {
                *o -= w * (a - b);
            }
        }
        Ok(out)
    }
}

/// All past solution vectors `v⁰..vⁿ⁻¹`, as needed by the memory sums.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeHistory {
    dim: usize,
    levels: Vec<Vec<f64>>,
}

impl TimeHistory {
    pub fn new(initial: Vec<f64>) -> Self {
        Self {
            dim: initial.len(),
            levels: vec![initial],
        }
    }

    pub fn push(&mut self, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Contract(format!(
                "history vector of length {} (expected {})",
                v.len(),
                self.dim
            )));
        }
        self.levels.push(v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored levels (steps taken + 1).
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn last(&self) -> &[f64] {
        self.levels.last().expect("history holds v⁰")
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }
}

/// Discrete Caputo derivative at level `n = hist.len()` given `vⁿ`.
pub fn caputo_apply(weights: &L1Weights, hist: &TimeHistory, v_n: &[f64]) -> Result<Vec<f64>> {
    if v_n.len() != hist.dim() {
        return Err(Error::Contract(format!(
            "vⁿ has length {} but history dimension is {}",
            v_n.len(),
            hist.dim()
        )));
    }
    let memory = weights.memory_term(hist, 0..hist.dim())?;
    Ok(v_n
        .iter()
        .zip(&memory)
        .map(|(v, m)| (v - m) / weights.denominator)
        .collect())
}

/// Uniform time grid `tⁿ = nτ`, `τ = T/N_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub final_time: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0 && final_time.is_finite()) || steps == 0 {
            return Err(Error::Config(format!(
                "time grid needs T > 0 and N_T >= 1 (got T={final_time}, N_T={steps})"
            )));
        }
        Ok(Self { final_time, steps })
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.tau()
        }
    }
}

/// Mittag-Leffler function `E_α(z) = Σ_k z^k / Γ(αk + 1)` for `0 < α ≤ 1`, `z ≤ 0`.
///
/// Uses the power series while its largest term stays small enough for the
/// alternating sum to keep ~1e-12 absolute accuracy, and otherwise the
/// completely-monotone integral representation
/// `E_α(−t^α) = ∫₀^∞ e^{−rt} K_α(r) dr` evaluated by double-exponential
/// quadrature.
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    check_order(alpha)?;
    if !(z <= 0.0) {
        return Err(Error::Domain(format!(
            "Mittag-Leffler argument {z} must be <= 0"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    let x = -z;
    if largest_series_term_log10(alpha, x) < 3.0 {
        Ok(ml_series(alpha, z))
    } else {
        Ok(ml_integral(alpha, x))
    }
}

const ML_MAX_TERMS: usize = 500;

fn largest_series_term_log10(alpha: f64, x: f64) -> f64 {
    let lx = x.ln();
    (0..ML_MAX_TERMS)
        .map(|k| k as f64 * lx - ln_gamma(alpha * k as f64 + 1.0))
        .fold(f64::NEG_INFINITY, f64::max)
        / std::f64::consts::LN_10
}

fn ml_series(alpha: f64, z: f64) -> f64 {
    let lx = z.abs().ln();
    let mut sum = 1.0;
    for k in 1..ML_MAX_TERMS {
        let arg = alpha * k as f64 + 1.0;
        let magnitude = if arg < 20.0 {
            z.abs().powi(k as i32) / gamma(arg)
        } else {
            (k as f64 * lx - ln_gamma(arg)).exp()
        };
        let term = if k % 2 == 1 { -magnitude } else { magnitude };
        sum += term;
        if magnitude < 1e-16 * sum.abs() && k > 2 {
            break;
        }
    }
    sum
}

fn ml_kernel(alpha: f64, r: f64) -> f64 {
    let (s, c) = (alpha * PI).sin_cos();
    let ra = r.powf(alpha);
    s / PI * r.powf(alpha - 1.0) / (ra * ra + 2.0 * ra * c + 1.0)
}

fn ml_integral(alpha: f64, x: f64) -> f64 {
    let t = x.powf(1.0 / alpha);
    let near = tanh_sinh_unit(|r| ml_kernel(alpha, r) * (-r * t).exp());
    let far = exp_sinh(|v| ml_kernel(alpha, 1.0 + v) * (-v * t).exp()) * (-t).exp();
    near + far
}

const DE_STEP: f64 = 1.0 / 64.0;
const DE_RANGE: f64 = 4.5;

/// ∫₀¹ f by tanh-sinh; `f` is never evaluated at the endpoints.
fn tanh_sinh_unit(f: impl Fn(f64) -> f64) -> f64 {
    let n = (DE_RANGE / DE_STEP) as i64;
    let mut sum = 0.0;
    for i in -n..=n {
        let s = i as f64 * DE_STEP;
        let u = 0.5 * PI * s.sinh();
        let r = 1.0 / (1.0 + (-2.0 * u).exp());
        if r <= 0.0 || r >= 1.0 {
            continue;
        }
        let cu = u.cosh();
        let w = 0.25 * PI * s.cosh() / (cu * cu);
        sum += w * f(r);
    }
    sum * DE_STEP
}

/// ∫₀^∞ f by exp-sinh.
fn exp_sinh(f: impl Fn(f64) -> f64) -> f64 {
    let n = (DE_RANGE / DE_STEP) as i64;
    let mut sum = 0.0;
    for i in -n..=n {
        let s = i as f64 * DE_STEP;
        let v = (0.5 * PI * s.sinh()).exp();
        if !(v > 0.0 && v.is_finite()) {
            continue;
        }
        let val = f(v);
        if val == 0.0 {
            continue;
        }
        sum += v * 0.5 * PI * s.cosh() * val;
    }
    sum * DE_STEP
}

/// L1 solution of `c D^α p + λ p = 0`, `p(0) = 1`, returning `p⁰..p^N`.
pub fn solve_scalar_fractional_decay(
    alpha: f64,
    c: f64,
    lambda: f64,
    tau: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let weights = L1Weights::new(alpha, tau, steps.max(1))?;
    if !(c > 0.0) || lambda < 0.0 {
        return Err(Error::Domain(format!(
            "scalar decay needs c > 0 and λ >= 0 (got c={c}, λ={lambda})"
        )));
    }
    let mut hist = TimeHistory::new(vec![1.0]);
    let lead = c / weights.denominator;
    for _ in 0..steps {
        let memory = weights.memory_term(&hist, 0..1)?[0];
        let p = lead * memory / (lead + lambda);
        hist.push(vec![p])?;
    }
    Ok(hist.levels.into_iter().map(|v| v[0]).collect())
}
