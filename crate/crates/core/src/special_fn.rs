//! Gamma ratios, the Mittag-Leffler function and the generalized Wright
//! series that every distribution formula is assembled from.
//!
//! All infinite sums go through one kernel, [`BinomialSeries`], which sums
//!
//! ```text
//!   Σ_{r ≥ start}  ω(r) · w^r / Γ(νr + 1) · C(αr + offset, k)
//! ```
//!
//! with `ω(r) ∈ {1, r}` and `C` the generalized binomial coefficient, in the
//! working precision chosen by [`SeriesConfig`]. The kernel returns the
//! value together with a certificate bounding truncation and rounding error.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use num_traits::One;

use crate::scalar::{DoubleDouble, Real};

/// Stirling coefficients `B_{2n} / (2n (2n - 1))` as double-double pairs.
const STIRLING: [(f64, f64); 16] = [
    (0.08333333333333333, 4.625929269271485e-18),
    (-0.002777777777777778, 1.0601087908747154e-19),
    (0.0007936507936507937, 6.883823317368282e-22),
    (-0.0005952380952380953, 5.36938218754726e-20),
    (0.0008417508417508417, 3.6870174889237694e-20),
    (-0.0019175269175269176, 1.0675702776872475e-19),
    (0.00641025641025641, 2.2240044563805217e-19),
    (-0.029550653594771242, 4.861760957508855e-19),
    (0.17964437236883057, -6.401600482710946e-19),
    (-1.3924322169059011, 1.5837056989230303e-17),
    (13.402864044168393, -6.154114101993966e-16),
    (-156.84828462600203, 9.391823141715389e-15),
    (2193.1033333333335, -1.3339255626002948e-13),
    (-36108.77125372499, 5.897583353514365e-13),
    (691472.268851313, 2.5585296305158e-11),
    (-15238221.539407415, -8.76774522490625e-10),
];

/// Precision of the partial sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingPrecision {
    Double,
    #[default]
    DoubleDouble,
}

/// Truncation and precision policy for the alternating series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: u64,
    pub working_precision: WorkingPrecision,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_terms: 10_000, working_precision: WorkingPrecision::DoubleDouble }
    }
}

impl SeriesConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_terms(mut self, max_terms: u64) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn with_precision(mut self, precision: WorkingPrecision) -> Self {
        self.working_precision = precision;
        self
    }

    /// Largest certified absolute error, relative to `max(|value|, 1)`, that
    /// a public evaluator will return instead of failing.
    pub fn cancellation_limit(&self) -> f64 {
        self.rel_tol.sqrt()
    }

    /// Fails when rounding from cancellation swamped the result.
    pub(crate) fn certify(&self, r: EvalResult) -> Result<EvalResult> {
        if r.abs_error_bound <= self.cancellation_limit() * r.value.abs().max(1.0) {
            Ok(r)
        } else {
            Err(Error::NonConvergence { terms_used: r.terms_used, partial: r.value, error_bound: r.abs_error_bound })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_terms < 1 {
            return Err(invalid("max_terms must be at least 1"));
        }
        Ok(())
    }

    /// Precision actually used for a series with argument `|w|`, orders
    /// `alpha`, `nu` and binomial index `k`.
    ///
    /// Double precision is honoured only while the crude cancellation bound
    /// `e^{|w|^{1/ν}} (α r_max)^k / rel_tol` stays within 2^52; the largest
    /// term of `Σ w^r/Γ(νr+1)` grows like `e^{|w|^{1/ν}}`.
    pub fn effective_precision(&self, w_abs: f64, alpha: f64, nu: f64, k: u64) -> WorkingPrecision {
        match self.working_precision {
            WorkingPrecision::DoubleDouble => WorkingPrecision::DoubleDouble,
            WorkingPrecision::Double => {
                let r_max = k as f64 / alpha + w_abs.powf(1.0 / nu) + 1.0;
                let log2_headroom = (w_abs.powf(1.0 / nu) + k as f64 * (alpha * r_max).max(1.0).ln()
                    - self.rel_tol.ln())
                    / std::f64::consts::LN_2;
                if log2_headroom <= 52.0 {
                    WorkingPrecision::Double
                } else {
                    WorkingPrecision::DoubleDouble
                }
            }
        }
    }
}

/// A series value with a bound on its absolute error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalResult<T = f64> {
    pub value: T,
    pub abs_error_bound: f64,
    pub terms_used: u64,
}

impl<T: Real> EvalResult<T> {
    /// Rounds to `f64`, widening the bound by the rounding error.
    pub fn to_f64(self) -> EvalResult<f64> {
        let value = self.value.approx();
        EvalResult {
            value,
            abs_error_bound: self.abs_error_bound + value.abs() * f64::EPSILON * 0.5,
            terms_used: self.terms_used,
        }
    }
}

impl EvalResult<f64> {
    pub(crate) fn exact(value: f64) -> Self {
        Self { value, abs_error_bound: 0.0, terms_used: 1 }
    }
}

/// `∏_{j<k} (z - j)`, which equals `Γ(z+1)/Γ(z+1-k)` for every real `z`.
pub fn gamma_ratio_ff(z: f64, k: u64) -> f64 {
    falling_factorial::<f64>(z, k)
}

pub fn falling_factorial<T: Real>(z: T, k: u64) -> T {
    let mut acc = T::one();
    let mut shift = T::zero();
    for _ in 0..k {
        acc = acc * (z - shift);
        shift = shift + T::one();
    }
    acc
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let shift = T::of(T::STIRLING_SHIFT);
    let mut y = x;
    let mut prod = T::one();
    while y < shift {
        prod = prod * y;
        y = y + T::one();
    }
    let inv = T::one() / y;
    let inv2 = inv * inv;
    let mut corr = T::zero();
    for &(hi, lo) in STIRLING[..T::STIRLING_TERMS].iter().rev() {
        corr = corr * inv2 + T::from_pair(hi, lo);
    }
    corr = corr * inv;
    let half = T::of(0.5);
    let lg = (y - half) * y.ln() - y + T::half_ln_two_pi() + corr;
    if prod == T::one() {
        lg
    } else {
        lg - prod.ln()
    }
}

/// Absolute error bound for [`ln_gamma`] at `x`.
pub(crate) fn ln_gamma_error<T: Real>(x: f64) -> f64 {
    let y = x.max(T::STIRLING_SHIFT);
    16.0 * T::UNIT_ROUNDOFF * (y * y.ln().abs() + y + 2.0 * T::STIRLING_SHIFT)
}

/// Series argument `w`, carried as sign, magnitude and log-magnitude.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Argument<T> {
    pub negative: bool,
    pub magnitude: T,
    pub ln_magnitude: T,
    /// Absolute error bound on `ln_magnitude`.
    pub ln_error: f64,
}

impl<T: Real> Argument<T> {
    pub fn from_f64(w: f64) -> Self {
        let m = T::of(w.abs());
        Self { negative: w < 0.0, magnitude: m, ln_magnitude: m.ln(), ln_error: 4.0 * T::UNIT_ROUNDOFF }
    }

    /// `-(Π base_i^{exp_i})`, built in log space from `(base, exponent)` pairs
    /// given as exact working-precision bases.
    pub fn negative_power_product(factors: &[(T, f64)]) -> Self {
        let mut ln = T::zero();
        let mut err = 0.0;
        let mut zero = false;
        for &(base, exponent) in factors {
            if exponent == 0.0 {
                continue;
            }
            if base == T::zero() {
                zero = true;
                break;
            }
            let l = base.ln() * T::of(exponent);
            err += 6.0 * T::UNIT_ROUNDOFF * (l.abs().approx() + 1.0);
            ln = ln + l;
        }
        if zero {
            return Self { negative: true, magnitude: T::zero(), ln_magnitude: T::zero(), ln_error: 0.0 };
        }
        Self { negative: true, magnitude: ln.exp(), ln_magnitude: ln, ln_error: err }
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude == T::zero()
    }
}

/// Term weighting `ω(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Weight {
    One,
    Index,
}

/// `Σ_{r ≥ start} ω(r) w^r / Γ(νr+1) · C(αr + offset, k)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BinomialSeries {
    pub alpha: f64,
    pub nu: f64,
    pub offset: f64,
    pub k: u64,
    pub start: u64,
    pub weight: Weight,
}

struct Term<T> {
    value: T,
    magnitude: f64,
    rel_error: f64,
}

impl BinomialSeries {
    pub fn new(alpha: f64, nu: f64, k: u64) -> Self {
        Self { alpha, nu, offset: 0.0, k, start: 0, weight: Weight::One }
    }

    pub fn offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn start(mut self, start: u64) -> Self {
        self.start = start;
        self
    }

    pub fn weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    /// `C(αr + offset, k)` with a relative error bound.
    fn binomial<T: Real>(&self, r: u64) -> (T, f64) {
        let u = T::UNIT_ROUNDOFF;
        let z = DoubleDouble::from_product(self.alpha, r as f64) + DoubleDouble::of(self.offset);
        let mut acc = T::one();
        let mut err = 0.0;
        for j in 0..self.k {
            let f = z - DoubleDouble::of(j as f64);
            if f.hi() == 0.0 {
                return (T::zero(), 0.0);
            }
            acc = acc * T::from_pair(f.hi(), f.lo()) / T::of((j + 1) as f64);
            err += 4.0 * u;
        }
        (acc, err)
    }

    fn term<T: Real>(&self, w: &Argument<T>, r: u64) -> Term<T> {
        let u = T::UNIT_ROUNDOFF;
        let weight = match self.weight {
            Weight::One => 1.0,
            Weight::Index => r as f64,
        };
        if r == 0 {
            let (b, e) = self.binomial::<T>(0);
            let value = b * T::of(weight);
            return Term { value, magnitude: value.abs().approx(), rel_error: e };
        }
        if weight == 0.0 {
            return Term { value: T::zero(), magnitude: 0.0, rel_error: 0.0 };
        }
        let (b, b_err) = self.binomial::<T>(r);
        if b == T::zero() {
            return Term { value: T::zero(), magnitude: 0.0, rel_error: 0.0 };
        }
        let x = DoubleDouble::from_product(self.nu, r as f64) + DoubleDouble::one();
        let lg = ln_gamma(T::from_pair(x.hi(), x.lo()));
        let rr = T::of(r as f64);
        let log_mag = rr * w.ln_magnitude - lg;
        let log_err = r as f64 * w.ln_error
            + ln_gamma_error::<T>(x.approx())
            + 4.0 * u * (log_mag.abs().approx() + (rr * w.ln_magnitude).abs().approx());
        let mut value = log_mag.exp() * b * T::of(weight);
        if w.negative && r % 2 == 1 {
            value = -value;
        }
        Term {
            value,
            magnitude: value.abs().approx(),
            // exp turns the absolute log error into a relative one.
            rel_error: log_err * (1.0 + 2.0 * log_err) + b_err + 8.0 * u,
        }
    }

    /// From `r` on, successive term ratios are nonincreasing: every factor of
    /// the binomial is positive, so each factor ratio `1 + α/(αr+offset-j)`
    /// decreases, and `Γ(νr+1)/Γ(νr+ν+1)` decreases by log-convexity.
    fn ratio_monotone_from(&self, r: u64) -> bool {
        let lowest = self.alpha * r as f64 + self.offset - (self.k as f64 - 1.0);
        lowest > 0.0 && (self.weight == Weight::One || r >= 1)
    }

    /// Bound on `Σ_{s > r} |term s|` from an envelope that ignores the sign
    /// pattern of the binomial.
    ///
    /// For `x ≥ -1`, `|C(x, k)| ≤ e^{max(x, 0)}`: below `k - 1` the
    /// reflection formula gives `|C(x, k)| ≤ B(x+1, k-x)/π ≤ 1`, above it
    /// every factor is positive and `C(x, k) ≤ x^k/k! ≤ e^x`. With
    /// `offset ≤ 0` the envelope `ω(s) (|w| e^α)^s / Γ(νs+1)` has
    /// nonincreasing ratios, so one geometric bound covers the tail. It
    /// matters for large `k`, where terms are tiny long before the exact
    /// ratios become monotone at `s ≈ k/α`.
    fn envelope_tail(&self, ln_w: f64, r: u64) -> Option<f64> {
        let ln_env = |s: u64| {
            let sf = s as f64;
            let ln_weight = match self.weight {
                Weight::One => 0.0,
                Weight::Index => sf.ln(),
            };
            ln_weight + sf * (ln_w + self.alpha) - ln_gamma::<f64>(self.nu * sf + 1.0)
        };
        let (e1, e2) = (ln_env(r + 1), ln_env(r + 2));
        let rho = (e2 - e1 + 1e-9).exp();
        // Slack covers the f64 log-gamma used for the envelope.
        (rho < 1.0).then(|| 1.001 * e1.exp() / (1.0 - rho))
    }

    pub fn sum<T: Real>(&self, w: &Argument<T>, cfg: &SeriesConfig) -> Result<EvalResult<T>> {
        debug_assert!((-1.0..=0.0).contains(&self.offset));
        let u = T::UNIT_ROUNDOFF;
        if w.is_zero() {
            if self.start > 0 {
                return Ok(EvalResult { value: T::zero(), abs_error_bound: 0.0, terms_used: 0 });
            }
            let t = self.term(w, 0);
            return Ok(EvalResult { abs_error_bound: t.magnitude * t.rel_error, value: t.value, terms_used: 1 });
        }

        let ln_w = w.ln_magnitude.approx() + w.ln_error + 1e-12 * w.ln_magnitude.approx().abs();
        let mut sum = T::zero();
        let mut sum_abs = 0.0;
        let mut rounding = 0.0;
        let mut n: u64 = 0;
        let mut r = self.start;
        let mut term = self.term(w, r);
        loop {
            if !term.value.is_finite() {
                return Err(Error::NonConvergence { terms_used: n, partial: sum.approx(), error_bound: f64::INFINITY });
            }
            sum = sum + term.value;
            sum_abs += term.magnitude;
            rounding += term.magnitude * term.rel_error;
            n += 1;

            let next = self.term(w, r + 1);
            let mut tail = self.envelope_tail(ln_w, r);
            if self.ratio_monotone_from(r) {
                let exact = if term.magnitude == 0.0 {
                    (next.magnitude == 0.0).then_some(0.0)
                } else {
                    let rho = next.magnitude / term.magnitude * (1.0 + 1e-9);
                    (rho < 1.0).then(|| next.magnitude / (1.0 - rho))
                };
                tail = match (tail, exact) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            if let Some(tail) = tail {
                let scale = sum.abs().approx();
                if tail <= cfg.rel_tol * scale || tail < f64::MIN_POSITIVE {
                    let summation = 2.0 * (n as f64 + 1.0) * u * sum_abs;
                    return Ok(EvalResult {
                        value: sum,
                        abs_error_bound: tail + 2.0 * rounding + summation,
                        terms_used: n,
                    });
                }
            }
            if n >= cfg.max_terms {
                return Err(Error::NonConvergence {
                    terms_used: n,
                    partial: sum.approx(),
                    error_bound: next.magnitude,
                });
            }
            r += 1;
            term = next;
        }
    }
}

/// Sums `series` at `w` in the precision selected by `cfg`.
pub(crate) fn sum_dispatch(series: &BinomialSeries, w: f64, cfg: &SeriesConfig) -> Result<EvalResult> {
    match cfg.effective_precision(w.abs(), series.alpha, series.nu, series.k) {
        WorkingPrecision::Double => series.sum::<f64>(&Argument::from_f64(w), cfg).map(EvalResult::to_f64),
        WorkingPrecision::DoubleDouble => {
            series.sum::<DoubleDouble>(&Argument::from_f64(w), cfg).map(EvalResult::to_f64)
        }
    }
}

/// Sums `series` at `w = -Π base_i^{exp_i}`, forming `w` in the working
/// precision so that rounding of the inputs' powers is covered by the
/// certificate.
pub(crate) fn sum_at_power_product(
    series: &BinomialSeries,
    factors: &[(DoubleDouble, f64)],
    cfg: &SeriesConfig,
) -> Result<EvalResult> {
    fn argument<T: Real>(factors: &[(DoubleDouble, f64)]) -> Argument<T> {
        let f: Vec<(T, f64)> = factors.iter().map(|&(b, e)| (T::from_pair(b.hi(), b.lo()), e)).collect();
        Argument::negative_power_product(&f)
    }
    let w_abs = factors.iter().map(|&(b, e)| b.approx().powf(e)).product::<f64>();
    match cfg.effective_precision(w_abs, series.alpha, series.nu, series.k) {
        WorkingPrecision::Double => series.sum::<f64>(&argument(factors), cfg).map(EvalResult::to_f64),
        WorkingPrecision::DoubleDouble => series.sum::<DoubleDouble>(&argument(factors), cfg).map(EvalResult::to_f64),
    }
}

pub(crate) fn check_order(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1], got {value}")))
    }
}

/// `E_ν(x) = Σ x^r / Γ(νr + 1)` on the nonpositive real axis.
pub fn mittag_leffler(nu: f64, x: f64, cfg: &SeriesConfig) -> Result<EvalResult> {
    check_order("nu", nu)?;
    if !(x <= 0.0) {
        return Err(invalid(format!("mittag_leffler needs x <= 0, got {x}")));
    }
    cfg.validate()?;
    if x == 0.0 {
        return Ok(EvalResult::exact(1.0));
    }
    if nu == 1.0 {
        let v = x.exp();
        return Ok(EvalResult { value: v, abs_error_bound: v * f64::EPSILON, terms_used: 1 });
    }
    cfg.certify(sum_dispatch(&BinomialSeries::new(1.0, nu, 0), x, cfg)?)
}

/// [`mittag_leffler`] evaluated entirely in the working type `T`.
pub fn mittag_leffler_in<T: Real>(nu: f64, x: f64, cfg: &SeriesConfig) -> Result<EvalResult<T>> {
    check_order("nu", nu)?;
    if !(x <= 0.0) {
        return Err(invalid(format!("mittag_leffler needs x <= 0, got {x}")));
    }
    cfg.validate()?;
    BinomialSeries::new(1.0, nu, 0).sum::<T>(&Argument::from_f64(x), cfg)
}

/// `Σ_r w^r / Γ(νr+1) · Γ(αr+1)/Γ(αr+1-k)`.
///
/// This is `k!` times the binomial form used internally; for large `k` the
/// factorial overflows and callers should use the distribution functions,
/// which keep the `1/k!` inside the sum.
pub fn wright_psi11_kernel(alpha: f64, k: u64, w: f64, time_nu: f64, cfg: &SeriesConfig) -> Result<EvalResult> {
    check_order("alpha", alpha)?;
    check_order("nu", time_nu)?;
    if !(w <= 0.0) {
        return Err(invalid(format!("w must be <= 0, got {w}")));
    }
    cfg.validate()?;
    let scaled = cfg.certify(sum_dispatch(&BinomialSeries::new(alpha, time_nu, k), w, cfg)?)?;
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    Ok(EvalResult {
        value: scaled.value * fact,
        abs_error_bound: scaled.abs_error_bound * fact + scaled.value.abs() * fact * (k as f64 + 1.0) * f64::EPSILON,
        terms_used: scaled.terms_used,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> SeriesConfig {
        SeriesConfig::default()
    }

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(gamma_ratio_ff(3.0, 2), 6.0);
        assert_eq!(gamma_ratio_ff(0.5, 0), 1.0);
        assert_eq!(gamma_ratio_ff(0.5, 3), 0.375);
        assert_eq!(gamma_ratio_ff(2.0, 5), 0.0);
    }

    proptest! {
        #[test]
        fn falling_factorial_recurrence(z in -20.0f64..20.0, k in 0u64..50) {
            let a = gamma_ratio_ff(z, k + 1);
            let b = gamma_ratio_ff(z, k) * (z - k as f64);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + 1e-300);
        }
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30u32 {
            fact *= n as f64;
            let lg = ln_gamma::<f64>((n + 1) as f64);
            assert!((lg - fact.ln()).abs() < 1e-13 * fact.ln().max(1.0), "n={n}");
        }
        // Γ(1/2) = √π
        let half = ln_gamma::<DoubleDouble>(DoubleDouble::of(0.5));
        let expect = DoubleDouble::pi().ln() * DoubleDouble::of(0.5);
        assert!((half - expect).abs().approx() < 1e-28);
        assert!((ln_gamma::<f32>(5.0) - 24f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn ln_gamma_double_double_large_argument() {
        // ln Γ(1001) = ln 1000!, reference from 60-digit arithmetic
        let lg = ln_gamma::<DoubleDouble>(DoubleDouble::of(1001.0));
        let reference = DoubleDouble::from_sum(5912.128178488163, 3.187538614608565e-13);
        assert!((lg - reference).abs().approx() < 1e-27, "{:?}", lg);
    }

    #[test]
    fn mittag_leffler_examples() {
        let e1 = mittag_leffler(1.0, -1.0, &cfg()).unwrap();
        assert!((e1.value - 0.36787944117144233).abs() < 1e-15);
        assert_eq!(mittag_leffler(0.7, 0.0, &cfg()).unwrap().value, 1.0);
        // e * erfc(1) to 60 digits
        let half = mittag_leffler(0.5, -1.0, &cfg()).unwrap();
        assert!((half.value - 0.42758357615580700441).abs() < 1e-12);
        assert!((half.value - 0.42758357615580700441).abs() <= half.abs_error_bound + 1e-16);
    }

    #[test]
    fn mittag_leffler_reference_table() {
        // Direct 60-digit summation.
        let table = [
            (0.7, -1.0, 0.399611978115599390269006981797),
            (0.3, -2.0, 0.29023222616787535504007608332),
            (0.9, -10.0, 0.0128206060511020999382751296506),
            (0.5, -5.0, 0.110704637733068626370212086492),
            (0.8, -20.0, 0.011617250451432777957775559765),
        ];
        for (nu, x, expect) in table {
            let r = mittag_leffler(nu, x, &cfg()).unwrap();
            assert!((r.value - expect).abs() <= r.abs_error_bound, "nu={nu} x={x}: {} vs {expect}", r.value);
            assert!(r.abs_error_bound < 1e-9, "nu={nu} x={x}");
        }
    }

    #[test]
    fn mittag_leffler_generic_types() {
        let tight = cfg().with_rel_tol(1e-18);
        let dd = mittag_leffler_in::<DoubleDouble>(0.5, -1.0, &tight).unwrap();
        let f = mittag_leffler_in::<f64>(0.5, -1.0, &tight).unwrap();
        let s = mittag_leffler_in::<f32>(0.5, -1.0, &cfg().with_rel_tol(1e-6)).unwrap();
        assert!((dd.value.approx() - 0.427583576155807).abs() < 1e-15);
        assert!((f.value - 0.427583576155807).abs() < 1e-14);
        assert!((s.value as f64 - 0.427583576155807).abs() < 1e-5);
        assert!(dd.abs_error_bound < f.abs_error_bound);
    }

    #[test]
    fn mittag_leffler_far_argument_does_not_converge() {
        let err = mittag_leffler(0.3, -30.0, &cfg()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
        // Converges in few hundred terms, but the e^{100} cancellation
        // exceeds double-double reach.
        let err = mittag_leffler(0.5, -10.0, &cfg()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err:?}");
    }

    #[test]
    fn mittag_leffler_is_exp_at_unit_order() {
        for i in 0..=60 {
            let x = -0.5 * i as f64;
            let e = x.exp();
            assert!((mittag_leffler(1.0, x, &cfg()).unwrap().value - e).abs() <= 1e-12 * e);
            if x >= -15.0 {
                let series = mittag_leffler_in::<DoubleDouble>(1.0, x, &cfg()).unwrap();
                assert!((series.value.approx() - e).abs() <= 1e-12 * e, "x={x}");
                assert!((series.value.approx() - e).abs() <= series.abs_error_bound, "x={x}");
            }
        }
    }

    #[test]
    fn mittag_leffler_nonincreasing() {
        for nu in [0.3, 0.5, 0.7, 0.9] {
            let mut prev = f64::INFINITY;
            for i in 0..=40 {
                let x = -0.5 * i as f64;
                let v = match mittag_leffler(nu, x, &cfg()) {
                    Ok(v) => v,
                    // past double-double reach, |x|^{1/ν} > 50
                    Err(_) if x.abs().powf(1.0 / nu) > 50.0 => break,
                    Err(e) => panic!("nu={nu} x={x}: {e}"),
                };
                assert!(v.value <= prev + v.abs_error_bound, "nu={nu} x={x}");
                prev = v.value;
            }
        }
    }

    #[test]
    fn certificate_is_conservative_under_refinement() {
        for (nu, x) in [(0.5, -3.0), (0.7, -8.0), (0.9, -15.0)] {
            let coarse =
                mittag_leffler(nu, x, &cfg().with_precision(WorkingPrecision::Double).with_rel_tol(1e-8)).unwrap();
            let fine = mittag_leffler(nu, x, &cfg().with_rel_tol(1e-15).with_max_terms(20_000)).unwrap();
            assert!(
                (coarse.value - fine.value).abs() <= coarse.abs_error_bound + fine.abs_error_bound,
                "nu={nu} x={x}"
            );
        }
    }

    #[test]
    fn double_request_promoted_when_cancellation_is_large() {
        let c = cfg().with_precision(WorkingPrecision::Double);
        assert_eq!(c.effective_precision(1.0, 1.0, 0.5, 0), WorkingPrecision::Double);
        assert_eq!(c.effective_precision(25.0, 1.0, 0.5, 0), WorkingPrecision::DoubleDouble);
        assert_eq!(c.effective_precision(1.0, 0.5, 1.0, 40), WorkingPrecision::DoubleDouble);
    }

    #[test]
    fn wright_kernel_examples() {
        let a = wright_psi11_kernel(1.0, 0, -2.0, 1.0, &cfg()).unwrap();
        assert!((a.value - 0.1353352832366127).abs() < 1e-12 * 0.1353352832366127);
        assert!((a.value - 0.1353352832366127).abs() <= a.abs_error_bound);
        let b = wright_psi11_kernel(0.5, 0, 0.0, 1.0, &cfg()).unwrap();
        assert_eq!(b.value, 1.0);
        // Σ (-1)^r/r! · r/2 = -e^{-1}/2 from 60-digit summation
        let c = wright_psi11_kernel(0.5, 1, -1.0, 1.0, &cfg()).unwrap();
        assert!((c.value + 0.183939720585721160797761885081).abs() < 1e-12);
        assert!((c.value + 0.183939720585721160797761885081).abs() <= c.abs_error_bound + 1e-17);
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(mittag_leffler(0.0, -1.0, &cfg()).is_err());
        assert!(mittag_leffler(1.5, -1.0, &cfg()).is_err());
        assert!(mittag_leffler(0.5, 1.0, &cfg()).is_err());
        assert!(wright_psi11_kernel(0.5, 1, 0.5, 1.0, &cfg()).is_err());
        assert!(mittag_leffler(0.5, -1.0, &cfg().with_rel_tol(0.0)).is_err());
        assert!(mittag_leffler(0.5, -1.0, &cfg().with_max_terms(0)).is_err());
    }
}
