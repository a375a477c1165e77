//! Distributions of `N^{α,ν}(t)`: mass function, generating function,
//! cumulative and survival functions, and the law of the first passage time
//! `τ_k = inf{t : N(t) ≥ k}`.
//!
//! Every series is summed with the `1/k!` kept inside the binomial
//! coefficient, with `w = -λ^α t^ν`:
//!
//! ```text
//!   p_k(t)  = (-1)^k Σ_{r≥0} w^r/Γ(νr+1) · C(αr, k)
//!   P(N≤k)  = (-1)^k Σ_{r≥0} w^r/Γ(νr+1) · C(αr-1, k)
//!   P(N>k)  = (-1)^{k+1} Σ_{r≥1} w^r/Γ(νr+1) · C(αr-1, k)
//! ```
//!
//! The last two follow from `Σ_{m≤k} (-1)^m C(z, m) = (-1)^k C(z-1, k)`, so
//! a tail probability costs one series and never forms `1 - (1 - ε)`.

use num_traits::One;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::{DoubleDouble, Real};
use crate::special_fn::{
    check_order, ln_gamma, ln_gamma_error, sum_at_power_product, BinomialSeries, EvalResult, SeriesConfig, Weight,
    WorkingPrecision,
};

/// Rate and orders of the process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProcessParams {
    lambda: f64,
    alpha: f64,
    nu: f64,
}

impl ProcessParams {
    pub fn new(lambda: f64, alpha: f64, nu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
        }
        check_order("alpha", alpha)?;
        check_order("nu", nu)?;
        Ok(Self { lambda, alpha, nu })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1.0, 1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_poisson(&self) -> bool {
        self.alpha == 1.0 && self.nu == 1.0
    }

    /// `-λ^α t^ν` as base/exponent pairs.
    fn argument(&self, t: f64) -> [(DoubleDouble, f64); 2] {
        [(DoubleDouble::of(self.lambda), self.alpha), (DoubleDouble::of(t), self.nu)]
    }
}

/// One row of a mass function. `p` is the raw series value; see
/// [`PmfRow::clamped`] for presentation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PmfRow {
    pub k: u64,
    pub p: f64,
    pub abs_error_bound: f64,
}

impl PmfRow {
    pub fn clamped(&self) -> f64 {
        self.p.clamp(0.0, 1.0)
    }

    fn from_eval(k: u64, r: EvalResult) -> Self {
        Self { k, p: r.value, abs_error_bound: r.abs_error_bound }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("t must be nonnegative and finite, got {t}")))
    }
}

fn sign(k: u64) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn scaled(r: EvalResult, factor: f64) -> EvalResult {
    EvalResult {
        value: r.value * factor,
        abs_error_bound: r.abs_error_bound * factor.abs() + (r.value * factor).abs() * f64::EPSILON,
        terms_used: r.terms_used,
    }
}

/// Rounds a double-double value whose log was formed with absolute error
/// `ln_err`.
fn from_log(v: DoubleDouble, ln_err: f64) -> EvalResult {
    let value = v.approx();
    EvalResult { value, abs_error_bound: value * (ln_err * (1.0 + 2.0 * ln_err) + f64::EPSILON), terms_used: 1 }
}

/// `e^{-μ} μ^k / k!` with `μ = λt` formed exactly.
fn poisson_pmf(lambda: f64, t: f64, k: u64) -> EvalResult {
    let mu = DoubleDouble::from_product(lambda, t);
    let kf = DoubleDouble::of(k as f64);
    let lg = ln_gamma(kf + DoubleDouble::one());
    let ln_p = if k == 0 { -mu } else { kf * mu.ln() - mu - lg };
    let u = DoubleDouble::UNIT_ROUNDOFF;
    let ln_err = ln_gamma_error::<DoubleDouble>(k as f64 + 1.0)
        + 8.0 * u * (kf * mu.ln()).abs().approx()
        + 4.0 * u * (mu.approx() + ln_p.abs().approx());
    from_log(ln_p.exp(), ln_err)
}

/// `P(N(t) = k)`.
pub fn pmf(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<PmfRow> {
    check_time(t)?;
    cfg.validate()?;
    if t == 0.0 {
        return Ok(PmfRow { k, p: if k == 0 { 1.0 } else { 0.0 }, abs_error_bound: 0.0 });
    }
    if params.is_poisson() {
        return Ok(PmfRow::from_eval(k, poisson_pmf(params.lambda, t, k)));
    }
    if params.nu == 1.0 && k == 0 {
        // e^{-λ^α t}
        let ln = -(DoubleDouble::of(params.lambda).ln() * DoubleDouble::of(params.alpha)).exp() * DoubleDouble::of(t);
        let err = 16.0 * DoubleDouble::UNIT_ROUNDOFF * (ln.abs().approx() + 1.0);
        return Ok(PmfRow::from_eval(0, from_log(ln.exp(), err)));
    }
    let series = BinomialSeries::new(params.alpha, params.nu, k);
    let r = cfg.certify(sum_at_power_product(&series, &params.argument(t), cfg)?)?;
    Ok(PmfRow::from_eval(k, scaled(r, sign(k))))
}

/// `P(N(t) = k)` for `k = 0..=k_max`.
pub fn pmf_vector(params: &ProcessParams, t: f64, k_max: u64, cfg: &SeriesConfig) -> Result<Vec<PmfRow>> {
    (0..=k_max).map(|k| pmf(params, t, k, cfg)).collect()
}

/// `P(N_ν(t) = k)` for the time-fractional process (`α = 1`), from the
/// expansion in powers of `y = λt^ν`:
///
/// ```text
///   Σ_{r≥0} (-1)^r C(r+k, k) y^{r+k} / Γ(ν(r+k)+1)
/// ```
///
/// This shares no code with [`pmf`] beyond `ln_gamma`, so the two can
/// check each other.
pub fn pmf_time_fractional_direct(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<PmfRow> {
    if params.alpha != 1.0 {
        return Err(invalid(format!("direct time-fractional series needs alpha = 1, got {}", params.alpha)));
    }
    check_time(t)?;
    cfg.validate()?;
    if t == 0.0 {
        return Ok(PmfRow { k, p: if k == 0 { 1.0 } else { 0.0 }, abs_error_bound: 0.0 });
    }
    let y = params.lambda * t.powf(params.nu);
    let r = match cfg.effective_precision(y, 1.0, params.nu, k) {
        WorkingPrecision::Double => direct_series::<f64>(params, t, k, cfg)?,
        WorkingPrecision::DoubleDouble => direct_series::<DoubleDouble>(params, t, k, cfg)?,
    };
    Ok(PmfRow::from_eval(k, cfg.certify(r)?))
}

fn direct_series<T: Real>(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<EvalResult> {
    let u = T::UNIT_ROUNDOFF;
    let nu = params.nu;
    let ln_y = T::of(params.lambda).ln() + T::of(t).ln() * T::of(nu);
    let ln_y_err = 8.0 * u * (ln_y.abs().approx() + 1.0);
    let kf = k as f64;
    let lg_k = ln_gamma(T::of(kf + 1.0));
    // (log|term|, its absolute error)
    let term = |r: u64| -> (T, f64) {
        let rf = r as f64;
        let n = rf + kf;
        let g = DoubleDouble::from_product(nu, n) + DoubleDouble::one();
        let ln = ln_gamma(T::of(n + 1.0)) - ln_gamma(T::of(rf + 1.0)) - lg_k + T::of(n) * ln_y
            - ln_gamma(T::from_pair(g.hi(), g.lo()));
        let err = ln_gamma_error::<T>(n + 1.0)
            + ln_gamma_error::<T>(rf + 1.0)
            + ln_gamma_error::<T>(kf + 1.0)
            + ln_gamma_error::<T>(g.approx())
            + n * ln_y_err
            + 8.0 * u * (ln.abs().approx() + n * ln_y.abs().approx());
        (ln, err)
    };

    let mut sum = T::zero();
    let (mut sum_abs, mut rounding) = (0.0, 0.0);
    let mut r = 0u64;
    let (mut ln_cur, mut err_cur) = term(0);
    loop {
        let mag = ln_cur.exp();
        if !mag.is_finite() {
            return Err(crate::Error::NonConvergence {
                terms_used: r,
                partial: sum.approx(),
                error_bound: f64::INFINITY,
            });
        }
        sum = if r.is_multiple_of(2) { sum + mag } else { sum - mag };
        let m = mag.approx();
        sum_abs += m;
        rounding += m * (err_cur * (1.0 + 2.0 * err_cur) + 4.0 * u);
        let (ln_next, err_next) = term(r + 1);
        // Ratios (r+k+1)/(r+1) · y · Γ(ν(r+k)+1)/Γ(ν(r+k+1)+1) never increase.
        let rho = (ln_next - ln_cur).approx().exp() * (1.0 + 1e-9);
        if rho < 1.0 {
            let next = ln_next.exp().approx();
            let tail = next / (1.0 - rho);
            if tail <= cfg.rel_tol * sum.abs().approx() || tail < f64::MIN_POSITIVE {
                let n = (r + 1) as f64;
                return Ok(EvalResult {
                    value: sum,
                    abs_error_bound: tail + 2.0 * rounding + 2.0 * (n + 1.0) * u * sum_abs,
                    terms_used: r + 1,
                }
                .to_f64());
            }
        }
        r += 1;
        if r >= cfg.max_terms {
            return Err(crate::Error::NonConvergence {
                terms_used: r,
                partial: sum.approx(),
                error_bound: ln_next.exp().approx(),
            });
        }
        (ln_cur, err_cur) = (ln_next, err_next);
    }
}

/// `E[u^{N(t)}] = E_ν(-λ^α (1-u)^α t^ν)` for `-1 ≤ u ≤ 1`.
pub fn pgf(params: &ProcessParams, t: f64, u: f64, cfg: &SeriesConfig) -> Result<EvalResult> {
    check_time(t)?;
    if !(-1.0..=1.0).contains(&u) {
        return Err(invalid(format!("u must lie in [-1, 1], got {u}")));
    }
    cfg.validate()?;
    if t == 0.0 || u == 1.0 {
        return Ok(EvalResult::exact(1.0));
    }
    let one_minus_u = DoubleDouble::from_sum(1.0, -u);
    let factors = [
        (DoubleDouble::of(params.lambda), params.alpha),
        (one_minus_u, params.alpha),
        (DoubleDouble::of(t), params.nu),
    ];
    if params.nu == 1.0 {
        let ln = -(DoubleDouble::of(params.lambda).ln() * DoubleDouble::of(params.alpha)
            + one_minus_u.ln() * DoubleDouble::of(params.alpha))
        .exp()
            * DoubleDouble::of(t);
        let err = 24.0 * DoubleDouble::UNIT_ROUNDOFF * (ln.abs().approx() + 1.0);
        return Ok(from_log(ln.exp(), err));
    }
    cfg.certify(sum_at_power_product(&BinomialSeries::new(1.0, params.nu, 0), &factors, cfg)?)
}

/// `P(N(t) ≤ k)`.
pub fn cdf(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<EvalResult> {
    check_time(t)?;
    cfg.validate()?;
    if t == 0.0 {
        return Ok(EvalResult::exact(1.0));
    }
    let series = BinomialSeries::new(params.alpha, params.nu, k).offset(-1.0);
    let r = cfg.certify(sum_at_power_product(&series, &params.argument(t), cfg)?)?;
    Ok(scaled(r, sign(k)))
}

/// `P(N(t) > k)`, summed directly rather than as `1 - cdf`.
pub fn survival(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<EvalResult> {
    check_time(t)?;
    cfg.validate()?;
    if t == 0.0 {
        return Ok(EvalResult::exact(0.0));
    }
    let series = BinomialSeries::new(params.alpha, params.nu, k).offset(-1.0).start(1);
    let r = cfg.certify(sum_at_power_product(&series, &params.argument(t), cfg)?)?;
    Ok(scaled(r, -sign(k)))
}

/// `P(τ_k ≤ t) = P(N(t) ≥ k)`.
pub fn first_passage_cdf(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<EvalResult> {
    if k == 0 {
        check_time(t)?;
        return Ok(EvalResult::exact(1.0));
    }
    survival(params, t, k - 1, cfg)
}

/// Density of `τ_k` at `t > 0`, for `k ≥ 1`.
///
/// Differentiates the survival series term by term: `d/dt w^r = νr w^r / t`.
/// For `α = ν = 1` this is the Erlang density `λ e^{-λt} (λt)^{k-1}/(k-1)!`.
pub fn first_passage_density(params: &ProcessParams, t: f64, k: u64, cfg: &SeriesConfig) -> Result<EvalResult> {
    if k == 0 {
        return Err(invalid("first passage to level 0 is immediate and has no density"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be positive and finite, got {t}")));
    }
    cfg.validate()?;
    if params.is_poisson() {
        return Ok(scaled(poisson_pmf(params.lambda, t, k - 1), params.lambda));
    }
    let series = BinomialSeries::new(params.alpha, params.nu, k - 1).offset(-1.0).start(1).weight(Weight::Index);
    let r = cfg.certify(sum_at_power_product(&series, &params.argument(t), cfg)?)?;
    Ok(scaled(r, -sign(k - 1) * params.nu / t))
}
