//! Reference mass function in arbitrary-precision binary floating point.
//!
//! Deliberately independent of `special_fn`: gamma values come from
//! Spouge's approximation instead of Stirling's series, the binomial
//! coefficients are built by their own recurrence, and truncation uses a
//! ratio test rather than a certified tail. The only shared input is the
//! parameter set.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use serde::Serialize;

use crate::dist::ProcessParams;
use crate::error::{invalid, Error, Result};

type Big = FBig<HalfEven, 2>;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Precision policy for the reference summation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleConfig {
    /// Decimal digits of absolute accuracy requested for each value.
    pub precision_digits: u32,
    pub max_terms: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { precision_digits: 40, max_terms: 20_000 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.precision_digits < 30 {
            return Err(invalid(format!("oracle needs at least 30 digits, got {}", self.precision_digits)));
        }
        if self.max_terms < 1 {
            return Err(invalid("oracle max_terms must be at least 1"));
        }
        Ok(())
    }
}

/// One reference value.
#[derive(Clone, Debug)]
pub struct OracleValue {
    value: Big,
    pub k: u64,
    pub terms_used: u64,
}

impl OracleValue {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().value()
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        if self.value == Big::ZERO {
            return "0".to_string();
        }
        let d = self.value.to_decimal().value().with_precision(digits).value();
        format_decimal(&d.to_string())
    }

    /// `|self - x|`, formed at the oracle's precision before rounding.
    pub fn distance_to(&self, x: f64) -> f64 {
        let x = Big::try_from(x).expect("finite f64").with_precision(self.value.precision()).value();
        let d = &self.value - &x;
        d.to_f64().value().abs()
    }
}

/// Normalizes dashu's decimal output (which may use `@` exponents) to
/// plain scientific notation.
fn format_decimal(s: &str) -> String {
    match s.split_once('@') {
        None => s.to_string(),
        Some((mantissa, exp)) => {
            let exp: i64 = exp.parse().unwrap_or(0);
            let (sign, digits) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
            let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
            let all = format!("{int}{frac}");
            let point = int.len() as i64 + exp;
            let trimmed = all.trim_start_matches('0');
            let lead = (all.len() - trimmed.len()) as i64;
            let e = point - lead - 1;
            let (first, rest) = trimmed.split_at(1.min(trimmed.len()));
            if rest.is_empty() {
                format!("{sign}{first}e{e}")
            } else {
                format!("{sign}{first}.{rest}e{e}")
            }
        }
    }
}

fn big(x: f64, bits: usize) -> Big {
    Big::try_from(x).expect("finite f64").with_precision(bits).value()
}

fn int(n: u64, bits: usize) -> Big {
    Big::from(n).with_precision(bits).value()
}

/// Spouge's formula `Γ(z+1) = (z+a)^{z+1/2} e^{-(z+a)} [c_0 + Σ_{j<a} c_j/(z+j)]`.
struct Spouge {
    a: u64,
    coeffs: Vec<Big>,
    bits: usize,
}

impl Spouge {
    /// Relative error below `10^{-digits}` for real `z ≥ 0`.
    fn new(digits: f64, bits: usize) -> Self {
        // error < a^{-1/2} (2π)^{-(a+1/2)}
        let a = (digits / (2.0 * std::f64::consts::PI).log10()).ceil() as u64 + 1;
        let two_pi = Big::pi(bits) * int(2, bits);
        let mut coeffs = vec![two_pi.sqrt()];
        let mut fact = int(1, bits);
        for j in 1..a {
            if j > 1 {
                fact *= int(j - 1, bits);
            }
            let base = int(a - j, bits);
            let half = big(0.5, bits);
            let power = ((int(j, bits) - &half) * base.ln()).exp();
            let c = power * int(a - j, bits).exp() / &fact;
            coeffs.push(if j % 2 == 1 { c } else { -c });
        }
        Self { a, coeffs, bits }
    }

    fn gamma_plus_one(&self, z: &Big) -> Big {
        let bits = self.bits;
        let mut s = self.coeffs[0].clone();
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            s += c / (z + int(j as u64, bits));
        }
        let za = z + int(self.a, bits);
        let lead = ((z + big(0.5, bits)) * za.ln() - &za).exp();
        lead * s
    }
}

/// `ln |term|` in `f64`, used only to size the working precision.
fn rough_log_term(alpha: f64, nu: f64, ln_w: f64, r: u64, k: u64) -> Option<f64> {
    let z = alpha * r as f64;
    let mut ln_binom = 0.0;
    for j in 0..k {
        let f = (z - j as f64).abs();
        if f == 0.0 {
            return None;
        }
        ln_binom += f.ln() - ((j + 1) as f64).ln();
    }
    Some(r as f64 * ln_w - statrs::function::gamma::ln_gamma(nu * r as f64 + 1.0) + ln_binom)
}

/// `p_k(t)` for `k = 0..=k_max`, summing
/// `(-1)^k Σ_r w^r/Γ(νr+1) C(αr, k)` with `w = -λ^α t^ν`.
pub fn oracle_pmf_table(params: &ProcessParams, t: f64, k_max: u64, ocfg: &OracleConfig) -> Result<Vec<OracleValue>> {
    ocfg.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be nonnegative and finite, got {t}")));
    }
    let (alpha, nu) = (params.alpha(), params.nu());
    if t == 0.0 {
        return Ok((0..=k_max).map(|k| OracleValue { value: int(u64::from(k == 0), 64), k, terms_used: 0 }).collect());
    }
    let digits = ocfg.precision_digits as f64;

    // First pass: size of the largest term, which sets the cancellation.
    let ln_w = alpha * params.lambda().ln() + nu * t.ln();
    let mut peak = 0.0f64;
    let mut r = 0u64;
    loop {
        let mut all_small = alpha * r as f64 > k_max as f64 + 1.0;
        for k in 0..=k_max {
            if let Some(l) = rough_log_term(alpha, nu, ln_w, r, k) {
                let l10 = l / std::f64::consts::LN_10;
                peak = peak.max(l10);
                all_small &= l10 < -(digits + 10.0);
            }
        }
        if all_small || r >= ocfg.max_terms {
            break;
        }
        r += 1;
    }
    let guard = 12.0 + (r as f64 + 1.0).log10();
    let gamma_digits = digits + peak + guard;
    let spouge_a = gamma_digits / 0.798;
    // Spouge coefficients grow like e^a, so carry those digits too.
    let bits = ((gamma_digits + 0.45 * spouge_a + guard) * LOG2_10).ceil() as usize;
    let spouge = Spouge::new(gamma_digits, bits);

    let w_abs = (big(alpha, bits) * big(params.lambda(), bits).ln() + big(nu, bits) * big(t, bits).ln()).exp();
    let w = -w_abs;
    let threshold = (big(-(digits + 5.0), bits) * big(10.0, bits).ln()).exp();

    let n = (k_max + 1) as usize;
    let mut sums: Vec<Big> = vec![int(0, bits); n];
    let mut prev: Vec<Option<Big>> = vec![None; n];
    let mut done_at: Vec<Option<u64>> = vec![None; n];
    let mut power = int(1, bits);
    let alpha_big = big(alpha, bits);
    let nu_big = big(nu, bits);
    let mut r = 0u64;
    while done_at.iter().any(Option::is_none) {
        if r >= ocfg.max_terms {
            let k = done_at.iter().position(Option::is_none).unwrap_or(0);
            return Err(Error::NonConvergence {
                terms_used: r,
                partial: sums[k].to_f64().value(),
                error_bound: f64::INFINITY,
            });
        }
        let rb = int(r, bits);
        let base = &power / spouge.gamma_plus_one(&(&nu_big * &rb));
        let z = &alpha_big * &rb;
        let mut binom = int(1, bits);
        for k in 0..n {
            if k > 0 {
                binom = binom * (&z - int(k as u64 - 1, bits)) / int(k as u64, bits);
            }
            if done_at[k].is_some() {
                continue;
            }
            let term = &base * &binom;
            sums[k] += &term;
            let mag = if term < Big::ZERO { -term } else { term };
            // All binomial factors are positive from the previous index on,
            // so ratios can only fall; once one is below 1/2 the rest of
            // the series is at most the current term.
            let monotone = r >= 1 && alpha * (r - 1) as f64 - (k as f64 - 1.0) > 1e-9;
            if let (true, Some(p)) = (monotone, &prev[k]) {
                if int(2, bits) * &mag < *p && mag <= threshold {
                    done_at[k] = Some(r + 1);
                }
            }
            prev[k] = Some(mag);
        }
        power *= &w;
        r += 1;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(k, s)| OracleValue {
            value: if k % 2 == 0 { s } else { -s },
            k: k as u64,
            terms_used: done_at[k].unwrap_or(r),
        })
        .collect())
}

/// Reference value of `P(N(t) = k)`.
pub fn oracle_pmf(params: &ProcessParams, t: f64, k: u64, ocfg: &OracleConfig) -> Result<OracleValue> {
    let mut table = oracle_pmf_table(params, t, k, ocfg)?;
    Ok(table.pop().expect("table has k + 1 rows"))
}
