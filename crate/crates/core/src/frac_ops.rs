//! The fractional difference operator `(1 - B)^α` on probability-mass
//! vectors, where `B` shifts `p_k` to `p_{k-1}` and entries with negative
//! index are zero.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::special_fn::ln_gamma;

/// Dense mass vector indexed from `k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassVector<T = f64> {
    values: Vec<T>,
}

impl<T: Real> MassVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("mass vector entry {k} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `p_k`, zero outside the stored range.
    pub fn get(&self, k: isize) -> T {
        if k < 0 {
            T::zero()
        } else {
            self.values.get(k as usize).copied().unwrap_or_else(T::zero)
        }
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// `c_0, ..., c_{n-1}` of `(1 - B)^α = Σ c_r B^r`, by the recurrence
/// `c_{r+1} = c_r (r - α)/(r + 1)`.
pub fn frac_binom_coeffs<T: Real>(alpha: f64, n: usize) -> Vec<T> {
    let a = T::of(alpha);
    let mut out = Vec::with_capacity(n);
    let mut c = T::one();
    for r in 0..n {
        out.push(c);
        let rf = T::of(r as f64);
        c = c * (rf - a) / (rf + T::one());
    }
    out
}

/// `c_r(α) = (-1)^r Γ(α+1) / (r! Γ(α+1-r))`.
pub fn frac_binom_coeff(alpha: f64, r: usize) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(frac_binom_coeffs::<f64>(alpha, r + 1)[r])
}

/// `(1 - B)^α p`, i.e. `out[k] = Σ_{r ≤ k} c_r(α) p[k - r]`.
pub fn apply_frac_difference<T: Real>(p: &MassVector<T>, alpha: f64) -> Result<MassVector<T>> {
    check_alpha(alpha)?;
    let c = frac_binom_coeffs::<T>(alpha, p.len());
    let values = (0..p.len()).map(|k| (0..=k).fold(T::zero(), |acc, r| acc + c[r] * p.values[k - r])).collect();
    Ok(MassVector { values })
}

/// `sin(πα) B(α+1, r-α) / π` for `0 < α < 1`, `r ≥ 2`.
///
/// By the reflection formula this equals `-c_r(α)`.
pub fn beta_form_coeff<T: Real>(alpha: f64, r: usize) -> Result<T> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("beta form needs alpha in (0, 1), got {alpha}")));
    }
    if r < 2 {
        return Err(invalid(format!("beta form starts at r = 2, got {r}")));
    }
    let a = T::of(alpha);
    let rf = T::of(r as f64);
    let ln_beta = ln_gamma(a + T::one()) + ln_gamma(rf - a) - ln_gamma(rf + T::one());
    Ok((T::pi() * a).sin() * ln_beta.exp() / T::pi())
}

/// `-λ^α (1 - B)^α p`, the right-hand side of the forward equations in
/// binomial form.
pub fn generator_binomial_form<T: Real>(p: &MassVector<T>, alpha: f64, lambda: f64) -> Result<MassVector<T>> {
    let scale = -(T::of(lambda).ln() * T::of(alpha)).exp();
    let mut d = apply_frac_difference(p, alpha)?;
    for v in &mut d.values {
        *v = scale * *v;
    }
    Ok(d)
}

/// The same right-hand side written with beta functions:
/// `-λ^α p_k + αλ^α p_{k-1} + λ^α Σ_{r=2}^{k} sin(πα)B(α+1, r-α)/π · p_{k-r}`.
pub fn generator_beta_form<T: Real>(p: &MassVector<T>, alpha: f64, lambda: f64) -> Result<MassVector<T>> {
    check_alpha(alpha)?;
    let rate = (T::of(lambda).ln() * T::of(alpha)).exp();
    let a = T::of(alpha);
    let beta: Vec<T> = if alpha < 1.0 {
        (2..p.len()).map(|r| beta_form_coeff::<T>(alpha, r)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let values = (0..p.len() as isize)
        .map(|k| {
            let mut acc = -p.get(k) + a * p.get(k - 1);
            for (i, b) in beta.iter().enumerate() {
                let r = i as isize + 2;
                if r > k {
                    break;
                }
                acc = acc + *b * p.get(k - r);
            }
            rate * acc
        })
        .collect();
    Ok(MassVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::DoubleDouble;

    #[test]
    fn coefficient_examples() {
        assert_eq!(frac_binom_coeff(1.0, 2).unwrap(), 0.0);
        assert_eq!(frac_binom_coeff(0.5, 0).unwrap(), 1.0);
        assert_eq!(frac_binom_coeff(0.5, 1).unwrap(), -0.5);
        // (1-x)^{1/2} = 1 - x/2 - x^2/8 - x^3/16 - 5x^4/128 ...
        assert_eq!(frac_binom_coeff(0.5, 2).unwrap(), -0.125);
        assert_eq!(frac_binom_coeff(0.5, 3).unwrap(), -0.0625);
        assert_eq!(frac_binom_coeff(0.5, 4).unwrap(), -5.0 / 128.0);
        assert!(frac_binom_coeff(0.0, 1).is_err());
    }

    #[test]
    fn unit_order_is_first_difference() {
        let c = frac_binom_coeffs::<f64>(1.0, 10);
        assert_eq!(&c[..2], &[1.0, -1.0]);
        assert!(c[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn difference_examples() {
        let d = apply_frac_difference(&MassVector::new(vec![1.0, 0.0, 0.0]).unwrap(), 1.0).unwrap();
        assert_eq!(d.values(), &[1.0, -1.0, 0.0]);
        let d = apply_frac_difference(&MassVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap(), 0.5).unwrap();
        assert_eq!(d.values(), &[1.0, -0.5, -0.125, -0.0625]);

        let mu: f64 = 2.3;
        let poisson: Vec<f64> = (0..20)
            .scan((-mu).exp(), |p, k| {
                let out = *p;
                *p *= mu / (k + 1) as f64;
                Some(out)
            })
            .collect();
        let d = apply_frac_difference(&MassVector::new(poisson.clone()).unwrap(), 1.0).unwrap();
        for k in 0..20 {
            let prev = if k == 0 { 0.0 } else { poisson[k - 1] };
            assert!((d.values()[k] - (poisson[k] - prev)).abs() < 1e-16);
        }
    }

    #[test]
    fn beta_form_examples() {
        assert!((beta_form_coeff::<f64>(0.5, 2).unwrap() - 0.125).abs() < 1e-15);
        assert!((beta_form_coeff::<f64>(0.5, 3).unwrap() - 0.0625).abs() < 1e-15);
        assert!(beta_form_coeff::<f64>(1.0, 2).is_err());
        assert!(beta_form_coeff::<f64>(0.5, 1).is_err());
    }

    #[test]
    fn reflection_identity() {
        for alpha in [0.05, 0.3, 0.5, 0.77, 0.95] {
            let c = frac_binom_coeffs::<DoubleDouble>(alpha, 41);
            for (r, &cr) in c.iter().enumerate().skip(2) {
                let b = beta_form_coeff::<DoubleDouble>(alpha, r).unwrap();
                let s = (b + cr).approx();
                assert!(s.abs() < 1e-12 * cr.approx().abs().max(1e-300) + 1e-28, "alpha={alpha} r={r}: {s:e}");
                let bf = beta_form_coeff::<f64>(alpha, r).unwrap();
                assert!((bf + frac_binom_coeff(alpha, r).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_signs_and_partial_sums() {
        for alpha in [0.3, 0.5, 0.8] {
            let c = frac_binom_coeffs::<f64>(alpha, 1001);
            assert!(c[1..].iter().all(|&x| x < 0.0));
            let mut partial = 0.0;
            let mut prev = f64::INFINITY;
            for (r, x) in c.iter().enumerate() {
                partial += x;
                if r >= 1 {
                    assert!(partial.abs() <= prev, "alpha={alpha} r={r}");
                }
                prev = partial.abs();
            }
            // Σ_{r ≤ R} c_r = Γ(R+1-α) / (Γ(1-α) R!), which decays like R^{-α}.
            let closed = (ln_gamma(1001.0 - alpha) - ln_gamma(1.0 - alpha) - ln_gamma(1001.0)).exp();
            assert!((partial - closed).abs() < 1e-12 * closed, "alpha={alpha}: {partial} vs {closed}");
            if alpha >= 0.8 {
                assert!(partial.abs() < 1e-2);
            }
        }
    }

    #[test]
    fn generator_forms_agree() {
        let p = MassVector::new((0..30).map(|k| 1.0 / ((k + 1) * (k + 2)) as f64).collect()).unwrap();
        for alpha in [0.3, 0.5, 0.8, 1.0] {
            let a = generator_binomial_form(&p, alpha, 1.7).unwrap();
            let b = generator_beta_form(&p, alpha, 1.7).unwrap();
            for k in 0..30 {
                assert!((a.values()[k] - b.values()[k]).abs() < 1e-12, "alpha={alpha} k={k}");
            }
        }
    }

    #[test]
    fn poisson_solves_unit_order_equations() {
        let (lambda, t) = (1.3f64, 0.9f64);
        let pmf = |t: f64| -> Vec<f64> {
            let mu = lambda * t;
            (0..12)
                .scan((-mu).exp(), |p, k| {
                    let out = *p;
                    *p *= mu / (k + 1) as f64;
                    Some(out)
                })
                .collect()
        };
        let h = 1e-4 * t;
        let (up, down) = (pmf(t + h), pmf(t - h));
        let rhs = generator_binomial_form(&MassVector::new(pmf(t)).unwrap(), 1.0, lambda).unwrap();
        for k in 0..12 {
            let dt = (up[k] - down[k]) / (2.0 * h);
            assert!((dt - rhs.values()[k]).abs() < 1e-7, "k={k}");
        }
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(MassVector::new(vec![0.5, f64::NAN]).is_err());
        let v = MassVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(v.get(-1), 0.0);
        assert_eq!(v.get(5), 0.0);
    }
}
