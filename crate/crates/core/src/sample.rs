//! Exact samplers for the classical, space-, time- and space-time
//! fractional Poisson processes at a fixed time.
//!
//! The fractional processes are built by random time change:
//!
//! * space-fractional: `N(S^α(t))`, a Poisson count at a stable time;
//! * time-fractional: renewal counts with Mittag-Leffler waiting times;
//! * space-time: the space-fractional process at an inverse-stable time
//!   `L = (t/S^ν(1))^ν`, whose Laplace transform is `E_ν(-z t^ν)`.
//!
//! Batches are cut into fixed chunks of [`CHUNK_LEN`] draws. Chunk `i`
//! draws from stream `stream_base + i`, so a batch is the same for every
//! thread count.

use std::f64::consts::PI;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::ProcessParams;
use crate::error::{invalid, Result};
use crate::scalar::{DoubleDouble, Real};
use crate::special_fn::ln_gamma;

/// Draws per stream in a batch.
pub const CHUNK_LEN: usize = 1 << 14;

/// Stable draws above this are discarded and redrawn.
const STABLE_CEILING: f64 = 1e300;

/// Seeded random source; `(seed, stream_id)` fixes the whole sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
    redraws: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng, redraws: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Stable draws rejected for exceeding the overflow guard.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    pub fn normal(&mut self) -> f64 {
        let (u, v) = (self.uniform(), self.uniform());
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    }
}

/// `sin(πx)` for `x` in `[0, 1]`, accurate near both ends.
fn sin_pi(x: f64) -> f64 {
    if x > 0.5 {
        (PI * (1.0 - x)).sin()
    } else {
        (PI * x).sin()
    }
}

/// `ln(k!) - [(k + 1/2) ln k - k + ln(2π)/2]`.
fn stirling_error(k: u64) -> f64 {
    let n = k as f64;
    if k <= 15 {
        let x = DoubleDouble::of(n);
        let lg = ln_gamma(x + DoubleDouble::of(1.0));
        let approx = (x + DoubleDouble::of(0.5)) * x.ln() - x + DoubleDouble::half_ln_two_pi();
        return (lg - approx).approx();
    }
    let nn = n * n;
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// `x ln(x/m) + m - x`, without cancellation when `x ≈ m`.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                break;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln P(X = k)` for `X ~ Poisson(m)`, stable for large `m`.
fn poisson_ln_pmf(k: u64, m: f64) -> f64 {
    if k == 0 {
        return -m;
    }
    let x = k as f64;
    -stirling_error(k) - deviance(x, m) - 0.5 * (2.0 * PI * x).ln()
}

fn poisson_inversion(mu: f64, rng: &mut RngStream) -> u64 {
    let p0 = (-mu).exp();
    'draw: loop {
        let u = rng.uniform();
        let (mut k, mut p, mut cdf) = (0u64, p0, p0);
        while u > cdf {
            k += 1;
            p *= mu / k as f64;
            cdf += p;
            if p < 1e-300 && k as f64 > mu {
                // u landed in the rounding gap below 1
                continue 'draw;
            }
        }
        return k;
    }
}

/// Hörmann's transformed rejection with squeeze, for `mu ≥ 10`.
fn poisson_ptrs(mu: f64, rng: &mut RngStream) -> u64 {
    let smu = mu.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= poisson_ln_pmf(k as u64, mu) {
            return k as u64;
        }
    }
}

/// Means at or above this are sampled from the normal approximation,
/// since neighbouring counts are no longer distinct `f64` values.
const POISSON_EXACT_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

pub(crate) fn poisson(mu: f64, rng: &mut RngStream) -> u64 {
    if mu <= 0.0 {
        0
    } else if mu <= 10.0 {
        poisson_inversion(mu, rng)
    } else if mu < POISSON_EXACT_LIMIT {
        poisson_ptrs(mu, rng)
    } else if mu >= u64::MAX as f64 {
        u64::MAX
    } else {
        let x = (mu + mu.sqrt() * rng.normal()).round();
        if x >= u64::MAX as f64 {
            u64::MAX
        } else {
            x as u64
        }
    }
}

/// Poisson draw with mean `mu`.
pub fn sample_poisson(mu: f64, rng: &mut RngStream) -> Result<u64> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(format!("Poisson mean must be finite and nonnegative, got {mu}")));
    }
    Ok(poisson(mu, rng))
}

/// `S^γ(1)`, Laplace transform `e^{-z^γ}`.
pub(crate) fn stable_unit(gamma: f64, rng: &mut RngStream) -> f64 {
    loop {
        let u = rng.uniform();
        let e = rng.exponential();
        let s = sin_pi(gamma * u) / sin_pi(u).powf(1.0 / gamma)
            * (sin_pi((1.0 - gamma) * u) / e).powf((1.0 - gamma) / gamma);
        if s > 0.0 && s <= STABLE_CEILING {
            return s;
        }
        rng.redraws += 1;
    }
}

fn stable(gamma: f64, t: f64, rng: &mut RngStream) -> f64 {
    t.powf(1.0 / gamma) * stable_unit(gamma, rng)
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {x}")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

/// `S^γ(t)`, with `E e^{-z S^γ(t)} = e^{-t z^γ}`.
pub fn sample_stable_subordinator(gamma: f64, t: f64, rng: &mut RngStream) -> Result<f64> {
    check_unit_open("gamma", gamma)?;
    check_positive("t", t)?;
    Ok(stable(gamma, t, rng))
}

fn space_fractional(lambda: f64, alpha: f64, t: f64, rng: &mut RngStream) -> u64 {
    if alpha == 1.0 {
        poisson(lambda * t, rng)
    } else {
        poisson(lambda * stable(alpha, t, rng), rng)
    }
}

/// `N^α(t) = N(S^α(t))`; requires `ν = 1`.
pub fn sample_space_fractional(params: &ProcessParams, t: f64, rng: &mut RngStream) -> Result<u64> {
    if params.nu() != 1.0 {
        return Err(invalid("space-fractional sampler needs nu = 1"));
    }
    check_positive("t", t)?;
    Ok(space_fractional(params.lambda(), params.alpha(), t, rng))
}

fn composed(alpha: f64, gamma: f64, lambda: f64, t: f64, rng: &mut RngStream) -> u64 {
    let s = stable(gamma, t, rng);
    space_fractional(lambda, alpha, s, rng)
}

/// `N^α(S^γ(t))` with independent `S^γ`; same law as `N^{αγ}(t)`.
pub fn sample_composed_subordination(alpha: f64, gamma: f64, lambda: f64, t: f64, rng: &mut RngStream) -> Result<u64> {
    ProcessParams::new(lambda, alpha, 1.0)?;
    check_unit_open("gamma", gamma)?;
    check_positive("t", t)?;
    Ok(composed(alpha, gamma, lambda, t, rng))
}

fn ml_waiting_time(nu: f64, scale: f64, rng: &mut RngStream) -> f64 {
    let e = rng.exponential();
    if nu == 1.0 {
        scale * e
    } else {
        scale * e.powf(1.0 / nu) * stable_unit(nu, rng)
    }
}

/// Waiting time with `P(T > s) = E_ν(-(s/scale)^ν)`.
///
/// Drawn as `scale · E^{1/ν} · S^ν(1)`: conditioning on `E`, the Laplace
/// transform is `E e^{-E (z scale)^ν} = 1/(1 + (z scale)^ν)`, the
/// Mittag-Leffler law. A renewal process with rate `λ` uses
/// `scale = λ^{-1/ν}`.
pub fn sample_ml_waiting_time(nu: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(invalid(format!("nu must lie in (0, 1], got {nu}")));
    }
    check_positive("scale", scale)?;
    Ok(ml_waiting_time(nu, scale, rng))
}

pub(crate) fn time_fractional(lambda: f64, nu: f64, t: f64, rng: &mut RngStream) -> u64 {
    let scale = lambda.powf(-1.0 / nu);
    let mut clock = 0.0;
    let mut count = 0;
    loop {
        clock += ml_waiting_time(nu, scale, rng);
        if clock > t {
            return count;
        }
        count += 1;
    }
}

/// `N_ν(t)`: renewal epochs in `[0, t]`; requires `α = 1`.
pub fn sample_time_fractional(params: &ProcessParams, t: f64, rng: &mut RngStream) -> Result<u64> {
    if params.alpha() != 1.0 {
        return Err(invalid("time-fractional sampler needs alpha = 1"));
    }
    check_positive("t", t)?;
    Ok(time_fractional(params.lambda(), params.nu(), t, rng))
}

fn space_time(lambda: f64, alpha: f64, nu: f64, t: f64, rng: &mut RngStream) -> u64 {
    if nu == 1.0 {
        return space_fractional(lambda, alpha, t, rng);
    }
    let clock = (t / stable_unit(nu, rng)).powf(nu);
    space_fractional(lambda, alpha, clock, rng)
}

/// `N^{α,ν}(t)`: the space-fractional process run on an inverse-stable clock.
pub fn sample_space_time(params: &ProcessParams, t: f64, rng: &mut RngStream) -> Result<u64> {
    check_positive("t", t)?;
    Ok(space_time(params.lambda(), params.alpha(), params.nu(), t, rng))
}

/// Which construction a batch uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Sampler {
    /// `N(S^α(t))`, needs `ν = 1`.
    SpaceFractional { params: ProcessParams },
    /// Mittag-Leffler renewal counts, needs `α = 1`.
    TimeFractional { params: ProcessParams },
    /// Space-fractional process on an inverse-stable clock.
    SpaceTime { params: ProcessParams },
    /// `N^α(S^γ(t))`.
    Composed { alpha: f64, gamma: f64, lambda: f64 },
}

impl Sampler {
    /// The most direct construction for these parameters.
    pub fn for_params(params: ProcessParams) -> Self {
        if params.nu() == 1.0 {
            Sampler::SpaceFractional { params }
        } else if params.alpha() == 1.0 {
            Sampler::TimeFractional { params }
        } else {
            Sampler::SpaceTime { params }
        }
    }

    pub fn composed(alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        ProcessParams::new(lambda, alpha, 1.0)?;
        check_unit_open("gamma", gamma)?;
        Ok(Sampler::Composed { alpha, gamma, lambda })
    }

    /// Parameters of the law the draws follow.
    pub fn law(&self) -> ProcessParams {
        match *self {
            Sampler::SpaceFractional { params }
            | Sampler::TimeFractional { params }
            | Sampler::SpaceTime { params } => params,
            Sampler::Composed { alpha, gamma, lambda } => {
                // N^α(S^γ(t)) has PGF exp(-λ^{αγ} t (1-u)^{αγ}).
                ProcessParams::new(lambda, alpha * gamma, 1.0).expect("validated at construction")
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Sampler::SpaceFractional { params } if params.nu() != 1.0 => {
                Err(invalid("space-fractional sampler needs nu = 1"))
            }
            Sampler::TimeFractional { params } if params.alpha() != 1.0 => {
                Err(invalid("time-fractional sampler needs alpha = 1"))
            }
            Sampler::Composed { alpha, gamma, lambda } => Sampler::composed(alpha, gamma, lambda).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// One draw at time `t > 0`.
    pub fn draw(&self, t: f64, rng: &mut RngStream) -> u64 {
        match *self {
            Sampler::SpaceFractional { params } => space_fractional(params.lambda(), params.alpha(), t, rng),
            Sampler::TimeFractional { params } => time_fractional(params.lambda(), params.nu(), t, rng),
            Sampler::SpaceTime { params } => space_time(params.lambda(), params.alpha(), params.nu(), t, rng),
            Sampler::Composed { alpha, gamma, lambda } => composed(alpha, gamma, lambda, t, rng),
        }
    }
}

/// Counts drawn at one time, with what is needed to reproduce them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBatch {
    pub counts: Vec<u64>,
    pub sampler: Sampler,
    pub params: ProcessParams,
    pub t: f64,
    pub seed: u64,
    pub stream_base: u64,
    pub n: usize,
    /// Stable draws redrawn by the overflow guard.
    pub redraws: u64,
}

/// Draws `n` counts at time `t` on the current rayon pool.
pub fn sample_batch(sampler: Sampler, t: f64, n: usize, seed: u64, stream_base: u64) -> Result<SampleBatch> {
    sampler.validate()?;
    check_positive("t", t)?;
    let chunks = n.div_ceil(CHUNK_LEN);
    let parts: Vec<(Vec<u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let len = CHUNK_LEN.min(n - i * CHUNK_LEN);
            let mut rng = RngStream::new(seed, stream_base.wrapping_add(i as u64));
            let counts = (0..len).map(|_| sampler.draw(t, &mut rng)).collect();
            (counts, rng.redraws())
        })
        .collect();
    let mut counts = Vec::with_capacity(n);
    let mut redraws = 0;
    for (c, r) in parts {
        counts.extend(c);
        redraws += r;
    }
    Ok(SampleBatch { counts, sampler, params: sampler.law(), t, seed, stream_base, n, redraws })
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `threads` is `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(invalid("thread count must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| invalid(format!("cannot start thread pool: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_open() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let draw = |seed, stream| {
            let mut r = RngStream::new(seed, stream);
            (0..8).map(|_| r.next_u64()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }

    #[test]
    fn poisson_log_mass_matches_direct_formula() {
        for (k, m) in [(0u64, 3.0), (1, 0.5), (7, 12.5), (30, 25.0), (200, 180.0), (2000, 2100.0)] {
            let direct = k as f64 * f64::ln(m) - m - ln_gamma(k as f64 + 1.0);
            assert!((poisson_ln_pmf(k, m) - direct).abs() < 1e-10 * direct.abs().max(1.0), "k={k} m={m}");
        }
    }

    #[test]
    fn zero_mean_gives_zero() {
        let mut rng = RngStream::new(5, 0);
        assert!((0..100).all(|_| sample_poisson(0.0, &mut rng).unwrap() == 0));
        assert!(sample_poisson(-1.0, &mut rng).is_err());
        assert!(sample_poisson(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn huge_means_saturate() {
        let mut rng = RngStream::new(5, 0);
        assert_eq!(poisson(1e30, &mut rng), u64::MAX);
        let x = poisson(1e17, &mut rng) as f64;
        assert!((x - 1e17).abs() < 10.0 * 1e17f64.sqrt());
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = RngStream::new(5, 0);
        assert!(sample_stable_subordinator(1.0, 1.0, &mut rng).is_err());
        assert!(sample_stable_subordinator(0.5, 0.0, &mut rng).is_err());
        assert!(sample_ml_waiting_time(0.0, 1.0, &mut rng).is_err());
        let p = ProcessParams::new(1.0, 0.5, 0.5).unwrap();
        assert!(sample_space_fractional(&p, 1.0, &mut rng).is_err());
        assert!(sample_time_fractional(&p, 1.0, &mut rng).is_err());
        assert!(Sampler::composed(0.5, 1.0, 1.0).is_err());
        assert!(sample_batch(Sampler::SpaceTime { params: p }, 0.0, 10, 1, 0).is_err());
    }

    #[test]
    fn composed_law_multiplies_orders() {
        let s = Sampler::composed(0.8, 0.5, 2.0).unwrap();
        let law = s.law();
        assert!((law.alpha() - 0.4).abs() < 1e-15);
        assert_eq!(law.lambda(), 2.0);
        assert_eq!(law.nu(), 1.0);
    }
}
