//! Interarrival and downtime distributions, hazard rates, residual-life
//! functionals and the equilibrium-type kernels built from them.
//!
//! Every [`RenewalDist`] has mean 1. Arrival processes with rate `λ` use
//! interarrival times `G/λ`; a [`DowntimeDist`] scales its base law by
//! `1/θ`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::ln_gamma;

/// Default threshold for the mean-residual-life bound check.
pub const DEFAULT_MRL_BOUND: f64 = 100.0;

/// A user-supplied lifetime law. Its mean does not need to be 1; the
/// wrapping [`RenewalDist`] rescales it.
pub trait CustomLaw: Send + Sync + fmt::Debug {
    fn cdf(&self, t: f64) -> f64;
    /// Right derivative of the cdf.
    fn density(&self, t: f64) -> f64;
    /// `∫_t^∞ (1 - F(y)) dy`.
    fn tail_integral(&self, t: f64) -> f64;
    /// Supremum of the orders `p` with a finite `p`-th moment.
    fn moment_order(&self) -> f64 {
        f64::INFINITY
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Exponential { rate: f64 },
    Erlang { k: u32, rate: f64 },
    HyperExponential { probs: Vec<f64>, rates: Vec<f64> },
    Custom { law: Arc<dyn CustomLaw>, scale: f64 },
}

/// A lifetime law with mean 1.
#[derive(Clone, Debug)]
pub struct RenewalDist {
    kind: Kind,
    scv: f64,
}

/// Terms `y^j/j!` of the Erlang survival polynomial, divided by a common
/// reference term whose logarithm is returned alongside.
fn erlang_terms(k: u32, y: f64) -> (Vec<f64>, f64) {
    let k = k as usize;
    let mut terms = vec![0.0; k];
    if y < 1.0 {
        terms[0] = 1.0;
        for j in 1..k {
            terms[j] = terms[j - 1] * y / j as f64;
        }
        (terms, 0.0)
    } else {
        terms[k - 1] = 1.0;
        for j in (1..k).rev() {
            terms[j - 1] = terms[j] * j as f64 / y;
        }
        let log_ref = (k - 1) as f64 * y.ln() - ln_gamma(k as f64);
        (terms, log_ref)
    }
}

/// Component weights `p_j e^{-(r_j - r_min) t}` of a hyperexponential
/// survival function, with `r_min` returned alongside.
fn hyper_weights(probs: &[f64], rates: &[f64], t: f64) -> (Vec<f64>, f64) {
    let rmin = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let w = probs
        .iter()
        .zip(rates)
        .map(|(p, r)| p * (-(r - rmin) * t).exp())
        .collect();
    (w, rmin)
}

impl RenewalDist {
    /// Exponential law with mean 1.
    pub fn exponential() -> Self {
        RenewalDist {
            kind: Kind::Exponential { rate: 1.0 },
            scv: 1.0,
        }
    }

    /// Erlang law with `k` phases and mean 1.
    pub fn erlang(k: u32) -> Result<Self> {
        if k == 0 || k > 150 {
            return Err(Error::Domain(format!("erlang phase count {k} outside 1..=150")));
        }
        if k == 1 {
            return Ok(Self::exponential());
        }
        Ok(RenewalDist {
            kind: Kind::Erlang { k, rate: k as f64 },
            scv: 1.0 / k as f64,
        })
    }

    /// Mixture of exponentials, rescaled to mean 1.
    pub fn hyperexponential(probs: &[f64], rates: &[f64]) -> Result<Self> {
        if probs.len() != rates.len() || probs.is_empty() {
            return Err(Error::Domain(
                "hyperexponential needs equally many probabilities and rates".into(),
            ));
        }
        if probs.iter().any(|p| !(*p > 0.0)) || rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain(
                "hyperexponential probabilities and rates must be positive".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "hyperexponential probabilities sum to {total}, not 1"
            )));
        }
        let mean: f64 = probs.iter().zip(rates).map(|(p, r)| p / r).sum();
        if (mean - 1.0).abs() > 1e-12 {
            log::info!("hyperexponential law rescaled by {mean} to unit mean");
        }
        let rates: Vec<f64> = rates.iter().map(|r| r * mean).collect();
        let second: f64 = probs.iter().zip(&rates).map(|(p, r)| 2.0 * p / (r * r)).sum();
        Ok(RenewalDist {
            kind: Kind::HyperExponential {
                probs: probs.to_vec(),
                rates,
            },
            scv: second - 1.0,
        })
    }

    /// Two-phase hyperexponential with the requested squared coefficient of
    /// variation. Uses equal branch probabilities when `scv < 3` and
    /// balanced means otherwise.
    pub fn hyperexponential_scv(scv: f64) -> Result<Self> {
        if !(scv > 1.0 && scv.is_finite()) {
            return Err(Error::Domain(format!("hyperexponential scv must exceed 1, got {scv}")));
        }
        if scv < 3.0 {
            let d = ((scv - 1.0) / 2.0).sqrt();
            Self::hyperexponential(&[0.5, 0.5], &[1.0 / (1.0 + d), 1.0 / (1.0 - d)])
        } else {
            let p = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
            Self::hyperexponential(&[p, 1.0 - p], &[2.0 * p, 2.0 * (1.0 - p)])
        }
    }

    /// Wraps a user-supplied law, rescaling it to mean 1.
    pub fn custom(law: Arc<dyn CustomLaw>) -> Result<Self> {
        let mean = law.tail_integral(0.0);
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Domain(format!("custom law has invalid mean {mean}")));
        }
        if law.cdf(0.0) != 0.0 {
            return Err(Error::Domain("custom law must satisfy F(0) = 0".into()));
        }
        if (mean - 1.0).abs() > 1e-12 {
            log::info!("custom law rescaled by {mean} to unit mean");
        }
        let mut dist = RenewalDist {
            kind: Kind::Custom { law, scale: mean },
            scv: f64::NAN,
        };
        dist.scv = 2.0 * dist.second_tail(0.0)? - 1.0;
        Ok(dist)
    }

    pub fn mean(&self) -> f64 {
        1.0
    }

    /// Squared coefficient of variation.
    pub fn scv(&self) -> f64 {
        self.scv
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.kind, Kind::Exponential { .. })
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Exponential { .. } => "exponential".into(),
            Kind::Erlang { k, .. } => format!("erlang({k})"),
            Kind::HyperExponential { probs, .. } => format!("hyperexponential({} phases)", probs.len()),
            Kind::Custom { law, .. } => format!("custom({law:?})"),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Custom { law, scale } => law.cdf(scale * t),
            _ => -self.log_survival(t).exp_m1(),
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Custom { law, scale } => 1.0 - law.cdf(scale * t.max(0.0)),
            _ => self.log_survival(t).exp(),
        }
    }

    /// `ln(1 - F(t))`, computed without cancellation for the built-in kinds.
    pub fn log_survival(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            Kind::Exponential { rate } => -rate * t,
            Kind::Erlang { k, rate } => {
                let y = rate * t;
                let (terms, log_ref) = erlang_terms(*k, y);
                -y + log_ref + terms.iter().sum::<f64>().ln()
            }
            Kind::HyperExponential { probs, rates } => {
                let (w, rmin) = hyper_weights(probs, rates, t);
                -rmin * t + w.iter().sum::<f64>().ln()
            }
            Kind::Custom { law, scale } => (1.0 - law.cdf(scale * t)).ln(),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Exponential { rate } => rate * (-rate * t).exp(),
            Kind::Erlang { k, rate } => {
                let y = rate * t;
                if y == 0.0 {
                    return 0.0;
                }
                rate * ((*k as f64 - 1.0) * y.ln() - y - ln_gamma(*k as f64)).exp()
            }
            Kind::HyperExponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p * r * (-r * t).exp()).sum()
            }
            Kind::Custom { law, scale } => scale * law.density(scale * t),
        }
    }

    fn require_survival(&self, t: f64) -> Result<()> {
        if self.log_survival(t) == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("survival function vanishes at {t}")));
        }
        Ok(())
    }

    /// Hazard rate `F'(t)/(1 - F(t))`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        let t = t.max(0.0);
        Ok(match &self.kind {
            Kind::Exponential { rate } => *rate,
            Kind::Erlang { k, rate } => {
                let (terms, _) = erlang_terms(*k, rate * t);
                rate * terms[*k as usize - 1] / terms.iter().sum::<f64>()
            }
            Kind::HyperExponential { probs, rates } => {
                let (w, _) = hyper_weights(probs, rates, t);
                w.iter().zip(rates).map(|(w, r)| w * r).sum::<f64>() / w.iter().sum::<f64>()
            }
            Kind::Custom { .. } => {
                self.require_survival(t)?;
                self.density(t) / self.survival(t)
            }
        })
    }

    /// `∫_t^∞ (1 - F(y)) dy`.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        match &self.kind {
            Kind::Custom { law, scale } => Ok(law.tail_integral(scale * t.max(0.0)) / scale),
            _ => Ok(self.mrl(t)? * self.survival(t)),
        }
    }

    /// `∫_t^∞ ∫_s^∞ (1 - F(y)) dy ds`.
    pub fn second_tail(&self, t: f64) -> Result<f64> {
        match &self.kind {
            Kind::Custom { law, scale } => {
                let scale = *scale;
                let law = law.clone();
                quad::integrate_to_infinity(move |y| law.tail_integral(scale * y) / scale, t.max(0.0), 1e-10, 1e-300)
            }
            _ => Ok(self.sor(t)? * self.survival(t)),
        }
    }

    /// Mean residual life `∫_t^∞ (1 - F) / (1 - F(t))`.
    pub fn mrl(&self, t: f64) -> Result<f64> {
        let t = t.max(0.0);
        Ok(match &self.kind {
            Kind::Exponential { rate } => 1.0 / rate,
            Kind::Erlang { k, rate } => {
                let (terms, _) = erlang_terms(*k, rate * t);
                let num: f64 = terms
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (*k as usize - i) as f64 * v)
                    .sum();
                num / (rate * terms.iter().sum::<f64>())
            }
            Kind::HyperExponential { probs, rates } => {
                let (w, _) = hyper_weights(probs, rates, t);
                w.iter().zip(rates).map(|(w, r)| w / r).sum::<f64>() / w.iter().sum::<f64>()
            }
            Kind::Custom { .. } => {
                self.require_survival(t)?;
                self.tail_integral(t)? / self.survival(t)
            }
        })
    }

    /// Second-order residual life `∫_t^∞∫_s^∞ (1 - F) / (1 - F(t))`.
    pub fn sor(&self, t: f64) -> Result<f64> {
        let t = t.max(0.0);
        Ok(match &self.kind {
            Kind::Exponential { rate } => 1.0 / (rate * rate),
            Kind::Erlang { k, rate } => {
                let (terms, _) = erlang_terms(*k, rate * t);
                let k = *k as usize;
                let num: f64 = terms
                    .iter()
                    .enumerate()
                    .map(|(l, v)| ((k - l) * (k - l + 1)) as f64 * 0.5 * v)
                    .sum();
                num / (rate * rate * terms.iter().sum::<f64>())
            }
            Kind::HyperExponential { probs, rates } => {
                let (w, _) = hyper_weights(probs, rates, t);
                w.iter().zip(rates).map(|(w, r)| w / (r * r)).sum::<f64>() / w.iter().sum::<f64>()
            }
            Kind::Custom { .. } => {
                self.require_survival(t)?;
                self.second_tail(t)? / self.survival(t)
            }
        })
    }

    /// `E[G^p]`, infinite when the law lacks that moment.
    pub fn moment(&self, p: f64) -> Result<f64> {
        Ok(match &self.kind {
            Kind::Exponential { rate } => (ln_gamma(p + 1.0) - p * rate.ln()).exp(),
            Kind::Erlang { k, rate } => (ln_gamma(*k as f64 + p) - ln_gamma(*k as f64) - p * rate.ln()).exp(),
            Kind::HyperExponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(q, r)| q * (ln_gamma(p + 1.0) - p * r.ln()).exp())
                .sum(),
            Kind::Custom { law, .. } => {
                if p >= law.moment_order() {
                    return Ok(f64::INFINITY);
                }
                quad::integrate_to_infinity(|t| p * t.powf(p - 1.0) * self.survival(t), 0.0, 1e-9, 1e-300)?
            }
        })
    }

    /// One draw of `G`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Kind::Erlang { k, rate } => Gamma::new(*k as f64, 1.0 / rate)
                .expect("erlang parameters validated at construction")
                .sample(rng),
            Kind::HyperExponential { probs, rates } => {
                let mut u: f64 = rng.random();
                let mut branch = probs.len() - 1;
                for (j, p) in probs.iter().enumerate() {
                    if u < *p {
                        branch = j;
                        break;
                    }
                    u -= p;
                }
                let e: f64 = Exp1.sample(rng);
                e / rates[branch]
            }
            Kind::Custom { .. } => {
                let u: f64 = rng.random();
                self.invert_log_survival(0.0, (1.0 - u).ln())
            }
        }
    }

    /// One draw of `G - a` conditional on `G > a` (the residual life at
    /// age `a`).
    pub fn sample_residual<R: Rng + ?Sized>(&self, rng: &mut R, age: f64) -> f64 {
        if age <= 0.0 {
            return self.sample(rng);
        }
        if let Kind::Exponential { rate } = self.kind {
            let e: f64 = Exp1.sample(rng);
            return e / rate;
        }
        let u: f64 = rng.random();
        let target = self.log_survival(age) + (1.0 - u).ln();
        self.invert_log_survival(age, target) - age
    }

    /// Smallest `t ≥ lo` with `ln S(t) ≤ target`, by bracketing and bisection.
    fn invert_log_survival(&self, lo: f64, target: f64) -> f64 {
        let mut a = lo;
        let mut step = 1.0;
        let mut b = lo + step;
        while self.log_survival(b) > target {
            a = b;
            step *= 2.0;
            b = lo + step;
            if step > 1e12 {
                return b;
            }
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.log_survival(m) > target {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Downtime law `d₁/θⁿ` with `E[d₁] = 1`.
#[derive(Clone, Debug)]
pub struct DowntimeDist {
    pub base: RenewalDist,
    pub theta_n: f64,
}

impl DowntimeDist {
    pub fn new(base: RenewalDist, theta_n: f64) -> Result<Self> {
        if !(theta_n > 0.0 && theta_n.is_finite()) {
            return Err(Error::Domain(format!("downtime scale must be positive, got {theta_n}")));
        }
        Ok(DowntimeDist { base, theta_n })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base.sample(rng) / self.theta_n
    }

    pub fn sample_residual<R: Rng + ?Sized>(&self, rng: &mut R, age: f64) -> f64 {
        self.base.sample_residual(rng, self.theta_n * age) / self.theta_n
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.theta_n
    }
}

/// `λ F'(λh) / (1 - F(λh))`.
pub fn hazard_scaled(dist: &RenewalDist, rate: f64, h: f64) -> Result<f64> {
    check_age(h)?;
    Ok(rate * dist.hazard(rate * h)?)
}

/// `1 - MRL(λh)`: zero at `h = 0` and identically zero for exponential laws.
pub fn eta(dist: &RenewalDist, rate: f64, h: f64) -> Result<f64> {
    check_age(h)?;
    Ok(1.0 - dist.mrl(rate * h)?)
}

/// Second-order residual life minus `(c²+1)/2` times the first-order one,
/// both evaluated at `λh`.
pub fn kappa(dist: &RenewalDist, rate: f64, h: f64) -> Result<f64> {
    check_age(h)?;
    let t = rate * h;
    Ok(dist.sor(t)? - 0.5 * (dist.scv() + 1.0) * dist.mrl(t)?)
}

/// `1 - MRL_{d₁}(θⁿk)` for the downtime law.
pub fn upalpha(dist: &DowntimeDist, k: f64) -> Result<f64> {
    check_age(k)?;
    Ok(1.0 - dist.base.mrl(dist.theta_n * k)?)
}

/// Hazard rate of the scaled downtime `d₁/θⁿ` at age `k`.
pub fn downtime_hazard(dist: &DowntimeDist, k: f64) -> Result<f64> {
    hazard_scaled(&dist.base, dist.theta_n, k)
}

/// Mean residual life at `t`.
pub fn mrl(dist: &RenewalDist, t: f64) -> Result<f64> {
    check_age(t)?;
    dist.mrl(t)
}

fn check_age(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("age must be finite and nonnegative, got {h}")))
    }
}

/// Maximal residuals of the three kernel identities over an age grid.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityResiduals {
    pub eta: f64,
    pub kappa: f64,
    pub upalpha: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.eta.max(self.kappa).max(self.upalpha)
    }
}

/// Derivative of `f` at `h ≥ 0`: central differences when `h` exceeds the
/// step, otherwise a second-order one-sided formula.
fn derivative(f: impl Fn(f64) -> Result<f64>, h: f64, step: f64) -> Result<f64> {
    if h >= step {
        Ok((f(h + step)? - f(h - step)?) / (2.0 * step))
    } else {
        Ok((-3.0 * f(h)? + 4.0 * f(h + step)? - f(h + 2.0 * step)?) / (2.0 * step))
    }
}

/// Residuals of
/// `η' - η r = λ - r`,
/// `κ' - r κ = (η + (c²-1)/2) λ` and
/// `ᾱ' - β_d ᾱ = θ - β_d`
/// on `grid`, with derivatives from finite differences of step
/// `1e-6·max(h, 1/rate)`. The downtime identity uses `dist` scaled by `rate`.
pub fn identity_residuals(dist: &RenewalDist, rate: f64, grid: &[f64]) -> Result<IdentityResiduals> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!("rate must be positive, got {rate}")));
    }
    let down = DowntimeDist::new(dist.clone(), rate)?;
    let c2 = dist.scv();
    let mut out = IdentityResiduals::default();
    for &h in grid {
        check_age(h)?;
        let step = 1e-6 * h.max(1.0 / rate);
        let r = hazard_scaled(dist, rate, h)?;
        let e = eta(dist, rate, h)?;
        let k = kappa(dist, rate, h)?;
        let de = derivative(|s| eta(dist, rate, s), h, step)?;
        let dk = derivative(|s| kappa(dist, rate, s), h, step)?;
        out.eta = out.eta.max((de - e * r - (rate - r)).abs());
        out.kappa = out.kappa.max((dk - r * k - (e + 0.5 * (c2 - 1.0)) * rate).abs());
        let a = upalpha(&down, h)?;
        let bd = downtime_hazard(&down, h)?;
        let da = derivative(|s| upalpha(&down, s), h, step)?;
        out.upalpha = out.upalpha.max((da - bd * a - (rate - bd)).abs());
    }
    Ok(out)
}

/// Largest of the three identity residuals on `grid`.
pub fn check_identities(dist: &RenewalDist, rate: f64, grid: &[f64]) -> Result<f64> {
    Ok(identity_residuals(dist, rate, grid)?.max())
}

/// Outcome of the mean-residual-life bound check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MrlReport {
    pub sup: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Supremum of the mean residual life on a probe grid over `[0, 50]`
/// compared with `bound`; exceeding it logs a warning.
pub fn mrl_bound_check(dist: &RenewalDist, bound: f64) -> Result<MrlReport> {
    let mut sup: f64 = 0.0;
    for i in 0..=500 {
        sup = sup.max(dist.mrl(0.1 * i as f64)?);
    }
    let within_bound = sup <= bound;
    if !within_bound {
        log::warn!(
            "{}: mean residual life reaches {sup:.3}, above the bound {bound}",
            dist.name()
        );
    }
    Ok(MrlReport {
        sup,
        bound,
        within_bound,
    })
}

/// Distribution as written in a configuration file. Parameters describe the
/// shape; the result is always rescaled to mean 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RenewalSpec {
    Exponential {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
    },
    Erlang {
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
    },
    Hyperexponential {
        probs: Vec<f64>,
        rates: Vec<f64>,
    },
    HyperexponentialScv {
        scv: f64,
    },
    Deterministic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<f64>,
    },
}

impl Default for RenewalSpec {
    fn default() -> Self {
        RenewalSpec::Exponential { rate: None }
    }
}

impl RenewalSpec {
    pub fn build(&self) -> Result<RenewalDist> {
        let scale_note = |rate: &Option<f64>, mean: f64| {
            if let Some(r) = rate {
                if (mean / r - 1.0).abs() > 1e-12 {
                    log::info!("distribution with mean {} rescaled to unit mean", mean / r);
                }
            }
        };
        match self {
            RenewalSpec::Exponential { rate } => {
                check_rate(rate)?;
                scale_note(rate, 1.0);
                Ok(RenewalDist::exponential())
            }
            RenewalSpec::Erlang { k, rate } => {
                check_rate(rate)?;
                scale_note(rate, *k as f64);
                RenewalDist::erlang(*k).map_err(|e| Error::config("k", e.to_string()))
            }
            RenewalSpec::Hyperexponential { probs, rates } => {
                RenewalDist::hyperexponential(probs, rates).map_err(|e| Error::config("probs", e.to_string()))
            }
            RenewalSpec::HyperexponentialScv { scv } => {
                RenewalDist::hyperexponential_scv(*scv).map_err(|e| Error::config("scv", e.to_string()))
            }
            RenewalSpec::Deterministic { .. } => Err(Error::config(
                "kind",
                "deterministic laws are not supported: their hazard rate is undefined",
            )),
        }
    }
}

fn check_rate(rate: &Option<f64>) -> Result<()> {
    match rate {
        Some(r) if !(*r > 0.0 && r.is_finite()) => Err(Error::config("rate", format!("must be positive, got {r}"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn exponential_kernels_vanish() {
        let g = RenewalDist::exponential();
        close(hazard_scaled(&g, 3.0, 0.7).unwrap(), 3.0, 1e-15);
        for h in [0.0, 0.3, 4.0, 40.0] {
            close(eta(&g, 2.5, h).unwrap(), 0.0, 1e-15);
            close(kappa(&g, 2.5, h).unwrap(), 0.0, 1e-15);
        }
        close(mrl(&g, 5.0).unwrap(), 1.0, 1e-15);
        let down = DowntimeDist::new(g, 4.0).unwrap();
        close(upalpha(&down, 0.8).unwrap(), 0.0, 1e-15);
    }

    #[test]
    fn erlang2_closed_forms() {
        let g = RenewalDist::erlang(2).unwrap();
        close(g.scv(), 0.5, 1e-15);
        close(hazard_scaled(&g, 1.0, 0.5).unwrap(), 1.0, 1e-14);
        close(hazard_scaled(&g, 1.0, 0.0).unwrap(), 0.0, 1e-15);
        close(eta(&g, 1.0, 0.5).unwrap(), 0.25, 1e-14);
        close(kappa(&g, 1.0, 0.5).unwrap(), -0.0625, 1e-14);
        close(mrl(&g, 0.0).unwrap(), 1.0, 1e-15);
        close(mrl(&g, 1.0).unwrap(), 2.0 / 3.0, 1e-14);
        let down = DowntimeDist::new(g.clone(), 1.0).unwrap();
        close(upalpha(&down, 0.5).unwrap(), 0.25, 1e-14);
        close(upalpha(&down, 0.0).unwrap(), 0.0, 1e-15);
        // Far in the tail the ratio forms stay finite.
        close(mrl(&g, 1e4).unwrap(), (1.0 + 1e4) / (1.0 + 2e4), 1e-12);
    }

    #[test]
    fn kernels_vanish_at_zero_age() {
        for g in [
            RenewalDist::erlang(3).unwrap(),
            RenewalDist::hyperexponential_scv(2.0).unwrap(),
            RenewalDist::hyperexponential_scv(5.0).unwrap(),
        ] {
            close(eta(&g, 1.7, 0.0).unwrap(), 0.0, 1e-13);
            close(kappa(&g, 1.7, 0.0).unwrap(), 0.0, 1e-13);
        }
    }

    #[test]
    fn hyperexponential_moments() {
        let g = RenewalDist::hyperexponential_scv(2.0).unwrap();
        close(g.scv(), 2.0, 1e-12);
        close(g.moment(1.0).unwrap(), 1.0, 1e-12);
        close(g.moment(2.0).unwrap(), 3.0, 1e-12);
        let g = RenewalDist::hyperexponential(&[0.3, 0.7], &[1.0, 4.0]).unwrap();
        close(g.moment(1.0).unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn identities_hold_for_builtin_kinds() {
        let grid: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let mut with_zero = grid.clone();
        with_zero.insert(0, 0.0);
        for g in [
            RenewalDist::exponential(),
            RenewalDist::erlang(2).unwrap(),
            RenewalDist::erlang(5).unwrap(),
            RenewalDist::hyperexponential_scv(2.0).unwrap(),
        ] {
            for rate in [0.5, 1.0, 3.0] {
                let r = check_identities(&g, rate, &with_zero).unwrap();
                assert!(r <= 1e-6, "{}: residual {r}", g.name());
            }
        }
    }

    #[test]
    fn deterministic_spec_rejected() {
        let err = RenewalSpec::Deterministic { value: None }.build().unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn spec_round_trip_through_toml() {
        let spec: RenewalSpec = toml::from_str("kind = \"erlang\"\nk = 2\n").unwrap();
        assert_eq!(spec, RenewalSpec::Erlang { k: 2, rate: None });
        let bad: std::result::Result<RenewalSpec, _> = toml::from_str("kind = \"erlang\"\nk = 2\nfoo = 1\n");
        assert!(bad.is_err());
    }

    #[test]
    fn residual_sampling_is_conditional() {
        let g = RenewalDist::erlang(2).unwrap();
        let mut rng = stream(1, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| g.sample_residual(&mut rng, 1.0)).sum::<f64>() / n as f64;
        close(mean, 2.0 / 3.0, 0.01);
    }
}
