use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renewal::{DowntimeDist, RenewalDist, RenewalSpec};

/// Primitives of one customer class in the n-th system.
#[derive(Clone, Debug)]
pub struct ClassParams {
    /// Arrival rate `λⁿ_i`.
    pub arrival_rate: f64,
    /// Service rate `μⁿ_i`.
    pub service_rate: f64,
    /// Abandonment rate `γⁿ_i`.
    pub abandonment_rate: f64,
    /// Unit-mean interarrival law; interarrival times are `G/λⁿ_i`.
    pub interarrival: RenewalDist,
}

/// Up–down environment: exponential up periods, scaled downtimes.
#[derive(Clone, Debug)]
pub struct EnvironmentParams {
    /// Rate `β_uⁿ` of the exponential up periods.
    pub up_rate: f64,
    pub downtime: DowntimeDist,
}

/// Limits of the scaled primitives.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitData {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Traffic shares `λ_i/μ_i`.
    pub rho: Vec<f64>,
    /// Drift offsets `lim (λⁿ_i - nμⁿ_iρ_i)/√n`.
    pub ell: Vec<f64>,
    /// Limit up-period rate.
    pub beta: f64,
    /// Limit of `θⁿ/√n`.
    pub theta: f64,
    /// Squared coefficients of variation of the interarrival laws.
    pub scv: Vec<f64>,
}

/// Everything that defines the n-th system.
#[derive(Clone, Debug)]
pub struct SystemParams {
    pub n: u64,
    pub classes: Vec<ClassParams>,
    pub environment: Option<EnvironmentParams>,
    pub limit: LimitData,
}

impl SystemParams {
    /// Builds and validates a system from explicit pre-limit rates.
    pub fn new(
        n: u64,
        classes: Vec<ClassParams>,
        environment: Option<EnvironmentParams>,
        limit: LimitData,
    ) -> Result<Self> {
        let p = SystemParams {
            n,
            classes,
            environment,
            limit,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn d(&self) -> usize {
        self.classes.len()
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// Lists every violated structural constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let d = self.d();
        let lim = &self.limit;
        if self.n == 0 {
            v.push("server count n must be positive".into());
        }
        if d == 0 {
            v.push("at least one class is required".into());
            return v;
        }
        for (name, len) in [
            ("lambda", lim.lambda.len()),
            ("mu", lim.mu.len()),
            ("gamma", lim.gamma.len()),
            ("rho", lim.rho.len()),
            ("ell", lim.ell.len()),
            ("scv", lim.scv.len()),
        ] {
            if len != d {
                v.push(format!("limit {name} has {len} entries for {d} classes"));
            }
        }
        if !v.is_empty() {
            return v;
        }
        let total: f64 = lim.rho.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            v.push(format!("traffic shares must sum to 1, got {total}"));
        }
        for i in 0..d {
            let c = &self.classes[i];
            if !(lim.lambda[i] > 0.0) {
                v.push(format!("class {}: limit arrival rate must be positive", i + 1));
            }
            if !(lim.mu[i] > 0.0) {
                v.push(format!("class {}: limit service rate must be positive", i + 1));
            }
            if !(lim.gamma[i] >= 0.0) {
                v.push(format!("class {}: abandonment rate must be nonnegative", i + 1));
            }
            if d > 1 && !(lim.rho[i] < 1.0) {
                v.push(format!("class {}: traffic share must be below 1", i + 1));
            }
            if !(c.arrival_rate >= 0.0 && c.arrival_rate.is_finite()) {
                v.push(format!("class {}: arrival rate must be finite and nonnegative", i + 1));
            }
            if !(c.service_rate > 0.0 && c.service_rate.is_finite()) {
                v.push(format!("class {}: service rate must be positive", i + 1));
            }
            if !(c.abandonment_rate >= 0.0 && c.abandonment_rate.is_finite()) {
                v.push(format!("class {}: abandonment rate must be nonnegative", i + 1));
            }
        }
        if !(self.classes[d - 1].abandonment_rate > 0.0) {
            v.push(format!(
                "class {d} (the last class) must have a positive abandonment rate"
            ));
        }
        if let Some(env) = &self.environment {
            if !(env.up_rate > 0.0 && env.up_rate.is_finite()) {
                v.push("environment up rate must be positive".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// `ℓⁿ_i = (λⁿ_i - nμⁿ_iρ_i)/√n`.
    pub fn ell_n(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.classes
            .iter()
            .zip(&self.limit.rho)
            .map(|(c, r)| (c.arrival_rate - n * c.service_rate * r) / n.sqrt())
            .collect()
    }

    /// Load diagnostic `√n (1 - Σ_i λⁿ_i/(nμⁿ_i))`.
    pub fn load_diagnostic(&self) -> f64 {
        let n = self.n as f64;
        let load: f64 = self.classes.iter().map(|c| c.arrival_rate / (n * c.service_rate)).sum();
        n.sqrt() * (1.0 - load)
    }

    /// `θⁿ/√n`, or `None` without interruptions.
    pub fn theta_ratio(&self) -> Option<f64> {
        self.environment.as_ref().map(|e| e.downtime.theta_n / self.sqrt_n())
    }

    /// Stationary probability of the down phase.
    pub fn down_fraction(&self) -> f64 {
        match &self.environment {
            None => 0.0,
            Some(e) => {
                let down = e.downtime.mean();
                down / (1.0 / e.up_rate + down)
            }
        }
    }

    /// Classes with zero limit abandonment rate, in increasing order.
    pub fn zero_abandonment_classes(&self) -> Vec<usize> {
        (0..self.d()).filter(|&i| self.limit.gamma[i] == 0.0).collect()
    }
}

/// One class in Halfin–Whitt form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    #[serde(default)]
    pub lambda_hat: f64,
    #[serde(default)]
    pub mu_hat: f64,
    #[serde(default)]
    pub interarrival: RenewalSpec,
}

/// Environment in Halfin–Whitt form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    /// Up-period rate.
    pub beta: f64,
    /// Downtime scale; the n-th system uses `θ√n`.
    pub theta: f64,
    #[serde(default)]
    pub downtime: RenewalSpec,
}

/// A family of systems indexed by n:
/// `λⁿ = nλ + √n λ̂`, `μⁿ = μ + μ̂/√n`, `γⁿ = γ`, `β_uⁿ = β`, `θⁿ = θ√n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfinWhittSpec {
    pub classes: Vec<ClassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSpec>,
}

impl HalfinWhittSpec {
    /// Classes `(λ, μ, γ)` with Poisson arrivals and no rate corrections.
    pub fn poisson(rates: &[(f64, f64, f64)]) -> Self {
        HalfinWhittSpec {
            classes: rates
                .iter()
                .map(|&(lambda, mu, gamma)| ClassSpec {
                    lambda,
                    mu,
                    gamma,
                    lambda_hat: 0.0,
                    mu_hat: 0.0,
                    interarrival: RenewalSpec::default(),
                })
                .collect(),
            environment: None,
        }
    }

    pub fn with_environment(mut self, beta: f64, theta: f64, downtime: RenewalSpec) -> Self {
        self.environment = Some(EnvironmentSpec { beta, theta, downtime });
        self
    }

    pub fn d(&self) -> usize {
        self.classes.len()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.lambda / c.mu).collect()
    }

    /// Limit drift offsets `ℓ_i = λ̂_i - ρ_i μ̂_i`.
    pub fn ell(&self) -> Vec<f64> {
        self.classes
            .iter()
            .map(|c| c.lambda_hat - c.lambda / c.mu * c.mu_hat)
            .collect()
    }

    pub fn limit_data(&self) -> Result<LimitData> {
        let scv = self
            .classes
            .iter()
            .map(|c| Ok(c.interarrival.build()?.scv()))
            .collect::<Result<Vec<_>>>()?;
        let (beta, theta) = match &self.environment {
            Some(e) => (e.beta, e.theta),
            None => (0.0, 1.0),
        };
        Ok(LimitData {
            lambda: self.classes.iter().map(|c| c.lambda).collect(),
            mu: self.classes.iter().map(|c| c.mu).collect(),
            gamma: self.classes.iter().map(|c| c.gamma).collect(),
            rho: self.rho(),
            ell: self.ell(),
            beta,
            theta,
            scv,
        })
    }

    /// The n-th system of the family.
    pub fn at(&self, n: u64) -> Result<SystemParams> {
        let nf = n as f64;
        let sn = nf.sqrt();
        let classes = self
            .classes
            .iter()
            .map(|c| {
                Ok(ClassParams {
                    arrival_rate: (nf * c.lambda + sn * c.lambda_hat).max(0.0),
                    service_rate: c.mu + c.mu_hat / sn,
                    abandonment_rate: c.gamma,
                    interarrival: c.interarrival.build()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let environment = match &self.environment {
            None => None,
            Some(e) => {
                if !(e.theta > 0.0) {
                    return Err(Error::Validation(vec!["environment theta must be positive".into()]));
                }
                Some(EnvironmentParams {
                    up_rate: e.beta,
                    downtime: DowntimeDist::new(e.downtime.build()?, e.theta * sn)?,
                })
            }
        };
        SystemParams::new(n, classes, environment, self.limit_data()?)
    }
}

/// Scaling diagnostics for one member of a sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: u64,
    pub ell_n: Vec<f64>,
    pub load_diagnostic: f64,
    pub theta_ratio: Option<f64>,
}

/// Report on whether a sequence of systems is in the Halfin–Whitt regime.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub ell_converging: bool,
    pub load_converging: bool,
    pub theta_converging: bool,
    pub flags: Vec<String>,
}

impl ScalingReport {
    pub fn accepted(&self) -> bool {
        self.flags.is_empty()
    }
}

/// A scalar sequence is taken as convergent when its last increment is
/// small in absolute terms or relative to the first increment.
fn converging(values: &[f64]) -> bool {
    if values.len() < 2 {
        return values.iter().all(|v| v.is_finite());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let k = values.len();
    let last = (values[k - 1] - values[k - 2]).abs();
    let first = (values[1] - values[0]).abs();
    let scale = 1.0 + values[k - 1].abs();
    last <= 0.05 * scale || (k > 2 && last < 0.75 * first && last <= 0.5 * scale)
}

/// Tabulates `ℓⁿ`, the load diagnostic and `θⁿ/√n` over a sequence sorted
/// by n and flags quantities that do not settle.
pub fn validate_halfin_whitt(sequence: &[SystemParams]) -> ScalingReport {
    let mut seq: Vec<&SystemParams> = sequence.iter().collect();
    seq.sort_by_key(|p| p.n);
    let rows: Vec<ScalingRow> = seq
        .iter()
        .map(|p| ScalingRow {
            n: p.n,
            ell_n: p.ell_n(),
            load_diagnostic: p.load_diagnostic(),
            theta_ratio: p.theta_ratio(),
        })
        .collect();
    let mut flags = Vec::new();
    let d = seq.first().map(|p| p.d()).unwrap_or(0);
    let mut ell_converging = true;
    for i in 0..d {
        let vals: Vec<f64> = rows.iter().map(|r| r.ell_n[i]).collect();
        if !converging(&vals) {
            ell_converging = false;
            flags.push(format!(
                "class {}: drift offset does not converge ({:?}); not critically loaded",
                i + 1,
                vals
            ));
        }
    }
    let loads: Vec<f64> = rows.iter().map(|r| r.load_diagnostic).collect();
    let load_converging = converging(&loads);
    if !load_converging {
        flags.push(format!("load diagnostic does not converge ({loads:?})"));
    }
    let thetas: Vec<f64> = rows.iter().filter_map(|r| r.theta_ratio).collect();
    let theta_converging = converging(&thetas) && thetas.iter().all(|t| *t > 0.0);
    if !theta_converging {
        flags.push(format!("downtime scale ratio does not converge ({thetas:?})"));
    }
    ScalingReport {
        rows,
        ell_converging,
        load_converging,
        theta_converging,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> HalfinWhittSpec {
        HalfinWhittSpec::poisson(&[(0.5, 1.0, 0.5), (1.0, 2.0, 1.0)])
    }

    #[test]
    fn family_member_rates() {
        let mut spec = two_class();
        spec.classes[0].lambda_hat = 1.0;
        spec.classes[0].mu_hat = -2.0;
        let p = spec.at(400).unwrap();
        assert_eq!(p.classes[0].arrival_rate, 200.0 + 20.0);
        assert_eq!(p.classes[0].service_rate, 1.0 - 0.1);
        // ℓ = λ̂ - ρ μ̂ = 1 + 0.5·2.
        assert!((p.limit.ell[0] - 2.0).abs() < 1e-15);
        assert!((p.ell_n()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_shares_rejected() {
        let spec = HalfinWhittSpec::poisson(&[(0.4, 1.0, 0.5), (1.0, 2.0, 1.0)]);
        let err = spec.at(100).unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.iter().any(|m| m.contains("sum to 1"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn last_class_needs_abandonment() {
        let spec = HalfinWhittSpec::poisson(&[(0.5, 1.0, 0.5), (1.0, 2.0, 0.0)]);
        assert!(spec.at(100).is_err());
    }

    #[test]
    fn scaling_report_accepts_family_and_flags_constant_rate() {
        let spec = two_class().with_environment(1.0, 1.0, RenewalSpec::default());
        let seq: Vec<_> = [100, 400, 1600, 6400].iter().map(|&n| spec.at(n).unwrap()).collect();
        let report = validate_halfin_whitt(&seq);
        assert!(report.accepted(), "{:?}", report.flags);
        for r in &report.rows {
            assert!((r.theta_ratio.unwrap() - 1.0).abs() < 1e-12);
        }

        let fixed: Vec<_> = seq
            .iter()
            .map(|p| {
                let mut q = p.clone();
                for c in &mut q.classes {
                    c.arrival_rate = 1.0;
                }
                q
            })
            .collect();
        let report = validate_halfin_whitt(&fixed);
        assert!(!report.ell_converging);
        assert!(!report.accepted());
    }
}
