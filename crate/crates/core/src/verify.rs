//! Monte Carlo verification: unit-mean martingale tests, weighted-versus-direct
//! law comparisons, explosion probes and closed-form oracles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, Statistic};
use crate::error::{Error, Result};
use crate::intensity::{AlphaFamily, IntensitySpec, ResetOuParams};
use crate::likelihood::{log_weight, Window};
use crate::model::{EventSequence, WeightRecord};
use crate::rng::{par_paths, path_stream, try_par_paths, Purpose};
use crate::simulate::{simulate_aux, simulate_law, simulate_poisson, simulate_reset_ou, OuMode};
use crate::stats::{count_quantile, heavy_tail_flag, variance_with_se, Estimate};

/// Outcome of a two-sided check with a dead band between pass and fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
        }
    }

}

/// One weighted base-law path.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    pub path: EventSequence,
    pub record: WeightRecord,
}

/// Simulates `n_paths` base-law paths on the horizon, pairs each with its
/// auxiliary diffusion and computes its weight on `window`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_sample(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    horizon: f64,
    window: Window,
    n_paths: usize,
    seed: u64,
    event_cap: usize,
    quadrature_step: f64,
    streams: (Purpose, Purpose),
) -> Result<Vec<WeightedPath>> {
    try_par_paths(n_paths, |id| {
        let path = simulate_law(lambda, horizon, event_cap, &mut path_stream(seed, streams.0, id))?;
        let aux = simulate_aux(mu, &path, quadrature_step, &mut path_stream(seed, streams.1, id))?;
        let mut record = log_weight(&path, lambda, mu, aux.as_ref(), window, quadrature_step)?;
        record.path_id = id;
        Ok(WeightedPath { path, record })
    })
}

/// Weighted sample for a scenario, on the scenario's window.
pub fn scenario_sample(config: &ScenarioConfig) -> Result<Vec<WeightedPath>> {
    weighted_sample(
        &config.lambda,
        &config.mu,
        config.horizon,
        config.window(),
        config.n_paths,
        config.seed,
        config.event_cap,
        config.quadrature_step,
        (Purpose::Base, Purpose::Diffusion),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitMeanTest {
    pub estimate: Estimate,
    /// Pass within 3 standard errors of 1, fail beyond 10, inconclusive
    /// between.
    pub outcome: Outcome,
    /// The largest 1% of weights carry more than half of the total; the
    /// standard error is then unreliable and so is the outcome.
    pub stability_flag: bool,
}

pub fn unit_mean_verdict(estimate: &Estimate) -> Outcome {
    let gap = (estimate.mean - 1.0).abs();
    if gap <= 3.0 * estimate.std_error {
        Outcome::Pass
    } else if gap > 10.0 * estimate.std_error {
        Outcome::Fail
    } else {
        Outcome::Inconclusive
    }
}

fn require_paths(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::invalid("n_paths", format!("at least {min} paths required")))
    } else {
        Ok(())
    }
}

/// Mean of the weights `E(H.M)` over base-law paths; a true martingale has
/// mean exactly 1.
pub fn unit_mean_test(config: &ScenarioConfig) -> Result<UnitMeanTest> {
    unit_mean_from(&scenario_sample(config)?, config.n_paths)
}

/// [`unit_mean_test`] on an existing weighted sample.
pub fn unit_mean_from(sample: &[WeightedPath], n_paths: usize) -> Result<UnitMeanTest> {
    require_paths(n_paths, 1000)?;
    let weights: Vec<f64> = sample.iter().map(|w| w.record.weight()).collect();
    let estimate = Estimate::from_samples(&weights);
    Ok(UnitMeanTest {
        outcome: unit_mean_verdict(&estimate),
        estimate,
        stability_flag: heavy_tail_flag(&weights),
    })
}

/// Weighted base-law statistic of the total count against the same statistic
/// under direct simulation of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawComparison {
    pub statistic: Statistic,
    /// Total-variation distance or absolute mean gap.
    pub value: f64,
    /// For the total-variation distance, a conservative bound
    /// `1/2 sum_k sqrt(var_A(k) + var_B(k))` built from per-bucket errors.
    pub combined_se: f64,
    /// Buckets `0..=support_max` plus one tail bucket.
    pub support_max: usize,
    pub weighted: Vec<f64>,
    pub direct: Vec<f64>,
}

/// Compares the base-law paths reweighted to `target` with paths simulated
/// directly under `target`, on the total count at the horizon.
pub fn weighted_law_vs_direct(
    config: &ScenarioConfig,
    target: &IntensitySpec,
    statistic: Statistic,
) -> Result<LawComparison> {
    if !target.directly_simulable() {
        return Err(Error::NotDirectlySimulable(target.family_name().into()));
    }
    let whole = Window::new(0.0, config.horizon)?;
    let sample = weighted_sample(
        &config.lambda,
        target,
        config.horizon,
        whole,
        config.n_paths,
        config.seed,
        config.event_cap,
        config.quadrature_step,
        (Purpose::Base, Purpose::Diffusion),
    )?;
    let direct: Vec<usize> = try_par_paths(config.n_paths, |id| {
        simulate_law(target, config.horizon, config.event_cap, &mut path_stream(config.seed, Purpose::Target, id))
            .map(|p| p.total_count())
    })?;
    let weighted: Vec<(usize, f64)> = sample
        .iter()
        .map(|w| (w.path.total_count(), w.record.weight()))
        .collect();
    Ok(compare_laws(&weighted, &direct, statistic))
}

fn compare_laws(weighted: &[(usize, f64)], direct: &[usize], statistic: Statistic) -> LawComparison {
    let n_a = weighted.len() as f64;
    let n_b = direct.len() as f64;
    match statistic {
        Statistic::MeanCount => {
            let a: Vec<f64> = weighted.iter().map(|&(k, w)| w * k as f64).collect();
            let b: Vec<f64> = direct.iter().map(|&k| k as f64).collect();
            let (ea, eb) = (Estimate::from_samples(&a), Estimate::from_samples(&b));
            LawComparison {
                statistic,
                value: (ea.mean - eb.mean).abs(),
                combined_se: ea.combined_se(&eb),
                support_max: 0,
                weighted: vec![ea.mean],
                direct: vec![eb.mean],
            }
        }
        Statistic::CountMarginal => {
            let pooled: Vec<usize> = weighted.iter().map(|&(k, _)| k).chain(direct.iter().copied()).collect();
            let top = count_quantile(&pooled, 0.999);
            let buckets = top + 2;
            let bucket = |k: usize| k.min(top + 1);
            let mut pa = vec![0.0; buckets];
            let mut sa = vec![0.0; buckets];
            for &(k, w) in weighted {
                pa[bucket(k)] += w;
                sa[bucket(k)] += w * w;
            }
            let mut pb = vec![0.0; buckets];
            for &k in direct {
                pb[bucket(k)] += 1.0;
            }
            let mut tv = 0.0;
            let mut se = 0.0;
            for k in 0..buckets {
                let a = pa[k] / n_a;
                let b = pb[k] / n_b;
                let var_a = (sa[k] / n_a - a * a).max(0.0) / n_a;
                let var_b = b * (1.0 - b) / n_b;
                tv += (a - b).abs();
                se += (var_a + var_b).sqrt();
                pa[k] = a;
                pb[k] = b;
            }
            LawComparison {
                statistic,
                value: 0.5 * tv,
                combined_se: 0.5 * se,
                support_max: top,
                weighted: pa,
                direct: pb,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossProposal {
    pub first: Estimate,
    pub second: Estimate,
    /// Estimates within 3 combined standard errors.
    pub agree: bool,
}

/// Importance-sampling estimates of `E_Q f(N)` from two constant-rate
/// proposals; they must agree whenever both weights are valid.
pub fn cross_proposal_check<F>(
    mu: &IntensitySpec,
    bases: (f64, f64),
    f: F,
    config: &ScenarioConfig,
) -> Result<CrossProposal>
where
    F: Fn(&EventSequence) -> f64 + Sync + Send,
{
    let d = mu.dimension();
    let whole = Window::new(0.0, config.horizon)?;
    let mut estimates = Vec::with_capacity(2);
    for (rate, streams) in [
        (bases.0, (Purpose::Base, Purpose::Diffusion)),
        (bases.1, (Purpose::AltBase, Purpose::AltDiffusion)),
    ] {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid("bases", "base rates must be positive"));
        }
        let base = IntensitySpec::Constant { rates: vec![rate; d] };
        let sample = weighted_sample(
            &base,
            mu,
            config.horizon,
            whole,
            config.n_paths,
            config.seed,
            config.event_cap,
            config.quadrature_step,
            streams,
        )?;
        let values: Vec<f64> = sample.iter().map(|w| w.record.weight() * f(&w.path)).collect();
        estimates.push(Estimate::from_samples(&values));
    }
    let (first, second) = (estimates[0], estimates[1]);
    Ok(CrossProposal {
        agree: (first.mean - second.mean).abs() <= 3.0 * first.combined_se(&second),
        first,
        second,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplosionProbe {
    /// Fraction of sequences with `U_1 + ... + U_cap <= t`.
    pub mass: Estimate,
    /// Same with only the first `cap / 2` holding times.
    pub half_cap_mass: Estimate,
    /// `|mass - half_cap_mass|` within one standard error.
    pub cap_stable: bool,
}

/// Probability that a pure birth process with rates `alpha_n` completes `cap`
/// births by `t`, estimated from independent holding times
/// `U_k ~ Exp(alpha_{k-1})`.
pub fn explosion_probe(alphas: &AlphaFamily, t: f64, n_paths: usize, cap: usize, seed: u64) -> Result<ExplosionProbe> {
    if cap < 10 {
        return Err(Error::invalid("cap", "must be at least 10"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", "must be positive"));
    }
    require_paths(n_paths, 1)?;
    let half = cap / 2;
    let hits: Vec<(f64, f64)> = par_paths(n_paths, |id| {
        let mut rng = path_stream(seed, Purpose::Oracle, id);
        let mut total = 0.0;
        let mut half_hit = 0.0;
        for k in 0..cap {
            let u: f64 = 1.0 - rng.random::<f64>();
            total += -u.ln() / alphas.value(k);
            if total > t {
                break;
            }
            if k + 1 == half {
                half_hit = 1.0;
            }
        }
        (f64::from(u8::from(total <= t)), half_hit)
    });
    let full: Vec<f64> = hits.iter().map(|h| h.0).collect();
    let halves: Vec<f64> = hits.iter().map(|h| h.1).collect();
    let mass = Estimate::from_samples(&full);
    let half_cap_mass = Estimate::from_samples(&halves);
    Ok(ExplosionProbe {
        cap_stable: (mass.mean - half_cap_mass.mean).abs() <= mass.std_error,
        mass,
        half_cap_mass,
    })
}

/// Monte Carlo estimate with the heavy-tail warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailAwareEstimate {
    pub estimate: Estimate,
    pub stability_flag: bool,
}

impl TailAwareEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        TailAwareEstimate {
            estimate: Estimate::from_samples(samples),
            stability_flag: heavy_tail_flag(samples),
        }
    }

    /// Finite mean and no heavy-tail warning.
    pub fn finite_evidence(&self) -> bool {
        self.estimate.mean.is_finite() && !self.stability_flag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonOracles {
    pub mgf: Estimate,
    /// `exp((e^c - 1) rate)`
    pub mgf_closed_form: f64,
    pub mgf_within: bool,
    /// `E exp(eps Z log Z)`
    pub zlogz: TailAwareEstimate,
}

pub fn poisson_oracles(rate: f64, c: f64, eps: f64, n_samples: usize, seed: u64) -> Result<PoissonOracles> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    require_paths(n_samples, 1)?;
    let law = Poisson::new(rate).map_err(|e| Error::invalid("rate", e.to_string()))?;
    let draws: Vec<(f64, f64)> = par_paths(n_samples, |id| {
        let z: f64 = law.sample(&mut path_stream(seed, Purpose::Oracle, id));
        let zlogz = if z > 0.0 { z * z.ln() } else { 0.0 };
        ((c * z).exp(), (eps * zlogz).exp())
    });
    let mgf = Estimate::from_samples(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
    let mgf_closed_form = (c.exp_m1() * rate).exp();
    Ok(PoissonOracles {
        mgf_within: (mgf.mean - mgf_closed_form).abs() <= 3.0 * mgf.std_error,
        mgf,
        mgf_closed_form,
        zlogz: TailAwareEstimate::from_samples(&draws.iter().map(|d| d.1).collect::<Vec<_>>()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBound {
    pub lhs: Estimate,
    pub rhs: f64,
    /// `lhs <= rhs + 3 SE`
    pub holds: bool,
}

/// `A_d m_{d-1} / (sqrt 2 sqrt(pi^{d-1}))` with `A_d` the unit-sphere area and
/// `m_k` the `k`-th absolute standard normal moment.
pub fn gaussian_bound_constant(d: usize) -> f64 {
    use std::f64::consts::PI;
    let df = d as f64;
    let area = 2.0 * PI.powf(df / 2.0) / libm::tgamma(df / 2.0);
    let k = df - 1.0;
    let moment = 2f64.powf(k / 2.0) * libm::tgamma((k + 1.0) / 2.0) / PI.sqrt();
    area * moment / (2f64.sqrt() * PI.powf(k).sqrt())
}

/// Right side `k_d exp(a |xi|^{1+eps}) exp(b |Sigma|_2^{(1+eps)/(1-eps)})`
/// with `a = 2^{1+eps} c` and `b = 16^{(1+eps)/(1-eps)} c^{2/(1-eps)}`.
pub fn gaussian_bound_rhs(d: usize, xi_norm: f64, sigma_norm: f64, c: f64, eps: f64) -> f64 {
    let a = 2f64.powf(1.0 + eps) * c;
    let p = (1.0 + eps) / (1.0 - eps);
    let b = 16f64.powf(p) * c.powf(2.0 / (1.0 - eps));
    gaussian_bound_constant(d) * (a * xi_norm.powf(1.0 + eps)).exp() * (b * sigma_norm.powf(p)).exp()
}

/// Monte Carlo of `E exp(c |X|^{1+eps})` for `X ~ N(xi, Sigma)` against the
/// analytic exponential-moment bound.
pub fn gaussian_bound_check(
    xi: &[f64],
    sigma: &[Vec<f64>],
    c: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GaussianBound> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", "must be positive"));
    }
    require_paths(n_samples, 1)?;
    let d = xi.len();
    if d == 0 {
        return Err(Error::EmptyInput("mean vector"));
    }
    if sigma.len() != d || sigma.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sigma.len(),
        });
    }
    let m = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let eigen = m.clone().symmetric_eigen();
    if eigen.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let sigma_norm = eigen.eigenvalues.max();
    let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let mean = DVector::from_column_slice(xi);
    let samples: Vec<f64> = par_paths(n_samples, |id| {
        let mut rng = path_stream(seed, Purpose::Oracle, id);
        let y = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &mean + &l * y;
        (c * x.norm().powf(1.0 + eps)).exp()
    });
    let lhs = Estimate::from_samples(&samples);
    let rhs = gaussian_bound_rhs(d, mean.norm(), sigma_norm, c, eps);
    Ok(GaussianBound {
        holds: lhs.mean <= rhs + 3.0 * lhs.std_error,
        lhs,
        rhs,
    })
}

/// Terminal-state moments of `dX = (a + b X) dt + sigma dW`, `X_0 = xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuMoments {
    pub mean: Estimate,
    /// `-a/b + e^{sb} (xi + a/b)`
    pub mean_exact: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// `sigma^2 int_0^s e^{2b(s-u)} du`
    pub variance_exact: f64,
    /// Mean within 3 standard errors.
    pub mean_ok: bool,
    /// Variance within 4 standard errors.
    pub variance_ok: bool,
    /// For Euler sampling: the exact sampler driven by the same normals.
    pub coupled_exact: Option<(f64, f64)>,
    /// For Euler sampling: mean and variance within 1% of the coupled exact
    /// sampler.
    pub euler_within_1pct: Option<bool>,
}

fn terminal_states(params: &ResetOuParams, s: f64, mode: OuMode, n: usize, seed: u64) -> Result<Vec<f64>> {
    let empty = EventSequence::empty(1, s);
    try_par_paths(n, |id| {
        let path = simulate_reset_ou(params, &empty, s, mode, &mut path_stream(seed, Purpose::Oracle, id))?;
        Ok(path.final_state()[0])
    })
}

/// Floating-point slack for degenerate (zero-variance) samples.
fn slack(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

#[allow(clippy::too_many_arguments)]
pub fn ou_moment_check(
    a: f64,
    b: f64,
    sigma: f64,
    xi: f64,
    s: f64,
    n_samples: usize,
    mode: OuMode,
    seed: u64,
) -> Result<OuMoments> {
    if b == 0.0 {
        return Err(Error::DegenerateCoefficient { index: 0 });
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", "must be positive"));
    }
    require_paths(n_samples, 2)?;
    let params = ResetOuParams::constant(xi, a, b, sigma)?;
    let states = terminal_states(&params, s, mode, n_samples, seed)?;
    let mean = Estimate::from_samples(&states);
    let (variance, variance_se) = variance_with_se(&states);
    let mean_exact = -a / b + (s * b).exp() * (xi + a / b);
    let variance_exact = sigma * sigma * (2.0 * b * s).exp_m1() / (2.0 * b);
    let (coupled_exact, euler_within_1pct) = match mode {
        OuMode::Euler { step } => {
            let exact = terminal_states(&params, s, OuMode::Exact { step }, n_samples, seed)?;
            let m = Estimate::from_samples(&exact).mean;
            let (v, _) = variance_with_se(&exact);
            let close = |x: f64, y: f64| (x - y).abs() <= 0.01 * y.abs() + slack(y);
            (Some((m, v)), Some(close(mean.mean, m) && close(variance, v)))
        }
        OuMode::Exact { .. } => (None, None),
    };
    Ok(OuMoments {
        mean_ok: (mean.mean - mean_exact).abs() <= 3.0 * mean.std_error + slack(mean_exact),
        variance_ok: (variance - variance_exact).abs() <= 4.0 * variance_se + slack(variance_exact),
        mean,
        mean_exact,
        variance,
        variance_se,
        variance_exact,
        coupled_exact,
        euler_within_1pct,
    })
}

/// Monte Carlo of `E prod_k beta (n + k)` over the jumps `k = 1..N` of a
/// `d`-dimensional unit Poisson total count on `(0, w]`, i.e. of
/// `E exp(int_0^w log(beta (n + N_s)) dN_s)`.
pub fn phi_functional(n: u32, beta: f64, d: usize, w: f64, n_paths: usize, seed: u64) -> Result<Estimate> {
    require_paths(n_paths, 1)?;
    let rates = vec![1.0; d];
    let samples: Vec<f64> = try_par_paths(n_paths, |id| {
        let path = simulate_poisson(&rates, w, &mut path_stream(seed, Purpose::Base, id))?;
        let log: f64 = (1..=path.total_count())
            .map(|k| (beta * (f64::from(n) + k as f64)).ln())
            .sum();
        Ok::<f64, Error>(log.exp())
    })?;
    Ok(Estimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::{Kernel, Link, SequenceRule};
    use std::f64::consts::{E, LN_2};

    fn unit() -> IntensitySpec {
        IntensitySpec::unit(1)
    }

    fn scenario(mu: IntensitySpec, t: f64, n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig::new(unit(), mu, t, n, seed)
    }

    #[test]
    fn equal_laws_have_exact_unit_mean() {
        let r = unit_mean_test(&scenario(unit(), 2.0, 2000, 1)).unwrap();
        assert_eq!((r.estimate.mean, r.estimate.std_error), (1.0, 0.0));
        assert!(!r.stability_flag);
        assert_eq!(r.outcome, Outcome::Pass);
    }

    #[test]
    fn too_few_paths_rejected() {
        assert!(unit_mean_test(&scenario(unit(), 1.0, 999, 1)).is_err());
    }

    #[test]
    fn affine_target_is_a_martingale() {
        let mu = IntensitySpec::ExactAffine { alpha: 0.5, beta: 0.3, dim: 1 };
        let r = unit_mean_test(&scenario(mu, 1.0, 100_000, 2)).unwrap();
        assert_eq!(r.outcome, Outcome::Pass, "{r:?}");
    }

    #[test]
    fn geometric_births_lose_mass_to_explosion() {
        let alphas = AlphaFamily::geometric(1.0, 2.0).unwrap();
        let mut c = scenario(IntensitySpec::PiecewiseBirth { alphas: alphas.clone() }, 5.0, 100_000, 3);
        c.event_cap = 200;
        let r = unit_mean_test(&c).unwrap();
        assert_eq!(r.outcome, Outcome::Fail, "{r:?}");
        let probe = explosion_probe(&alphas, 5.0, 100_000, 200, 3).unwrap();
        let gap = 1.0 - r.estimate.mean;
        assert!((gap - probe.mass.mean).abs() <= 3.0 * r.estimate.combined_se(&probe.mass), "{gap} {probe:?}");
        assert!(probe.cap_stable);
    }

    #[test]
    fn explosion_mass_grows_with_ratio() {
        let means: Vec<f64> = [1.5, 2.0, 3.0]
            .iter()
            .map(|&r| {
                let alphas = AlphaFamily::geometric(1.0, r).unwrap();
                let mut c = scenario(IntensitySpec::PiecewiseBirth { alphas }, 5.0, 20_000, 4);
                c.event_cap = 200;
                unit_mean_test(&c).unwrap().estimate.mean
            })
            .collect();
        assert!(means[0] >= means[1] && means[1] >= means[2], "{means:?}");
    }

    #[test]
    fn explosion_probe_edges() {
        let ones = AlphaFamily::constant(1.0).unwrap();
        let p = explosion_probe(&ones, 5.0, 10_000, 200, 5).unwrap();
        assert_eq!(p.mass.mean, 0.0);
        assert!(p.cap_stable);
        let geo = AlphaFamily::geometric(1.0, 2.0).unwrap();
        assert!(explosion_probe(&geo, 1e-3, 10_000, 200, 5).unwrap().mass.mean < 0.01);
        assert!(explosion_probe(&geo, 1.0, 10, 9, 5).is_err());
    }

    #[test]
    fn series_verdict_matches_unit_mean_outcome() {
        use crate::criteria::series_divergence;
        use crate::model::Verdict;
        // steeper divergent families are martingales too, but unit-rate
        // proposals cannot resolve their weights at t = 5
        let families = [
            AlphaFamily::constant(1.5).unwrap(),
            AlphaFamily::new(SequenceRule::Affine { intercept: 1.0, slope: 0.1 }).unwrap(),
            AlphaFamily::new(SequenceRule::Polynomial { scale: 1.0, power: 2.0 }).unwrap(),
            AlphaFamily::geometric(1.0, 2.0).unwrap(),
        ];
        for alphas in families {
            let mut c = scenario(IntensitySpec::PiecewiseBirth { alphas: alphas.clone() }, 5.0, 20_000, 6);
            c.event_cap = 500;
            let r = unit_mean_test(&c).unwrap();
            let divergent = series_divergence(&alphas) == Verdict::Divergent;
            assert_eq!(divergent, r.outcome == Outcome::Pass, "{alphas:?} {r:?}");
        }
    }

    #[test]
    fn law_comparisons() {
        let same = compare_laws(&[(0, 1.0), (1, 1.0), (2, 1.0)], &[0, 1, 2], Statistic::CountMarginal);
        assert_eq!(same.value, 0.0);
        let affine = IntensitySpec::ExactAffine { alpha: 1.0, beta: 0.5, dim: 1 };
        let c = scenario(affine.clone(), 1.0, 50_000, 7);
        let mean = weighted_law_vs_direct(&c, &affine, Statistic::MeanCount).unwrap();
        assert!(mean.value <= 3.0 * mean.combined_se, "{mean:?}");
        let hawkes = IntensitySpec::Hawkes {
            links: vec![Link::Abs],
            kernels: vec![vec![Kernel::Exponential { amplitude: 0.5, decay: 1.0 }]],
            baseline: vec![0.5],
        };
        let c = scenario(hawkes.clone(), 2.0, 50_000, 8);
        let tv = weighted_law_vs_direct(&c, &hawkes, Statistic::CountMarginal).unwrap();
        assert!(tv.value < 0.02, "{tv:?}");
        let ou = IntensitySpec::ResetOu(ResetOuParams::constant(1.0, 0.0, -1.0, 0.5).unwrap());
        assert!(matches!(
            weighted_law_vs_direct(&c, &ou, Statistic::CountMarginal),
            Err(Error::NotDirectlySimulable(_))
        ));
    }

    #[test]
    fn identical_law_tv_is_small() {
        let c = scenario(unit(), 1.0, 200_000, 9);
        let tv = weighted_law_vs_direct(&c, &unit(), Statistic::CountMarginal).unwrap();
        assert!(tv.value <= 0.005, "{tv:?}");
    }

    #[test]
    fn cross_proposals_agree() {
        let c = scenario(unit(), 1.0, 50_000, 10);
        let r = cross_proposal_check(&unit(), (1.0, 2.0), |p| p.total_count() as f64, &c).unwrap();
        assert!(r.first.within(1.0, 3.0) && r.second.within(1.0, 3.0) && r.agree, "{r:?}");
        let ou = IntensitySpec::ResetOu(ResetOuParams::constant(1.0, 0.0, -1.0, 0.5).unwrap());
        let mut c = scenario(ou.clone(), 1.0, 50_000, 11);
        c.quadrature_step = 0.01;
        let r = cross_proposal_check(&ou, (1.0, 2.0), |p| p.total_count() as f64, &c).unwrap();
        assert!(r.agree, "{r:?}");
        assert!(cross_proposal_check(&ou, (0.0, 2.0), |_| 0.0, &c).is_err());
    }

    #[test]
    fn poisson_oracle_values() {
        let r = poisson_oracles(1.0, LN_2, 0.5, 100_000, 12).unwrap();
        assert!((r.mgf_closed_form - E).abs() < 1e-15);
        assert!(r.mgf_within, "{r:?}");
        assert!(r.zlogz.finite_evidence());
        let r = poisson_oracles(1.0, 0.0, 0.0, 1000, 12).unwrap();
        assert_eq!((r.mgf.mean, r.mgf_closed_form, r.zlogz.estimate.mean), (1.0, 1.0, 1.0));
        assert!(matches!(poisson_oracles(1.0, 0.0, 1.0, 10, 0), Err(Error::EpsOutOfRange(_))));
    }

    #[test]
    fn gaussian_constants() {
        assert!((gaussian_bound_constant(1) - 2f64.sqrt()).abs() < 1e-14);
        assert!((gaussian_bound_constant(2) - 2.0).abs() < 1e-14);
        assert!((gaussian_bound_rhs(1, 0.0, 1.0, 1e-12, 0.5) - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_bound_holds_and_guards() {
        let r = gaussian_bound_check(&[0.0], &[vec![1.0]], 0.1, 0.5, 50_000, 13).unwrap();
        assert!(r.holds, "{r:?}");
        let r = gaussian_bound_check(&[0.0], &[vec![1.0]], 1e-9, 0.5, 1000, 13).unwrap();
        assert!((r.lhs.mean - 1.0).abs() < 1e-6 && r.holds);
        assert!(matches!(
            gaussian_bound_check(&[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, -1.0]], 0.1, 0.5, 10, 0),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(matches!(
            gaussian_bound_check(&[0.0], &[vec![1.0]], 0.1, 1.0, 10, 0),
            Err(Error::EpsOutOfRange(_))
        ));
    }

    #[test]
    fn ou_moments_match_closed_forms() {
        let r = ou_moment_check(0.0, -1.0, 1.0, 1.0, 1.0, 100_000, OuMode::Exact { step: 1.0 }, 14).unwrap();
        assert!((r.mean_exact - (-1.0f64).exp()).abs() < 1e-15);
        assert!((r.variance_exact - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-15);
        assert!(r.mean_ok && r.variance_ok, "{r:?}");
        let r = ou_moment_check(0.0, -1.0, 1.0, 1.0, 1.0, 20_000, OuMode::Euler { step: 1e-3 }, 14).unwrap();
        assert_eq!(r.euler_within_1pct, Some(true), "{r:?}");
        let r = ou_moment_check(0.3, -1.0, 0.0, 1.0, 1.0, 100, OuMode::Exact { step: 0.01 }, 14).unwrap();
        assert_eq!(r.variance, 0.0);
        assert!(r.mean_ok && r.variance_ok);
        let r = ou_moment_check(0.0, 0.5, 1.0, 1.0, 1.0, 100_000, OuMode::Exact { step: 1.0 }, 15).unwrap();
        assert!((r.mean_exact - 0.5f64.exp()).abs() < 1e-15 && r.mean_ok);
        assert!(matches!(
            ou_moment_check(0.0, 0.0, 1.0, 1.0, 1.0, 10, OuMode::Exact { step: 1.0 }, 0),
            Err(Error::DegenerateCoefficient { .. })
        ));
    }

    #[test]
    fn phi_functional_matches_closed_form() {
        for (n, expected) in [(0, 2.0 / E), (1, 4.0 / E)] {
            let e = phi_functional(n, 0.5, 1, 1.0, 100_000, 16).unwrap();
            assert!(e.within(expected, 3.0), "{n} {e:?}");
        }
    }

    #[test]
    fn standard_error_scales_with_root_n() {
        let mu = IntensitySpec::ExactAffine { alpha: 0.5, beta: 0.3, dim: 1 };
        let small = unit_mean_test(&scenario(mu.clone(), 1.0, 50_000, 17)).unwrap();
        let large = unit_mean_test(&scenario(mu, 1.0, 100_000, 18)).unwrap();
        let ratio = small.estimate.std_error / large.estimate.std_error;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "{ratio}");
    }
}
