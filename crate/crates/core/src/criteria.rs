//! Sufficient criteria for the martingale property of the likelihood weight.
//!
//! The integrability conditions are estimated by Monte Carlo over paths of
//! the base law; such estimates can support finiteness but never prove it,
//! so they come with the heavy-tail stability flag. The affine, Hawkes and
//! birth-process criteria have closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::{AlphaFamily, IntensitySpec, Kernel, Link, SequenceRule};
use crate::likelihood::{piece_integral_of, walk, Window};
use crate::model::{gamma_at, CriterionId, CriterionReport, DiffusionPath, EventSequence, Side, Verdict};
use crate::rng::{path_stream, try_par_paths, Purpose};
use crate::simulate::{simulate_aux, simulate_law, DEFAULT_EVENT_CAP};
use crate::stats::{heavy_tail_flag, Estimate};

/// Monte Carlo settings shared by the path-based checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub n_paths: usize,
    pub seed: u64,
    pub event_cap: usize,
    /// Trapezoid step for non-analytic integrands; also the grid step of
    /// auxiliary diffusions.
    pub quadrature_step: f64,
}

impl MonteCarlo {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        MonteCarlo {
            n_paths,
            seed,
            ..Default::default()
        }
    }
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo {
            n_paths: 10_000,
            seed: 0,
            event_cap: DEFAULT_EVENT_CAP,
            quadrature_step: 1e-3,
        }
    }
}

/// `beta * w * d` at or above this is reported as near-critical.
pub const NEAR_CRITICAL: f64 = 0.95;

fn prepare(lambda: &IntensitySpec, mu: &IntensitySpec, window: Window, mc: &MonteCarlo) -> Result<()> {
    if lambda.dimension() != mu.dimension() {
        return Err(Error::DimensionMismatch {
            expected: lambda.dimension(),
            found: mu.dimension(),
        });
    }
    if lambda.is_diffusion_driven() {
        return Err(Error::UnsupportedBase(lambda.family_name().into()));
    }
    if mc.n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be positive"));
    }
    if !(mc.quadrature_step > 0.0) {
        return Err(Error::invalid("quadrature_step", "must be positive"));
    }
    if !(window.end > 0.0) {
        return Err(Error::invalid("window", "window end must be positive"));
    }
    Ok(())
}

/// Draws base-law paths on `(0, window.end]` with their auxiliary
/// diffusions and maps each through `exponent`.
fn sample_exponents<F>(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    window: Window,
    mc: &MonteCarlo,
    exponent: F,
) -> Result<Vec<f64>>
where
    F: Fn(&EventSequence, Option<&DiffusionPath>) -> Result<f64> + Sync + Send,
{
    prepare(lambda, mu, window, mc)?;
    try_par_paths(mc.n_paths, |id| {
        let path = simulate_law(lambda, window.end, mc.event_cap, &mut path_stream(mc.seed, Purpose::Base, id))?;
        let aux = simulate_aux(
            mu,
            &path,
            mc.quadrature_step,
            &mut path_stream(mc.seed, Purpose::Diffusion, id),
        )?;
        exponent(&path, aux.as_ref())
    })
}

/// Summarizes `exp(exponent)` samples into a finite-evidence report.
pub(crate) fn mc_report(criterion_id: CriterionId, exponents: &[f64]) -> CriterionReport {
    let samples: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
    let est = Estimate::from_samples(&samples);
    let finite = est.mean.is_finite() && est.std_error.is_finite();
    CriterionReport {
        criterion_id,
        value: est.mean,
        std_error: Some(est.std_error),
        n_samples: Some(est.n),
        verdict: if finite {
            Verdict::FiniteEvidence
        } else {
            Verdict::Inconclusive
        },
        stability_flag: !finite || heavy_tail_flag(&samples),
    }
}

/// Pathwise `sum_i int_u^t g(lambda^i, mu^i) ds`.
fn time_integral<G>(
    path: &EventSequence,
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    aux: Option<&DiffusionPath>,
    window: Window,
    step: f64,
    g: G,
) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<f64> + Copy,
{
    let d = path.dimension();
    let mut total = 0.0;
    walk(
        &path.merged(),
        d,
        window,
        |piece| {
            for i in 0..d {
                total += piece_integral_of(lambda, mu, i, piece, aux, step, g)?.0;
            }
            Ok(())
        },
        |_, _, _, _| Ok(()),
    )?;
    Ok(total)
}

/// Pathwise `sum` over jumps in the window of `g(lambda_T-, mu_T-)`.
fn jump_sum<G>(
    path: &EventSequence,
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    aux: Option<&DiffusionPath>,
    window: Window,
    g: G,
) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    let mut total = 0.0;
    walk(
        &path.merged(),
        path.dimension(),
        window,
        |_| Ok(()),
        |t, i, past, counts| {
            let l = lambda.value(i, t, past, counts, None, Side::Left)?;
            let m = mu.value(i, t, past, counts, aux, Side::Left)?;
            total += g(l, m)?;
            Ok(())
        },
    )?;
    Ok(total)
}

fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// `(gamma log gamma - (gamma - 1)) lambda`, written as
/// `mu log(mu / lambda) - mu + lambda` so that `lambda = mu = 0` is 0.
fn relative_entropy_rate(l: f64, m: f64) -> Result<f64> {
    let gamma = gamma_at(m, l)?;
    if l == 0.0 {
        Ok(0.0)
    } else if m == 0.0 {
        Ok(l)
    } else {
        Ok(m * gamma.ln() - m + l)
    }
}

/// `E exp(sum_i int_u^t (gamma log gamma - (gamma - 1)) lambda ds)`.
pub fn check_c23(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    window: Window,
    mc: &MonteCarlo,
) -> Result<CriterionReport> {
    let exps = sample_exponents(lambda, mu, window, mc, |path, aux| {
        time_integral(path, lambda, mu, aux, window, mc.quadrature_step, relative_entropy_rate)
    })?;
    Ok(mc_report(CriterionId::C23, &exps))
}

/// `E exp(sum_i int_u^t lambda ds + int_u^t log+ gamma dN)`.
pub fn check_c24(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    window: Window,
    mc: &MonteCarlo,
) -> Result<CriterionReport> {
    let exps = sample_exponents(lambda, mu, window, mc, |path, aux| {
        let comp = time_integral(path, lambda, mu, aux, window, mc.quadrature_step, |l, _| Ok(l))?;
        let jumps = jump_sum(path, lambda, mu, aux, window, |l, m| Ok(log_plus(gamma_at(m, l)?)))?;
        Ok(comp + jumps)
    })?;
    Ok(mc_report(CriterionId::C24, &exps))
}

/// `E exp(sum_i int_u^t mu log+ mu ds)` under a unit-rate base.
pub fn check_c25(mu: &IntensitySpec, window: Window, mc: &MonteCarlo) -> Result<CriterionReport> {
    let lambda = IntensitySpec::unit(mu.dimension());
    let exps = sample_exponents(&lambda, mu, window, mc, |path, aux| {
        time_integral(path, &lambda, mu, aux, window, mc.quadrature_step, |_, m| Ok(m * log_plus(m)))
    })?;
    Ok(mc_report(CriterionId::C25, &exps))
}

/// `E exp(sum_i int_u^t log+ mu dN)` under a unit-rate base.
pub fn check_c26(mu: &IntensitySpec, window: Window, mc: &MonteCarlo) -> Result<CriterionReport> {
    let lambda = IntensitySpec::unit(mu.dimension());
    let exps = sample_exponents(&lambda, mu, window, mc, |path, aux| {
        jump_sum(path, &lambda, mu, aux, window, |_, m| Ok(log_plus(m)))
    })?;
    Ok(mc_report(CriterionId::C26, &exps))
}

/// Novikov-type condition `E exp(eps * sum_i int_0^t (mu - 1)^2 ds)` under a
/// unit-rate base.
pub fn check_novikov_32(mu: &IntensitySpec, t: f64, epsilon: f64, mc: &MonteCarlo) -> Result<CriterionReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    let lambda = IntensitySpec::unit(mu.dimension());
    let window = Window::new(0.0, t)?;
    let exps = sample_exponents(&lambda, mu, window, mc, |path, aux| {
        let q = time_integral(path, &lambda, mu, aux, window, mc.quadrature_step, |_, m| {
            Ok((m - 1.0) * (m - 1.0))
        })?;
        Ok(epsilon * q)
    })?;
    Ok(mc_report(CriterionId::Novikov32, &exps))
}

/// Both integrability conditions on one window; the window is covered when
/// either supports finiteness. With a unit base the simplified forms are
/// used.
pub fn check_window(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    window: Window,
    mc: &MonteCarlo,
) -> Result<(CriterionReport, CriterionReport)> {
    if *lambda == IntensitySpec::unit(mu.dimension()) {
        Ok((check_c25(mu, window, mc)?, check_c26(mu, window, mc)?))
    } else {
        Ok((check_c23(lambda, mu, window, mc)?, check_c24(lambda, mu, window, mc)?))
    }
}

/// Result of sweeping the horizon in windows of length at most `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSweep {
    pub epsilon: f64,
    pub windows: Vec<WindowResult>,
    /// Index of the worst window: the first uncovered one, otherwise the one
    /// whose best report has the largest value.
    pub worst: usize,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window: Window,
    pub first: CriterionReport,
    pub second: CriterionReport,
    pub covered: bool,
}

impl WindowResult {
    fn best_value(&self) -> f64 {
        match (self.first.supports_finiteness(), self.second.supports_finiteness()) {
            (true, true) => self.first.value.min(self.second.value),
            (true, false) => self.first.value,
            (false, true) => self.second.value,
            (false, false) => f64::INFINITY,
        }
    }
}

/// Checks every window `(k eps, min((k + 1) eps, horizon)]`.
pub fn sweep_windows(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    horizon: f64,
    epsilon: f64,
    mc: &MonteCarlo,
) -> Result<WindowSweep> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let n = (horizon / epsilon).ceil() as usize;
    let mut windows = Vec::with_capacity(n);
    for k in 0..n {
        let start = k as f64 * epsilon;
        let end = if k + 1 == n { horizon } else { (k + 1) as f64 * epsilon };
        let window = Window::new(start, end)?;
        let (first, second) = check_window(lambda, mu, window, mc)?;
        let covered = first.supports_finiteness() || second.supports_finiteness();
        windows.push(WindowResult {
            window,
            first,
            second,
            covered,
        });
    }
    let covered = windows.iter().all(|w| w.covered);
    let worst = match windows.iter().position(|w| !w.covered) {
        Some(k) => k,
        None => (0..windows.len())
            .max_by(|&a, &b| windows[a].best_value().total_cmp(&windows[b].best_value()))
            .unwrap_or(0),
    };
    Ok(WindowSweep {
        epsilon,
        windows,
        worst,
        covered,
    })
}

/// Required exponential-moment order for an affine intensity above a
/// positive base, and whether the available order reaches it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOrderCheck {
    pub required_order: f64,
    pub available_order: f64,
    pub pass: bool,
}

impl MomentOrderCheck {
    pub fn report(&self) -> CriterionReport {
        let verdict = if self.pass {
            Verdict::ClosedFormFinite
        } else {
            Verdict::Inconclusive
        };
        CriterionReport::closed_form(CriterionId::Affine31, self.required_order, verdict)
    }
}

/// With `lambda >= delta` and `mu <= alpha + beta lambda`, the weight is a
/// martingale once `lambda` has exponential moments of order
/// `1 + (alpha / delta + beta) log+(alpha / delta + beta)`.
pub fn check_affine_31(delta: f64, alpha: f64, beta: f64, available_order: f64) -> Result<MomentOrderCheck> {
    if !(delta > 0.0) {
        return Err(Error::NonpositiveDelta(delta));
    }
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::invalid("alpha/beta", "must be nonnegative"));
    }
    let k = alpha / delta + beta;
    let required_order = 1.0 + k * log_plus(k);
    Ok(MomentOrderCheck {
        required_order,
        available_order,
        pass: available_order >= required_order,
    })
}

fn critical_product(beta: f64, d: usize, w: f64) -> Result<f64> {
    let product = beta * w * d as f64;
    if product >= 1.0 {
        Err(Error::DivergentRegime { product })
    } else {
        Ok(product)
    }
}

/// `E exp(int_0^w log(beta (n + N_s)) dN_s)` for a `d`-dimensional unit
/// Poisson total count `N`: `exp(-w d) / (1 - beta w d)^(n + 1)`.
pub fn affine_phi(n: u32, beta: f64, d: usize, w: f64) -> Result<f64> {
    let product = critical_product(beta, d, w)?;
    Ok((-w * d as f64).exp() / (1.0 - product).powf(f64::from(n) + 1.0))
}

/// Upper bound on `E exp(sum_i int_u^t log mu dN)` for
/// `mu <= beta (m + sum_j N_{t-})`:
/// `(1 - beta (t - u) d)^-(m + 1) exp(-t d + u d / (1 - beta (t - u) d))`.
pub fn affine_bound_36(m: u32, beta: f64, d: usize, u: f64, t: f64) -> Result<f64> {
    if u > t {
        return Err(Error::invalid("window", "u ≤ t required"));
    }
    let product = critical_product(beta, d, t - u)?;
    let df = d as f64;
    Ok((1.0 - product).powf(-(f64::from(m) + 1.0)) * (-t * df + u * df / (1.0 - product)).exp())
}

/// Smallest integer `m` with `alpha <= beta m`.
pub fn affine_bound_index(alpha: f64, beta: f64) -> Result<u32> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be positive"));
    }
    Ok((alpha / beta).ceil().max(0.0) as u32)
}

/// A Monte Carlo estimate set against a closed-form upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub report: CriterionReport,
    pub bound: f64,
    /// Estimate above the bound by more than 3 standard errors.
    pub exceeds: bool,
    /// Heavy tails in the estimate, or a near-critical `beta w d`.
    pub stability_flag: bool,
}

/// Runs the jump-integral condition for `ExactAffine(alpha, beta)` on
/// `window` and compares it with the affine closed-form bound.
pub fn affine_bound_comparison(
    alpha: f64,
    beta: f64,
    d: usize,
    window: Window,
    mc: &MonteCarlo,
) -> Result<BoundComparison> {
    let m = affine_bound_index(alpha, beta)?;
    let bound = affine_bound_36(m, beta, d, window.start, window.end)?;
    let mu = IntensitySpec::ExactAffine { alpha, beta, dim: d };
    let report = check_c26(&mu, window, mc)?;
    let se = report.std_error.unwrap_or(0.0);
    let near_critical = beta * window.length() * d as f64 >= NEAR_CRITICAL;
    Ok(BoundComparison {
        exceeds: report.value > bound + 3.0 * se,
        stability_flag: report.stability_flag || near_critical,
        bound,
        report,
    })
}

/// Verifies `link(x) <= |x|` for every link and returns the kernel bound
/// `c = max_ij sup |h_ij|`, so that `mu <= baseline + c sum_j N_{t-}` and the
/// affine criterion applies.
pub fn check_hawkes_36(links: &[Link], kernels: &[Vec<Kernel>]) -> Result<(f64, Verdict)> {
    for &link in links {
        certify_link(link)?;
    }
    let c = kernels
        .iter()
        .flatten()
        .map(|k| k.sup_norm())
        .fold(0.0, f64::max);
    if !c.is_finite() {
        return Err(Error::invalid("kernels", "kernels must be bounded"));
    }
    Ok((c, Verdict::ClosedFormFinite))
}

/// Grid check on `±10^k`, `k` in `[-6, 6]`, plus the per-family analytic
/// certificate.
fn certify_link(link: Link) -> Result<()> {
    for k in -24..=24 {
        let mag = 10f64.powf(f64::from(k) / 4.0);
        for x in [mag, -mag] {
            let value = link.apply(x);
            if value > x.abs() * (1.0 + 1e-12) {
                return Err(Error::PhiBoundViolated { x, value });
            }
        }
    }
    match link {
        Link::Abs | Link::Relu => Ok(()),
        Link::ClippedLinear { slope, cap } => {
            if cap == 0.0 || slope.abs() <= 1.0 {
                Ok(())
            } else {
                // slope * x exceeds |x| just above zero, below the cap
                let x = (cap / slope.abs()).min(1.0) * slope.signum() * 0.5;
                Err(Error::PhiBoundViolated { x, value: link.apply(x) })
            }
        }
    }
}

/// Closed-form criterion for a Hawkes intensity.
pub fn hawkes_report(links: &[Link], kernels: &[Vec<Kernel>]) -> Result<CriterionReport> {
    let (c, verdict) = check_hawkes_36(links, kernels)?;
    Ok(CriterionReport::closed_form(CriterionId::Hawkes36, c, verdict))
}

/// For a pure birth process with rates `alpha_n`, the weight is a martingale
/// exactly when `sum 1 / alpha_n` diverges.
pub fn series_divergence(alphas: &AlphaFamily) -> Verdict {
    rule_series(alphas.rule())
}

fn rule_series(rule: &SequenceRule) -> Verdict {
    match rule {
        SequenceRule::Constant { .. } | SequenceRule::Affine { .. } => Verdict::Divergent,
        SequenceRule::Polynomial { power, .. } => {
            if *power <= 1.0 {
                Verdict::Divergent
            } else {
                Verdict::Convergent
            }
        }
        SequenceRule::Geometric { ratio, .. } => {
            if *ratio <= 1.0 {
                Verdict::Divergent
            } else {
                Verdict::Convergent
            }
        }
        SequenceRule::Explicit { tail, .. } => rule_series(tail),
    }
}

pub fn series_report(alphas: &AlphaFamily) -> CriterionReport {
    let verdict = series_divergence(alphas);
    let value = if verdict == Verdict::Divergent { f64::INFINITY } else { partial_reciprocal_sum(alphas) };
    CriterionReport::closed_form(CriterionId::Series37, value, verdict)
}

/// `sum_{n < 10^6} 1 / alpha_n`, stopping once terms are negligible.
fn partial_reciprocal_sum(alphas: &AlphaFamily) -> f64 {
    let mut sum = 0.0;
    for n in 0..1_000_000 {
        let term = 1.0 / alphas.value(n);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}
