//! Path generators for counting processes and their auxiliary diffusions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::intensity::{AlphaFamily, IntensitySpec, LinearSdeParams, ResetOuParams};
use crate::model::{DiffusionPath, EventSequence, Side, TimePoint};
use crate::rng::PathRng;

/// Default event cap standing in for explosion.
pub const DEFAULT_EVENT_CAP: usize = 100_000;

/// Transition scheme for the reset OU diffusion, on a grid of the given step
/// refined by every jump time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuMode {
    /// Exact Gaussian transition between grid nodes.
    Exact { step: f64 },
    /// Euler-Maruyama.
    Euler { step: f64 },
}

impl OuMode {
    fn step(self) -> f64 {
        match self {
            OuMode::Exact { step } | OuMode::Euler { step } => step,
        }
    }
}

fn exponential(rate: f64, rng: &mut PathRng) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

fn check_horizon(horizon: f64) -> Result<()> {
    TimePoint::new(horizon)?;
    if horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("horizon", "must be positive"))
    }
}

/// Independent homogeneous Poisson coordinates, simulated as one superposed
/// stream whose marks pick the coordinate, so coordinates never share a time.
pub fn simulate_poisson(rates: &[f64], horizon: f64, rng: &mut PathRng) -> Result<EventSequence> {
    check_horizon(horizon)?;
    if rates.is_empty() || !rates.iter().all(|r| r.is_finite() && *r >= 0.0) {
        return Err(Error::invalid("rates", "need finite nonnegative rates"));
    }
    let total: f64 = rates.iter().sum();
    let mut merged = Vec::new();
    if total > 0.0 {
        let mut t = 0.0;
        loop {
            let s = t + exponential(total, rng);
            if s <= t {
                continue;
            }
            if s > horizon {
                break;
            }
            let mut pick = rng.random::<f64>() * total;
            let mut coord = rates.len() - 1;
            for (i, &r) in rates.iter().enumerate() {
                if pick < r {
                    coord = i;
                    break;
                }
                pick -= r;
            }
            merged.push((s, coord));
            t = s;
        }
    }
    Ok(EventSequence::from_merged(rates.len(), horizon, &merged, false))
}

/// Ogata thinning against a piecewise-constant envelope that is refreshed at
/// every proposal. Stops with `truncated = true` once `cap` events exist.
pub fn simulate_thinning(
    spec: &IntensitySpec,
    horizon: f64,
    cap: usize,
    rng: &mut PathRng,
) -> Result<EventSequence> {
    check_horizon(horizon)?;
    if !spec.directly_simulable() {
        return Err(Error::NotDirectlySimulable(spec.family_name().into()));
    }
    let d = spec.dimension();
    let mut events: Vec<(f64, usize)> = Vec::new();
    let mut counts = vec![0usize; d];
    let mut rates = vec![0.0; d];
    let mut truncated = false;
    let mut t = 0.0;
    loop {
        let envelope = spec.envelope(t, &events, &counts);
        if !(envelope > 0.0) {
            break;
        }
        let s = t + exponential(envelope, rng);
        if s <= t {
            truncated = true;
            break;
        }
        if s > horizon {
            break;
        }
        let mut total = 0.0;
        for (i, r) in rates.iter_mut().enumerate() {
            *r = spec.value(i, s, &events, &counts, None, Side::Left)?;
            total += *r;
        }
        if total > envelope * (1.0 + 1e-9) {
            return Err(Error::EnvelopeViolation {
                time: s,
                intensity: total,
                envelope,
            });
        }
        let u = rng.random::<f64>() * envelope;
        if u < total {
            let mut rest = u;
            let mut coord = d - 1;
            for (i, &r) in rates.iter().enumerate() {
                if rest < r {
                    coord = i;
                    break;
                }
                rest -= r;
            }
            events.push((s, coord));
            counts[coord] += 1;
            if events.len() >= cap {
                truncated = true;
                break;
            }
        }
        t = s;
    }
    Ok(EventSequence::from_merged(d, horizon, &events, truncated))
}

/// Pure birth process with rate `alpha_n` after `n` births: inter-arrival
/// times are drawn exactly.
pub fn simulate_markov_birth(
    alphas: &AlphaFamily,
    horizon: f64,
    cap: usize,
    rng: &mut PathRng,
) -> Result<EventSequence> {
    check_horizon(horizon)?;
    if cap == 0 {
        return Err(Error::invalid("cap", "must be at least 1"));
    }
    let mut merged = Vec::new();
    let mut t = 0.0;
    let mut truncated = false;
    while merged.len() < cap {
        let s = t + exponential(alphas.value(merged.len()), rng);
        if s <= t {
            // gaps below float resolution: the path has exploded at t
            truncated = true;
            break;
        }
        if s > horizon {
            break;
        }
        merged.push((s, 0));
        t = s;
        if merged.len() == cap {
            truncated = true;
        }
    }
    Ok(EventSequence::from_merged(1, horizon, &merged, truncated))
}

/// Simulates a path under the law with intensity `spec`, using the exact
/// generator when one exists.
pub fn simulate_law(
    spec: &IntensitySpec,
    horizon: f64,
    cap: usize,
    rng: &mut PathRng,
) -> Result<EventSequence> {
    match spec {
        IntensitySpec::Constant { rates } => simulate_poisson(rates, horizon, rng),
        IntensitySpec::PiecewiseBirth { alphas } => simulate_markov_birth(alphas, horizon, cap, rng),
        _ => simulate_thinning(spec, horizon, cap, rng),
    }
}

/// Multiples of `step` in `[0, horizon]`, plus `horizon` and the jump times.
fn build_grid(horizon: f64, step: f64, jumps: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let n = (horizon / step).floor() as usize;
    let mut nodes: Vec<(f64, bool)> = (0..=n)
        .map(|k| (k as f64 * step, false))
        .filter(|&(g, _)| g <= horizon)
        .collect();
    nodes.push((horizon, false));
    nodes.extend(jumps.iter().map(|&t| (t, true)));
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut grid: Vec<f64> = Vec::with_capacity(nodes.len());
    let mut marks: Vec<bool> = Vec::with_capacity(nodes.len());
    for (g, is_jump) in nodes {
        if grid.last() == Some(&g) {
            let last = marks.len() - 1;
            marks[last] |= is_jump;
        } else {
            grid.push(g);
            marks.push(is_jump);
        }
    }
    (grid, marks)
}

/// Reset OU diffusion paired with a one-dimensional path: after the `n`-th
/// jump the state restarts at `xi_n` and follows `dX = (a_n + b_n X) dt + sigma dW`.
pub fn simulate_reset_ou(
    params: &ResetOuParams,
    events: &EventSequence,
    horizon: f64,
    mode: OuMode,
    rng: &mut PathRng,
) -> Result<DiffusionPath> {
    check_horizon(horizon)?;
    if events.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: events.dimension(),
        });
    }
    let step = mode.step();
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", "must be positive"));
    }
    let (grid, resets) = build_grid(horizon, step, events.jumps(0));
    let mut values = Vec::with_capacity(grid.len());
    let mut left = Vec::with_capacity(grid.len());
    let mut segment = 0usize;
    let mut x = params.xi.value(0);
    values.push(vec![x]);
    left.push(vec![x]);
    for k in 1..grid.len() {
        let h = grid[k] - grid[k - 1];
        let a = params.a.value(segment);
        let b = params.b.value(segment);
        if b == 0.0 {
            return Err(Error::DegenerateCoefficient { index: segment });
        }
        let z: f64 = rng.sample(StandardNormal);
        x = match mode {
            OuMode::Exact { .. } => {
                let grow = (b * h).exp();
                let mean = x * grow + a * (b * h).exp_m1() / b;
                let var = params.sigma * params.sigma * (2.0 * b * h).exp_m1() / (2.0 * b);
                mean + var.max(0.0).sqrt() * z
            }
            OuMode::Euler { .. } => x + (a + b * x) * h + params.sigma * h.sqrt() * z,
        };
        left.push(vec![x]);
        if resets[k] {
            segment += 1;
            x = params.xi.value(segment);
        }
        values.push(vec![x]);
    }
    Ok(DiffusionPath::new(grid, values, left, resets))
}

/// Euler-Maruyama for the count- and age-driven linear SDE, on a grid refined
/// by every jump time. The state is continuous across jumps.
pub fn simulate_linear_sde(
    params: &LinearSdeParams,
    events: &EventSequence,
    step: f64,
    rng: &mut PathRng,
) -> Result<DiffusionPath> {
    let horizon = events.horizon();
    if !(step > 0.0) {
        return Err(Error::invalid("step", "must be positive"));
    }
    if step > horizon / 10.0 {
        return Err(Error::StepTooCoarse { step, horizon });
    }
    let d = params.dimension();
    if events.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: events.dimension(),
        });
    }
    let merged = events.merged();
    let jump_times: Vec<f64> = merged.iter().map(|e| e.0).collect();
    let (grid, resets) = build_grid(horizon, step, &jump_times);

    let mut x = params.x0.clone();
    let mut counts = vec![0usize; d];
    let mut last_jump = vec![0.0f64; d];
    let mut next_event = 0usize;
    let mut values = Vec::with_capacity(grid.len());
    values.push(x.clone());
    let mut ages = vec![0.0; d];
    for k in 1..grid.len() {
        let (g0, g1) = (grid[k - 1], grid[k]);
        let h = g1 - g0;
        for (age, last) in ages.iter_mut().zip(&last_jump) {
            *age = g0 - last;
        }
        let drift = params.drift.eval(&counts, &ages);
        let feedback = params.feedback.eval(&counts, &ages);
        let sigma = params.diffusion.eval(&counts, d);
        let sqrt_h = h.sqrt();
        let mut next = Vec::with_capacity(d);
        for i in 0..d {
            let bx: f64 = feedback[i].iter().zip(&x).map(|(b, xj)| b * xj).sum();
            let z: f64 = rng.sample(StandardNormal);
            next.push(x[i] + (drift[i] + bx) * h + sigma[i] * sqrt_h * z);
        }
        x = next;
        values.push(x.clone());
        while next_event < merged.len() && merged[next_event].0 == g1 {
            let i = merged[next_event].1;
            counts[i] += 1;
            last_jump[i] = g1;
            next_event += 1;
        }
    }
    let left = values.clone();
    Ok(DiffusionPath::new(grid, values, left, resets))
}

/// Auxiliary diffusion for a diffusion-driven intensity, on a grid of the
/// given step; `None` for the other families.
pub fn simulate_aux(
    spec: &IntensitySpec,
    events: &EventSequence,
    step: f64,
    rng: &mut PathRng,
) -> Result<Option<DiffusionPath>> {
    match spec {
        IntensitySpec::ResetOu(p) => Ok(Some(simulate_reset_ou(
            p,
            events,
            events.horizon(),
            OuMode::Exact { step },
            rng,
        )?)),
        IntensitySpec::LinearSde(p) => Ok(Some(simulate_linear_sde(p, events, step, rng)?)),
        _ => Ok(None),
    }
}
