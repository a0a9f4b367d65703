//! Doléans-Dade exponential weights along a realized path.
//!
//! For counting-process integrands the exponential has no continuous part,
//! so on a window `(u, t]`
//!
//! ```text
//! log E(H.M) = sum_i [ int_u^t (lambda^i - mu^i) ds + sum_{T in (u,t]} log gamma^i_T ]
//! ```
//!
//! with `gamma = mu / lambda` read from left limits. A jump where
//! `gamma = 0` sends the weight to zero for good; that is recorded as
//! `log_weight = -inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::{IntensitySpec, Positivity};
use crate::model::{gamma_at, DiffusionPath, EventSequence, Side, WeightRecord};
use crate::stats::Estimate;

/// A time window `(start, end]` inside the path horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start >= 0.0) {
            return Err(Error::Invariant {
                path: "window".into(),
                reason: "window bounds must be finite and nonnegative".into(),
            });
        }
        if start > end {
            return Err(Error::Invariant {
                path: "window".into(),
                reason: "u ≤ t required".into(),
            });
        }
        Ok(Window { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    fn check_inside(&self, horizon: f64) -> Result<()> {
        if self.end > horizon {
            Err(Error::OutOfHorizon {
                t: self.end,
                horizon,
            })
        } else {
            Ok(())
        }
    }
}

/// One inter-event stretch `(a, b)` with the events at or before `a`.
pub(crate) struct Piece<'a> {
    pub a: f64,
    pub b: f64,
    pub past: &'a [(f64, usize)],
    pub counts: &'a [usize],
}

/// Walks a path inside a window: `on_piece` for every inter-event stretch,
/// `on_jump(time, coordinate, past, counts_before)` for every jump in the
/// window, in time order.
pub(crate) fn walk<P, J>(
    merged: &[(f64, usize)],
    dimension: usize,
    window: Window,
    mut on_piece: P,
    mut on_jump: J,
) -> Result<()>
where
    P: FnMut(&Piece<'_>) -> Result<()>,
    J: FnMut(f64, usize, &[(f64, usize)], &[usize]) -> Result<()>,
{
    let mut counts = vec![0usize; dimension];
    for k in 0..=merged.len() {
        let prev = if k == 0 { 0.0 } else { merged[k - 1].0 };
        let next = merged.get(k).map_or(f64::INFINITY, |e| e.0);
        let a = prev.max(window.start);
        let b = next.min(window.end);
        if a < b {
            on_piece(&Piece {
                a,
                b,
                past: &merged[..k],
                counts: &counts,
            })?;
        }
        if let Some(&(t, i)) = merged.get(k) {
            if t > window.end {
                break;
            }
            if t > window.start {
                on_jump(t, i, &merged[..k], &counts)?;
            }
            counts[i] += 1;
        }
    }
    Ok(())
}

/// Composite trapezoid over `(a, b)` on the lattice `k * step` refined by
/// `breaks`, with error estimate `sum |trapezoid - midpoint|` per cell.
/// The integrand takes the side of the limit to read at cell ends.
pub(crate) fn trapezoid<F>(mut f: F, a: f64, b: f64, step: f64, breaks: &[f64]) -> Result<(f64, f64)>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    let mut nodes = vec![a];
    let first = (a / step).floor() as i64 + 1;
    let mut k = first;
    loop {
        let x = k as f64 * step;
        if x >= b {
            break;
        }
        if x > a {
            nodes.push(x);
        }
        k += 1;
    }
    nodes.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    nodes.push(b);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut value = 0.0;
    let mut err = 0.0;
    for w in nodes.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let h = x1 - x0;
        let trap = 0.5 * h * (f(x0, Side::Right)? + f(x1, Side::Left)?);
        let mid = h * f(0.5 * (x0 + x1), Side::Right)?;
        value += trap;
        err += (trap - mid).abs();
    }
    Ok((value, err))
}

/// `int_a^b spec^i ds` over one piece: exact for count-driven intensities and
/// sign-definite exponential Hawkes kernels, trapezoid otherwise.
pub(crate) fn piece_integral(
    spec: &IntensitySpec,
    i: usize,
    piece: &Piece<'_>,
    aux: Option<&DiffusionPath>,
    step: f64,
) -> Result<(f64, f64)> {
    if let Some(rate) = spec.count_rate(i, piece.counts) {
        return Ok((rate * (piece.b - piece.a), 0.0));
    }
    if let Some(v) = spec.hawkes_closed_integral(i, piece.a, piece.b, piece.past) {
        return Ok((v, 0.0));
    }
    let breaks = spec.breakpoints(i, piece.a, piece.b, piece.past);
    trapezoid(
        |s, side| spec.value(i, s, piece.past, piece.counts, aux, side),
        piece.a,
        piece.b,
        step,
        &breaks,
    )
}

/// `int_a^b g(lambda^i_s, mu^i_s) ds` over one piece.
pub(crate) fn piece_integral_of<G>(
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    i: usize,
    piece: &Piece<'_>,
    aux: Option<&DiffusionPath>,
    step: f64,
    g: G,
) -> Result<(f64, f64)>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    if let (Some(l), Some(m)) = (lambda.count_rate(i, piece.counts), mu.count_rate(i, piece.counts)) {
        return Ok((g(l, m)? * (piece.b - piece.a), 0.0));
    }
    let mut breaks = lambda.breakpoints(i, piece.a, piece.b, piece.past);
    breaks.extend(mu.breakpoints(i, piece.a, piece.b, piece.past));
    trapezoid(
        |s, side| {
            let l = lambda.value(i, s, piece.past, piece.counts, None, side)?;
            let m = mu.value(i, s, piece.past, piece.counts, aux, side)?;
            g(l, m)
        },
        piece.a,
        piece.b,
        step,
        &breaks,
    )
}

pub(crate) fn check_pair(
    path: &EventSequence,
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    aux: Option<&DiffusionPath>,
) -> Result<()> {
    let d = path.dimension();
    for spec in [lambda, mu] {
        if spec.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: spec.dimension(),
            });
        }
    }
    if lambda.is_diffusion_driven() {
        return Err(Error::UnsupportedBase(lambda.family_name().into()));
    }
    if mu.is_diffusion_driven() && aux.is_none() {
        return Err(Error::MissingAux);
    }
    Ok(())
}

/// Log Doléans-Dade weight `log E(H.M)` of changing intensity `lambda` into
/// `mu` on `window`, along `path`.
pub fn log_weight(
    path: &EventSequence,
    lambda: &IntensitySpec,
    mu: &IntensitySpec,
    aux: Option<&DiffusionPath>,
    window: Window,
    quadrature_step: f64,
) -> Result<WeightRecord> {
    check_pair(path, lambda, mu, aux)?;
    window.check_inside(path.horizon())?;
    if !(quadrature_step > 0.0 && quadrature_step.is_finite()) {
        return Err(Error::invalid("quadrature_step", "must be positive"));
    }
    let d = path.dimension();
    let merged = path.merged();
    let mut integrals = 0.0;
    let mut jumps = 0.0;
    let mut quad_err = 0.0;
    let mut hit_zero = false;
    walk(
        &merged,
        d,
        window,
        |piece| {
            for i in 0..d {
                let (il, el) = piece_integral(lambda, i, piece, None, quadrature_step)?;
                let (im, em) = piece_integral(mu, i, piece, aux, quadrature_step)?;
                integrals += il - im;
                quad_err += el + em;
            }
            Ok(())
        },
        |t, i, past, counts| {
            let l = lambda.value(i, t, past, counts, None, Side::Left)?;
            let m = mu.value(i, t, past, counts, aux, Side::Left)?;
            let gamma = gamma_at(m, l)?;
            if gamma == 0.0 {
                hit_zero = true;
            } else {
                jumps += gamma.ln();
            }
            Ok(())
        },
    )?;
    Ok(WeightRecord {
        path_id: 0,
        log_weight: if hit_zero { f64::NEG_INFINITY } else { integrals + jumps },
        hit_zero,
        quadrature_error_estimate: quad_err,
    })
}

/// Zero-weight bookkeeping for a batch of weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityAudit {
    pub n_paths: usize,
    pub zero_fraction: Estimate,
    /// `mu` is bounded away from zero, so no weight may vanish.
    pub strictly_positive: bool,
    /// False only if a strictly positive `mu` produced a zero weight.
    pub consistent: bool,
}

pub fn weight_positivity_audit(records: &[WeightRecord], mu: &IntensitySpec) -> Result<PositivityAudit> {
    if records.is_empty() {
        return Err(Error::EmptyInput("weight records"));
    }
    let flags: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.hit_zero))).collect();
    let zero_fraction = Estimate::from_samples(&flags);
    let strictly_positive = mu.positivity() == Positivity::ByConstruction;
    Ok(PositivityAudit {
        n_paths: records.len(),
        zero_fraction,
        strictly_positive,
        consistent: !strictly_positive || zero_fraction.mean == 0.0,
    })
}
