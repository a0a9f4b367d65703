//! Domain types shared by the simulation, weighting and verification layers.
//!
//! Everything here is immutable once constructed, so paths and records can be
//! shared freely between worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonnegative, finite point in time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(TimePoint(value))
        } else {
            Err(Error::invalid("time", format!("{value} is not a finite nonnegative time")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TimePoint {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        TimePoint::new(value)
    }
}

impl From<TimePoint> for f64 {
    fn from(t: TimePoint) -> f64 {
        t.0
    }
}

/// Which one-sided limit of the counting process to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `N_{t-}`: jumps strictly before `t`.
    Left,
    /// `N_t`: jumps at or before `t`.
    Right,
}

/// A realized `d`-dimensional counting path on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    horizon: f64,
    jumps: Vec<Vec<f64>>,
    truncated: bool,
}

impl EventSequence {
    /// Validates the per-coordinate jump lists: strictly increasing, inside
    /// `(0, horizon]`, and no time shared between two coordinates.
    pub fn new(horizon: f64, jumps: Vec<Vec<f64>>, truncated: bool) -> Result<Self> {
        TimePoint::new(horizon)?;
        if jumps.is_empty() {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        for (i, times) in jumps.iter().enumerate() {
            for (k, &t) in times.iter().enumerate() {
                if !(t > 0.0 && t <= horizon) {
                    return Err(Error::OutOfHorizon { t, horizon });
                }
                if k > 0 && times[k - 1] >= t {
                    return Err(Error::invalid(
                        format!("jumps[{i}]"),
                        "jump times must be strictly increasing",
                    ));
                }
            }
        }
        let seq = EventSequence {
            horizon,
            jumps,
            truncated,
        };
        let merged = seq.merged();
        if merged.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("jumps", "coordinates may not jump simultaneously"));
        }
        Ok(seq)
    }

    /// Builds from a time-ordered merged stream; used by the simulators, which
    /// never produce ties.
    pub(crate) fn from_merged(
        dimension: usize,
        horizon: f64,
        merged: &[(f64, usize)],
        truncated: bool,
    ) -> Self {
        let mut jumps = vec![Vec::new(); dimension];
        for &(t, i) in merged {
            jumps[i].push(t);
        }
        EventSequence {
            horizon,
            jumps,
            truncated,
        }
    }

    pub fn empty(dimension: usize, horizon: f64) -> Self {
        EventSequence {
            horizon,
            jumps: vec![Vec::new(); dimension.max(1)],
            truncated: false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.jumps.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self, coordinate: usize) -> &[f64] {
        &self.jumps[coordinate]
    }

    /// True when the event cap stopped simulation before the horizon.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn total_count(&self) -> usize {
        self.jumps.iter().map(Vec::len).sum()
    }

    /// All jumps as `(time, coordinate)`, ordered by time.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self
            .jumps
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |&t| (t, i)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    pub fn count_at(&self, t: f64, side: Side) -> Result<Vec<usize>> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok((0..self.dimension())
            .map(|i| self.coordinate_count(i, t, side))
            .collect())
    }

    pub(crate) fn coordinate_count(&self, i: usize, t: f64, side: Side) -> usize {
        let times = &self.jumps[i];
        match side {
            Side::Left => times.partition_point(|&s| s < t),
            Side::Right => times.partition_point(|&s| s <= t),
        }
    }
}

/// `mu / lambda` with `0 / 0 = 1`.
pub fn gamma_at(mu: f64, lambda: f64) -> Result<f64> {
    if !(mu.is_finite() && lambda.is_finite() && mu >= 0.0 && lambda >= 0.0) {
        return Err(Error::invalid(
            "gamma",
            format!("intensities must be finite and nonnegative (mu = {mu}, lambda = {lambda})"),
        ));
    }
    if lambda == 0.0 {
        if mu == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::IncompatibleIntensity { mu })
        }
    } else {
        Ok(mu / lambda)
    }
}

/// State of an auxiliary diffusion on a grid that contains every jump time of
/// its paired [`EventSequence`].
///
/// `values[k]` is the state at `grid[k]` after any reset; `left[k]` is the
/// left limit. They differ only at reset points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPath {
    grid: Vec<f64>,
    values: Vec<Vec<f64>>,
    left: Vec<Vec<f64>>,
    resets: Vec<bool>,
}

impl DiffusionPath {
    pub(crate) fn new(
        grid: Vec<f64>,
        values: Vec<Vec<f64>>,
        left: Vec<Vec<f64>>,
        resets: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        debug_assert_eq!(grid.len(), left.len());
        debug_assert_eq!(grid.len(), resets.len());
        debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        DiffusionPath {
            grid,
            values,
            left,
            resets,
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn left_values(&self) -> &[Vec<f64>] {
        &self.left
    }

    pub fn reset_markers(&self) -> &[bool] {
        &self.resets
    }

    pub fn dimension(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn final_state(&self) -> &[f64] {
        self.values.last().map_or(&[], Vec::as_slice)
    }

    /// Coordinate `i` of the state at `s`, linearly interpolated between grid
    /// nodes. `Side::Left` reads the pre-reset value at a reset node.
    pub fn state_at(&self, i: usize, s: f64, side: Side) -> f64 {
        let grid = &self.grid;
        let last = grid.len() - 1;
        if s <= grid[0] {
            return self.values[0][i];
        }
        if s >= grid[last] {
            return match side {
                Side::Left if s == grid[last] => self.left[last][i],
                _ => self.values[last][i],
            };
        }
        // grid[k] <= s < grid[k + 1]
        let k = grid.partition_point(|&g| g <= s) - 1;
        if s == grid[k] {
            return match side {
                Side::Left => self.left[k][i],
                Side::Right => self.values[k][i],
            };
        }
        let (g0, g1) = (grid[k], grid[k + 1]);
        let (x0, x1) = (self.values[k][i], self.left[k + 1][i]);
        x0 + (x1 - x0) * (s - g0) / (g1 - g0)
    }
}

/// Per-path log Doléans-Dade weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub path_id: u64,
    /// `-inf` exactly when `hit_zero`.
    pub log_weight: f64,
    pub hit_zero: bool,
    pub quadrature_error_estimate: f64,
}

impl WeightRecord {
    pub fn weight(&self) -> f64 {
        if self.hit_zero {
            0.0
        } else {
            self.log_weight.exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriterionId {
    C23,
    C24,
    C25,
    C26,
    #[serde(rename = "AFFINE_31")]
    Affine31,
    #[serde(rename = "NOVIKOV_32")]
    Novikov32,
    #[serde(rename = "PHI_35")]
    Phi35,
    #[serde(rename = "BOUND_36")]
    Bound36,
    #[serde(rename = "HAWKES_36")]
    Hawkes36,
    #[serde(rename = "SERIES_37")]
    Series37,
}

impl CriterionId {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::C23 => "C23",
            CriterionId::C24 => "C24",
            CriterionId::C25 => "C25",
            CriterionId::C26 => "C26",
            CriterionId::Affine31 => "AFFINE_31",
            CriterionId::Novikov32 => "NOVIKOV_32",
            CriterionId::Phi35 => "PHI_35",
            CriterionId::Bound36 => "BOUND_36",
            CriterionId::Hawkes36 => "HAWKES_36",
            CriterionId::Series37 => "SERIES_37",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    FiniteEvidence,
    ClosedFormFinite,
    Divergent,
    Convergent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::FiniteEvidence => "finite-evidence",
            Verdict::ClosedFormFinite => "closed-form-finite",
            Verdict::Divergent => "divergent",
            Verdict::Convergent => "convergent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of one integrability or closed-form check.
///
/// `std_error` and `n_samples` are present exactly when Monte Carlo was used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion_id: CriterionId,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n_samples: Option<usize>,
    pub verdict: Verdict,
    pub stability_flag: bool,
}

impl CriterionReport {
    pub fn closed_form(criterion_id: CriterionId, value: f64, verdict: Verdict) -> Self {
        CriterionReport {
            criterion_id,
            value,
            std_error: None,
            n_samples: None,
            verdict,
            stability_flag: false,
        }
    }

    /// True for a finite-evidence or closed-form-finite verdict without a
    /// heavy-tail warning.
    pub fn supports_finiteness(&self) -> bool {
        matches!(self.verdict, Verdict::FiniteEvidence | Verdict::ClosedFormFinite)
            && !self.stability_flag
    }
}
