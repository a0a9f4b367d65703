//! The closed catalog of intensity families and their predictable evaluation.
//!
//! Every family is evaluated from information strictly before the evaluation
//! time (counts `N_{t-}`, Hawkes history `s < t`, diffusion left limits), so
//! values at jump times are the predictable ones used for the jump factors of
//! the likelihood weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffusionPath, Side};

/// A real sequence `(x_n)_{n >= 0}` given by a closed-form rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceRule {
    Constant { value: f64 },
    /// `intercept + slope * n`
    Affine { intercept: f64, slope: f64 },
    /// `scale * (n + 1)^power`
    Polynomial { scale: f64, power: f64 },
    /// `scale * ratio^n`
    Geometric { scale: f64, ratio: f64 },
    /// Listed values, then `tail` evaluated at the absolute index.
    Explicit {
        values: Vec<f64>,
        tail: Box<SequenceRule>,
    },
}

impl SequenceRule {
    pub fn value(&self, n: usize) -> f64 {
        match self {
            SequenceRule::Constant { value } => *value,
            SequenceRule::Affine { intercept, slope } => intercept + slope * n as f64,
            SequenceRule::Polynomial { scale, power } => scale * ((n + 1) as f64).powf(*power),
            SequenceRule::Geometric { scale, ratio } => match i32::try_from(n) {
                Ok(k) => scale * ratio.powi(k),
                Err(_) => scale * ratio.powf(n as f64),
            },
            SequenceRule::Explicit { values, tail } => {
                values.get(n).copied().unwrap_or_else(|| tail.value(n))
            }
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            SequenceRule::Constant { value } => vec![*value],
            SequenceRule::Affine { intercept, slope } => vec![*intercept, *slope],
            SequenceRule::Polynomial { scale, power } => vec![*scale, *power],
            SequenceRule::Geometric { scale, ratio } => vec![*scale, *ratio],
            SequenceRule::Explicit { values, tail } => {
                let mut v = values.clone();
                v.extend(tail.params());
                v
            }
        }
    }

    fn validate_finite(&self, path: &str) -> Result<()> {
        if let SequenceRule::Explicit { tail, .. } = self {
            if matches!(**tail, SequenceRule::Explicit { .. }) {
                return Err(invariant(path, "explicit tail rule may not itself be explicit"));
            }
        }
        if self.params().iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(invariant(path, "sequence parameters must be finite"))
        }
    }

    /// True when no term of the sequence is zero.
    pub fn nonzero_everywhere(&self) -> bool {
        match self {
            SequenceRule::Constant { value } => *value != 0.0,
            SequenceRule::Affine { intercept, slope } => {
                if *slope == 0.0 {
                    *intercept != 0.0
                } else {
                    let root = -intercept / slope;
                    !(root >= 0.0 && root.fract() == 0.0)
                }
            }
            SequenceRule::Polynomial { scale, .. } => *scale != 0.0,
            SequenceRule::Geometric { scale, ratio } => *scale != 0.0 && *ratio != 0.0,
            SequenceRule::Explicit { values, tail } => {
                values.iter().all(|&v| v != 0.0) && tail.nonzero_everywhere()
            }
        }
    }

    fn positive_everywhere(&self) -> bool {
        match self {
            SequenceRule::Constant { value } => *value > 0.0,
            SequenceRule::Affine { intercept, slope } => *intercept > 0.0 && *slope >= 0.0,
            SequenceRule::Polynomial { scale, .. } => *scale > 0.0,
            SequenceRule::Geometric { scale, ratio } => *scale > 0.0 && *ratio > 0.0,
            SequenceRule::Explicit { values, tail } => {
                values.iter().all(|&v| v > 0.0) && tail.positive_everywhere()
            }
        }
    }
}

/// A sequence of strictly positive birth rates `alpha_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaFamily(pub SequenceRule);

impl AlphaFamily {
    pub fn new(rule: SequenceRule) -> Result<Self> {
        let family = AlphaFamily(rule);
        family.validate("alphas")?;
        Ok(family)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(SequenceRule::Constant { value })
    }

    pub fn geometric(scale: f64, ratio: f64) -> Result<Self> {
        Self::new(SequenceRule::Geometric { scale, ratio })
    }

    pub fn value(&self, n: usize) -> f64 {
        self.0.value(n)
    }

    pub fn rule(&self) -> &SequenceRule {
        &self.0
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.0.validate_finite(path)?;
        if self.0.positive_everywhere() {
            Ok(())
        } else {
            Err(invariant(path, "alpha_n must be positive for all n"))
        }
    }
}

/// Nonnegative link functions applied to a Hawkes excitation or a diffusion
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Link {
    Abs,
    Relu,
    /// `min(max(slope * x, 0), cap)`
    ClippedLinear { slope: f64, cap: f64 },
}

impl Link {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Link::Abs => x.abs(),
            Link::Relu => x.max(0.0),
            Link::ClippedLinear { slope, cap } => (slope * x).max(0.0).min(cap),
        }
    }

    /// Upper bound of `apply(x)` over all `x` with `|x| <= bound`.
    fn bound_given_abs(self, bound: f64) -> f64 {
        match self {
            Link::Abs | Link::Relu => bound,
            Link::ClippedLinear { slope, cap } => (slope.abs() * bound).min(cap),
        }
    }

    fn validate(self, path: &str) -> Result<()> {
        match self {
            Link::Abs | Link::Relu => Ok(()),
            Link::ClippedLinear { slope, cap } => {
                if slope.is_finite() && cap.is_finite() && cap >= 0.0 {
                    Ok(())
                } else {
                    Err(invariant(path, "clipped-linear needs finite slope and cap >= 0"))
                }
            }
        }
    }
}

/// Bounded Hawkes kernel `h_ij(u)`, `u >= 0`; `|h|` is nonincreasing in `u`
/// for every catalog member, which is what the thinning envelope relies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `amplitude * exp(-decay * u)`
    Exponential { amplitude: f64, decay: f64 },
    /// `level` on `[0, support)`, zero afterwards.
    Box { level: f64, support: f64 },
}

impl Kernel {
    /// Kernel value at lag `u`. The left limit at the end of a box support is
    /// `level`; the right value is 0.
    pub fn eval(self, u: f64, side: Side) -> f64 {
        match self {
            Kernel::Exponential { amplitude, decay } => amplitude * (-decay * u).exp(),
            Kernel::Box { level, support } => {
                let inside = match side {
                    Side::Left => u <= support,
                    Side::Right => u < support,
                };
                if u >= 0.0 && inside {
                    level
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sup_norm(self) -> f64 {
        match self {
            Kernel::Exponential { amplitude, .. } => amplitude.abs(),
            Kernel::Box { level, .. } => level.abs(),
        }
    }

    fn validate(self, path: &str) -> Result<()> {
        let ok = match self {
            Kernel::Exponential { amplitude, decay } => {
                amplitude.is_finite() && decay.is_finite() && decay >= 0.0
            }
            Kernel::Box { level, support } => {
                level.is_finite() && support.is_finite() && support > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invariant(path, "kernel must be bounded with nonnegative decay / positive support"))
        }
    }
}

/// Drift vector `A(eta, z)` of the linear SDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftForm {
    Constant { value: Vec<f64> },
    /// `A_i = scale_i * |eta|_1^exponent`
    CountPower { scale: Vec<f64>, exponent: f64 },
    /// `A_i = base_i + amplitude_i * exp(-rate * z_i)`
    AgeDecay {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        rate: f64,
    },
}

impl DriftForm {
    pub fn eval(&self, counts: &[usize], ages: &[f64]) -> Vec<f64> {
        match self {
            DriftForm::Constant { value } => value.clone(),
            DriftForm::CountPower { scale, exponent } => {
                let total = counts.iter().sum::<usize>() as f64;
                let f = total.powf(*exponent);
                scale.iter().map(|s| s * f).collect()
            }
            DriftForm::AgeDecay {
                base,
                amplitude,
                rate,
            } => base
                .iter()
                .zip(amplitude)
                .zip(ages)
                .map(|((b, a), z)| b + a * (-rate * z).exp())
                .collect(),
        }
    }

    fn check(&self, d: usize, path: &str) -> Result<()> {
        let (lens, scalars): (Vec<usize>, Vec<f64>) = match self {
            DriftForm::Constant { value } => (vec![value.len()], value.clone()),
            DriftForm::CountPower { scale, exponent } => {
                let mut s = scale.clone();
                s.push(*exponent);
                (vec![scale.len()], s)
            }
            DriftForm::AgeDecay {
                base,
                amplitude,
                rate,
            } => {
                let mut s = base.clone();
                s.extend(amplitude);
                s.push(*rate);
                (vec![base.len(), amplitude.len()], s)
            }
        };
        if lens.iter().any(|&l| l != d) {
            return Err(invariant(path, format!("drift must have dimension {d}")));
        }
        if !scalars.iter().all(|v| v.is_finite()) {
            return Err(invariant(path, "drift parameters must be finite"));
        }
        if let DriftForm::CountPower { exponent, .. } = self {
            if *exponent < 0.0 {
                return Err(invariant(path, "exponent must be nonnegative"));
            }
        }
        if let DriftForm::AgeDecay { rate, .. } = self {
            if *rate < 0.0 {
                return Err(invariant(path, "rate must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Mean-reversion matrix `B(eta, z)` of the linear SDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixForm {
    Constant { matrix: Vec<Vec<f64>> },
    /// `B_ij = base_ij + amplitude_ij * exp(-rate * z_i)`
    AgeDecay {
        base: Vec<Vec<f64>>,
        amplitude: Vec<Vec<f64>>,
        rate: f64,
    },
}

impl MatrixForm {
    pub fn eval(&self, _counts: &[usize], ages: &[f64]) -> Vec<Vec<f64>> {
        match self {
            MatrixForm::Constant { matrix } => matrix.clone(),
            MatrixForm::AgeDecay {
                base,
                amplitude,
                rate,
            } => base
                .iter()
                .zip(amplitude)
                .zip(ages)
                .map(|((brow, arow), z)| {
                    let f = (-rate * z).exp();
                    brow.iter().zip(arow).map(|(b, a)| b + a * f).collect()
                })
                .collect(),
        }
    }

    fn check(&self, d: usize, path: &str) -> Result<()> {
        let square = |m: &Vec<Vec<f64>>| {
            m.len() == d && m.iter().all(|r| r.len() == d && r.iter().all(|v| v.is_finite()))
        };
        let ok = match self {
            MatrixForm::Constant { matrix } => square(matrix),
            MatrixForm::AgeDecay {
                base,
                amplitude,
                rate,
            } => square(base) && square(amplitude) && rate.is_finite() && *rate >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invariant(path, format!("matrix must be a finite {d}x{d} matrix")))
        }
    }
}

/// Diffusion coefficient `sigma(eta, z)`; diagonal, so the Euler scheme is
/// already strong order one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionForm {
    Diagonal { values: Vec<f64> },
    /// `sigma = scale * (1 + |eta|_1)^exponent * I`
    CountPower { scale: f64, exponent: f64 },
}

impl DiffusionForm {
    /// Diagonal entries of `sigma`.
    pub fn eval(&self, counts: &[usize], d: usize) -> Vec<f64> {
        match self {
            DiffusionForm::Diagonal { values } => values.clone(),
            DiffusionForm::CountPower { scale, exponent } => {
                let total = counts.iter().sum::<usize>() as f64;
                vec![scale * (1.0 + total).powf(*exponent); d]
            }
        }
    }

    fn check(&self, d: usize, path: &str) -> Result<()> {
        let ok = match self {
            DiffusionForm::Diagonal { values } => {
                values.len() == d && values.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
            DiffusionForm::CountPower { scale, exponent } => {
                scale.is_finite() && *scale >= 0.0 && exponent.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invariant(path, format!("diffusion must be {d} finite nonnegative diagonal entries")))
        }
    }
}

/// Reset Ornstein-Uhlenbeck intensity parameters: between the `n`-th and
/// `(n+1)`-th jump, `dX = (a_n + b_n X) dt + sigma dW` started from `xi_n`;
/// the intensity is `|X_{t-}|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetOuParams {
    pub xi: SequenceRule,
    pub a: SequenceRule,
    pub b: SequenceRule,
    pub sigma: f64,
}

impl ResetOuParams {
    /// Constant coefficients in every inter-jump segment.
    pub fn constant(xi: f64, a: f64, b: f64, sigma: f64) -> Result<Self> {
        let p = ResetOuParams {
            xi: SequenceRule::Constant { value: xi },
            a: SequenceRule::Constant { value: a },
            b: SequenceRule::Constant { value: b },
            sigma,
        };
        p.validate("resetou")?;
        Ok(p)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.xi.validate_finite(&format!("{path}.xi"))?;
        self.a.validate_finite(&format!("{path}.a"))?;
        self.b.validate_finite(&format!("{path}.b"))?;
        if !self.b.nonzero_everywhere() {
            return Err(invariant(&format!("{path}.b"), "b_n must be nonzero"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invariant(&format!("{path}.sigma"), "sigma must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Linear SDE `dX = (A + B X) dt + sigma dW` driven by counts and ages, with
/// intensity `link(X_t)` applied coordinatewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSdeParams {
    pub drift: DriftForm,
    pub feedback: MatrixForm,
    pub diffusion: DiffusionForm,
    pub link: Link,
    pub x0: Vec<f64>,
}

impl LinearSdeParams {
    pub fn dimension(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let d = self.x0.len();
        if d == 0 || !self.x0.iter().all(|v| v.is_finite()) {
            return Err(invariant(&format!("{path}.x0"), "x0 must be a nonempty finite vector"));
        }
        self.drift.check(d, &format!("{path}.drift"))?;
        self.feedback.check(d, &format!("{path}.feedback"))?;
        self.diffusion.check(d, &format!("{path}.diffusion"))?;
        self.link.validate(&format!("{path}.link"))
    }
}

/// The intensity catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntensitySpec {
    Constant { rates: Vec<f64> },
    /// `mu^i = alpha + beta * sum_j N^j_{t-}`
    AffineCount {
        alpha: f64,
        beta: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Same intensity as `AffineCount`; marks scenarios where the closed forms
    /// for exactly-affine intensities apply.
    ExactAffine {
        alpha: f64,
        beta: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// `mu^i = baseline_i + link_i(sum_j int_0^{t-} h_ij(t - s) dN^j_s)`
    Hawkes {
        links: Vec<Link>,
        kernels: Vec<Vec<Kernel>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        baseline: Vec<f64>,
    },
    /// `mu = alpha_{N_{t-}}`, one-dimensional.
    PiecewiseBirth { alphas: AlphaFamily },
    #[serde(rename = "resetou")]
    ResetOu(ResetOuParams),
    LinearSde(LinearSdeParams),
}

fn one() -> usize {
    1
}

/// Whether the zero set of an intensity is avoided by every path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    /// The intensity is bounded below by a positive constant.
    ByConstruction,
    /// Zeros form a Lebesgue-null set almost surely.
    AlmostSure,
    /// Zeros may carry positive time.
    None,
}

impl IntensitySpec {
    pub fn unit(dim: usize) -> Self {
        IntensitySpec::Constant {
            rates: vec![1.0; dim],
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            IntensitySpec::Constant { .. } => "constant",
            IntensitySpec::AffineCount { .. } => "affine_count",
            IntensitySpec::ExactAffine { .. } => "exact_affine",
            IntensitySpec::Hawkes { .. } => "hawkes",
            IntensitySpec::PiecewiseBirth { .. } => "piecewise_birth",
            IntensitySpec::ResetOu(_) => "resetou",
            IntensitySpec::LinearSde(_) => "linear_sde",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            IntensitySpec::Constant { rates } => rates.len(),
            IntensitySpec::AffineCount { dim, .. } | IntensitySpec::ExactAffine { dim, .. } => *dim,
            IntensitySpec::Hawkes { links, .. } => links.len(),
            IntensitySpec::PiecewiseBirth { .. } | IntensitySpec::ResetOu(_) => 1,
            IntensitySpec::LinearSde(p) => p.dimension(),
        }
    }

    pub fn is_diffusion_driven(&self) -> bool {
        matches!(self, IntensitySpec::ResetOu(_) | IntensitySpec::LinearSde(_))
    }

    /// Constant between jumps, as a function of the count vector alone.
    pub fn is_count_driven(&self) -> bool {
        matches!(
            self,
            IntensitySpec::Constant { .. }
                | IntensitySpec::AffineCount { .. }
                | IntensitySpec::ExactAffine { .. }
                | IntensitySpec::PiecewiseBirth { .. }
        )
    }

    /// Simulable by thinning under its own law.
    pub fn directly_simulable(&self) -> bool {
        !self.is_diffusion_driven()
    }

    pub fn positivity(&self) -> Positivity {
        match self {
            IntensitySpec::Constant { rates } => {
                if rates.iter().all(|&r| r > 0.0) {
                    Positivity::ByConstruction
                } else {
                    Positivity::None
                }
            }
            IntensitySpec::AffineCount { alpha, .. } | IntensitySpec::ExactAffine { alpha, .. } => {
                if *alpha > 0.0 {
                    Positivity::ByConstruction
                } else {
                    Positivity::None
                }
            }
            IntensitySpec::PiecewiseBirth { .. } => Positivity::ByConstruction,
            IntensitySpec::Hawkes { baseline, links, .. } => {
                if baseline.len() == links.len() && baseline.iter().all(|&b| b > 0.0) {
                    Positivity::ByConstruction
                } else {
                    Positivity::None
                }
            }
            IntensitySpec::ResetOu(p) => {
                if p.sigma > 0.0 {
                    Positivity::AlmostSure
                } else {
                    Positivity::None
                }
            }
            IntensitySpec::LinearSde(_) => Positivity::None,
        }
    }

    /// Checks every catalog invariant; `path` prefixes the field path in the
    /// error (e.g. `mu` yields `mu.resetou.b`).
    pub fn validate(&self, path: &str) -> Result<()> {
        let here = format!("{path}.{}", self.family_name());
        match self {
            IntensitySpec::Constant { rates } => {
                if rates.is_empty() {
                    return Err(invariant(&format!("{here}.rates"), "need at least one rate"));
                }
                if !rates.iter().all(|r| r.is_finite() && *r >= 0.0) {
                    return Err(invariant(&format!("{here}.rates"), "rates must be finite and nonnegative"));
                }
            }
            IntensitySpec::AffineCount { alpha, beta, dim }
            | IntensitySpec::ExactAffine { alpha, beta, dim } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(invariant(&format!("{here}.alpha"), "alpha must be finite and nonnegative"));
                }
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(invariant(&format!("{here}.beta"), "beta must be finite and nonnegative"));
                }
                if *dim == 0 {
                    return Err(invariant(&format!("{here}.dim"), "dimension must be positive"));
                }
            }
            IntensitySpec::Hawkes {
                links,
                kernels,
                baseline,
            } => {
                let d = links.len();
                if d == 0 {
                    return Err(invariant(&format!("{here}.links"), "need at least one coordinate"));
                }
                for (i, l) in links.iter().enumerate() {
                    l.validate(&format!("{here}.links[{i}]"))?;
                }
                if kernels.len() != d || kernels.iter().any(|row| row.len() != d) {
                    return Err(invariant(&format!("{here}.kernels"), format!("kernels must be {d}x{d}")));
                }
                for (i, row) in kernels.iter().enumerate() {
                    for (j, k) in row.iter().enumerate() {
                        k.validate(&format!("{here}.kernels[{i}][{j}]"))?;
                    }
                }
                if !baseline.is_empty()
                    && (baseline.len() != d || !baseline.iter().all(|b| b.is_finite() && *b >= 0.0))
                {
                    return Err(invariant(
                        &format!("{here}.baseline"),
                        format!("baseline must hold {d} finite nonnegative values"),
                    ));
                }
            }
            IntensitySpec::PiecewiseBirth { alphas } => alphas.validate(&format!("{here}.alphas"))?,
            IntensitySpec::ResetOu(p) => p.validate(&here)?,
            IntensitySpec::LinearSde(p) => p.validate(&here)?,
        }
        Ok(())
    }

    /// Intensity of coordinate `i` given the counts strictly before the
    /// evaluation time. `None` for families that need more than counts.
    pub fn count_rate(&self, i: usize, counts: &[usize]) -> Option<f64> {
        match self {
            IntensitySpec::Constant { rates } => Some(rates[i]),
            IntensitySpec::AffineCount { alpha, beta, .. }
            | IntensitySpec::ExactAffine { alpha, beta, .. } => {
                Some(alpha + beta * counts.iter().sum::<usize>() as f64)
            }
            IntensitySpec::PiecewiseBirth { alphas } => Some(alphas.value(counts[0])),
            _ => None,
        }
    }

    /// Hawkes excitation of coordinate `i` at time `s` from `past`, which must
    /// contain only events at or before `s`.
    fn excitation(kernels: &[Vec<Kernel>], i: usize, past: &[(f64, usize)], s: f64, side: Side) -> f64 {
        past.iter()
            .map(|&(t, j)| kernels[i][j].eval(s - t, side))
            .sum()
    }

    /// Intensity of coordinate `i` at `s`.
    ///
    /// `past` holds the events that count for the requested side (strictly
    /// before `s` for `Side::Left`, at or before for `Side::Right`), and
    /// `counts` is their per-coordinate tally.
    pub fn value(
        &self,
        i: usize,
        s: f64,
        past: &[(f64, usize)],
        counts: &[usize],
        aux: Option<&DiffusionPath>,
        side: Side,
    ) -> Result<f64> {
        if let Some(v) = self.count_rate(i, counts) {
            return Ok(v);
        }
        match self {
            IntensitySpec::Hawkes {
                links,
                kernels,
                baseline,
            } => {
                let x = Self::excitation(kernels, i, past, s, side);
                Ok(baseline.get(i).copied().unwrap_or(0.0) + links[i].apply(x))
            }
            IntensitySpec::ResetOu(_) => {
                let aux = aux.ok_or(Error::MissingAux)?;
                Ok(aux.state_at(0, s, side).abs())
            }
            IntensitySpec::LinearSde(p) => {
                let aux = aux.ok_or(Error::MissingAux)?;
                Ok(p.link.apply(aux.state_at(i, s, side)))
            }
            _ => unreachable!("count-driven families handled above"),
        }
    }

    /// Upper bound of the total intensity on `(s, next event]` given the
    /// events at or before `s`. Only for directly simulable families.
    pub(crate) fn envelope(&self, s: f64, past: &[(f64, usize)], counts: &[usize]) -> f64 {
        let d = self.dimension();
        match self {
            IntensitySpec::Hawkes {
                links,
                kernels,
                baseline,
            } => (0..d)
                .map(|i| {
                    let bound: f64 = past
                        .iter()
                        .map(|&(t, j)| kernels[i][j].eval(s - t, Side::Right).abs())
                        .sum();
                    baseline.get(i).copied().unwrap_or(0.0) + links[i].bound_given_abs(bound)
                })
                .sum(),
            _ => (0..d)
                .map(|i| self.count_rate(i, counts).unwrap_or(f64::INFINITY))
                .sum(),
        }
    }

    /// Times in `(a, b)` where a Hawkes box kernel switches off.
    pub(crate) fn breakpoints(&self, i: usize, a: f64, b: f64, past: &[(f64, usize)]) -> Vec<f64> {
        match self {
            IntensitySpec::Hawkes { kernels, .. } => past
                .iter()
                .filter_map(|&(t, j)| match kernels[i][j] {
                    Kernel::Box { support, .. } => {
                        let end = t + support;
                        (end > a && end < b).then_some(end)
                    }
                    Kernel::Exponential { .. } => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Closed-form integral of a Hawkes intensity over `(a, b)` when the
    /// excitation has a fixed sign there (only exponential kernels of one
    /// sign, `abs` or `relu` link). `past` must hold all events up to `a`.
    pub(crate) fn hawkes_closed_integral(
        &self,
        i: usize,
        a: f64,
        b: f64,
        past: &[(f64, usize)],
    ) -> Option<f64> {
        let IntensitySpec::Hawkes {
            links,
            kernels,
            baseline,
        } = self
        else {
            return None;
        };
        let mut sign = 0.0f64;
        for k in &kernels[i] {
            match *k {
                Kernel::Exponential { amplitude, .. } => {
                    if amplitude != 0.0 {
                        let s = amplitude.signum();
                        if sign != 0.0 && s != sign {
                            return None;
                        }
                        sign = s;
                    }
                }
                Kernel::Box { .. } => return None,
            }
        }
        let factor = match links[i] {
            Link::Abs => sign,
            Link::Relu => {
                if sign > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Link::ClippedLinear { .. } => return None,
        };
        let mut excitation = 0.0;
        for &(t, j) in past {
            if let Kernel::Exponential { amplitude, decay } = kernels[i][j] {
                excitation += if decay == 0.0 {
                    amplitude * (b - a)
                } else {
                    amplitude * ((-decay * (a - t)).exp() - (-decay * (b - t)).exp()) / decay
                };
            }
        }
        Some(baseline.get(i).copied().unwrap_or(0.0) * (b - a) + factor * excitation)
    }
}

fn invariant(path: &str, reason: impl Into<String>) -> Error {
    Error::Invariant {
        path: path.to_string(),
        reason: reason.into(),
    }
}
