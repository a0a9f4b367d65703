//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::fs;
use std::time::Instant;

use cmeasure::config::{ScenarioConfig, Statistic};
use cmeasure::criteria::{affine_bound_36, check_c26, MonteCarlo};
use cmeasure::intensity::{AlphaFamily, IntensitySpec, Kernel, Link, ResetOuParams, SequenceRule};
use cmeasure::likelihood::{log_weight, weight_positivity_audit, Window};
use cmeasure::rng::{path_stream, Purpose};
use cmeasure::runner::{run, Command};
use cmeasure::simulate::{simulate_aux, simulate_law, OuMode};
use cmeasure::verify::{
    explosion_probe, gaussian_bound_check, ou_moment_check, phi_functional, poisson_oracles, scenario_sample,
    unit_mean_test, weighted_law_vs_direct,
};

type Outcome = Result<(bool, String), cmeasure::Error>;
type Criterion = (&'static str, fn() -> Outcome);

fn unit() -> IntensitySpec {
    IntensitySpec::unit(1)
}

fn within(x: f64, target: f64, se: f64, k: f64) -> bool {
    (x - target).abs() <= k * se
}

fn unit_mean_affine() -> Outcome {
    let started = Instant::now();
    let mu = IntensitySpec::ExactAffine { alpha: 0.5, beta: 0.3, dim: 1 };
    let test = unit_mean_test(&ScenarioConfig::new(unit(), mu, 1.0, 100_000, 1))?;
    let e = test.estimate;
    let secs = started.elapsed().as_secs_f64();
    let ok = within(e.mean, 1.0, e.std_error, 3.0) && e.std_error <= 0.01 && secs < 60.0;
    Ok((ok, format!("mean {:.5} ± {:.5}, {secs:.1}s", e.mean, e.std_error)))
}

fn phi_closed_form() -> Outcome {
    let e = std::f64::consts::E;
    let one = phi_functional(1, 0.5, 1, 1.0, 100_000, 2)?;
    let zero = phi_functional(0, 0.5, 1, 1.0, 100_000, 3)?;
    let ok = within(one.mean, 4.0 / e, one.std_error, 3.0) && within(zero.mean, 2.0 / e, zero.std_error, 3.0);
    Ok((
        ok,
        format!(
            "n=1 {:.5} ± {:.5} (4/e {:.5}); n=0 {:.5} ± {:.5} (2/e {:.5})",
            one.mean,
            one.std_error,
            4.0 / e,
            zero.mean,
            zero.std_error,
            2.0 / e
        ),
    ))
}

fn affine_bound() -> Outcome {
    let mu = IntensitySpec::ExactAffine { alpha: 0.5, beta: 0.5, dim: 1 };
    let report = check_c26(&mu, Window::new(0.0, 1.0)?, &MonteCarlo::new(100_000, 4))?;
    let bound = affine_bound_36(1, 0.5, 1, 0.0, 1.0)?;
    let se = report.std_error.unwrap_or(f64::NAN);
    let ok = (bound - 4.0 / std::f64::consts::E).abs() < 1e-12 && report.value <= bound + 3.0 * se;
    Ok((ok, format!("estimate {:.5} ± {se:.5}, bound {bound:.5}", report.value)))
}

fn ou_moments() -> Outcome {
    let exact = ou_moment_check(0.0, -1.0, 1.0, 1.0, 1.0, 100_000, OuMode::Exact { step: 1.0 }, 5)?;
    let euler = ou_moment_check(0.0, -1.0, 1.0, 1.0, 1.0, 100_000, OuMode::Euler { step: 1e-3 }, 6)?;
    let mean_target = (-1f64).exp();
    let var_target = (1.0 - (-2f64).exp()) / 2.0;
    let ok = within(exact.mean.mean, mean_target, exact.mean.std_error, 3.0)
        && within(exact.variance, var_target, exact.variance_se, 4.0)
        && euler.euler_within_1pct == Some(true);
    let (cm, cv) = euler.coupled_exact.unwrap_or((f64::NAN, f64::NAN));
    Ok((
        ok,
        format!(
            "mean {:.5} ± {:.5}, var {:.5} ± {:.5}; euler {:.5}/{:.5} vs exact {cm:.5}/{cv:.5}",
            exact.mean.mean, exact.mean.std_error, exact.variance, exact.variance_se, euler.mean.mean, euler.variance
        ),
    ))
}

fn explosion_dichotomy() -> Outcome {
    let started = Instant::now();
    let geometric = AlphaFamily::geometric(1.0, 2.0)?;
    let mut cfg = ScenarioConfig::new(
        unit(),
        IntensitySpec::PiecewiseBirth { alphas: geometric.clone() },
        5.0,
        100_000,
        7,
    );
    cfg.event_cap = 200;
    let a = unit_mean_test(&cfg)?.estimate;
    let probe = explosion_probe(&geometric, 5.0, 100_000, 200, 8)?;
    let combined = a.combined_se(&probe.mass);
    let part_a = a.mean < 1.0
        && (1.0 - a.mean) > 10.0 * a.std_error
        && within(1.0 - a.mean, probe.mass.mean, combined, 3.0);

    cfg.mu = IntensitySpec::PiecewiseBirth { alphas: AlphaFamily::constant(1.0)? };
    let b = unit_mean_test(&cfg)?.estimate;
    let part_b = within(b.mean, 1.0, b.std_error, 3.0);
    let secs = started.elapsed().as_secs_f64();
    Ok((
        part_a && part_b && secs < 120.0,
        format!(
            "2^n: mean {:.5} ± {:.5}, 1-mean vs mass {:.5} ± {:.5}; 1: mean {:.5} ± {:.5}; {secs:.1}s",
            a.mean, a.std_error, probe.mass.mean, probe.mass.std_error, b.mean, b.std_error
        ),
    ))
}

fn hawkes(baseline: Vec<f64>) -> IntensitySpec {
    IntensitySpec::Hawkes {
        links: vec![Link::Abs],
        kernels: vec![vec![Kernel::Exponential { amplitude: 0.5, decay: 1.0 }]],
        baseline,
    }
}

fn law_equivalence() -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;
    for (label, target) in [("no baseline", hawkes(vec![])), ("baseline 1", hawkes(vec![1.0]))] {
        let cfg = ScenarioConfig::new(unit(), target.clone(), 2.0, 200_000, 9);
        let cmp = weighted_law_vs_direct(&cfg, &target, Statistic::CountMarginal)?;
        ok &= cmp.value < 0.02;
        out.push(format!("{label}: TV {:.5} (se bound {:.5})", cmp.value, cmp.combined_se));
    }
    Ok((ok, out.join("; ")))
}

fn poisson() -> Outcome {
    let o = poisson_oracles(1.0, std::f64::consts::LN_2, 0.5, 1_000_000, 10)?;
    let ok = within(o.mgf.mean, std::f64::consts::E, o.mgf.std_error, 3.0) && o.zlogz.finite_evidence();
    Ok((
        ok,
        format!(
            "mgf {:.5} ± {:.5}; zlogz {:.5} ± {:.5}, flag {}",
            o.mgf.mean, o.mgf.std_error, o.zlogz.estimate.mean, o.zlogz.estimate.std_error, o.zlogz.stability_flag
        ),
    ))
}

fn gaussian() -> Outcome {
    let mut cells = 0;
    let mut failures = Vec::new();
    for d in [1usize, 2] {
        let sigma: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for c in [0.05, 0.1] {
            for eps in [0.3, 0.5] {
                for m in [0.0, 1.0] {
                    let g = gaussian_bound_check(&vec![m; d], &sigma, c, eps, 100_000, 11 + cells)?;
                    cells += 1;
                    if !g.holds {
                        failures.push(format!("d={d} c={c} eps={eps} xi={m}: {} > {}", g.lhs.mean, g.rhs));
                    }
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cells} cells hold")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

fn positivity() -> Outcome {
    let positive = [
        IntensitySpec::Constant { rates: vec![2.0] },
        IntensitySpec::ExactAffine { alpha: 0.5, beta: 0.3, dim: 1 },
        IntensitySpec::PiecewiseBirth {
            alphas: AlphaFamily::new(SequenceRule::Affine { intercept: 1.0, slope: 0.5 })?,
        },
        hawkes(vec![1.0]),
    ];
    let mut ok = true;
    let mut out = Vec::new();
    for mu in positive {
        let sample = scenario_sample(&ScenarioConfig::new(unit(), mu.clone(), 1.0, 100_000, 12))?;
        let records: Vec<_> = sample.iter().map(|w| w.record).collect();
        let audit = weight_positivity_audit(&records, &mu)?;
        ok &= audit.strictly_positive && audit.zero_fraction.mean == 0.0;
        out.push(format!("{} {}", mu.family_name(), audit.zero_fraction.mean));
    }
    let zero = IntensitySpec::Constant { rates: vec![0.0] };
    let sample = scenario_sample(&ScenarioConfig::new(unit(), zero.clone(), 1.0, 100_000, 13))?;
    let records: Vec<_> = sample.iter().map(|w| w.record).collect();
    let f = weight_positivity_audit(&records, &zero)?.zero_fraction;
    let target = 1.0 - (-1f64).exp();
    ok &= within(f.mean, target, f.std_error, 3.0);
    out.push(format!("zero {:.5} ± {:.5} (1-1/e {target:.5})", f.mean, f.std_error));
    Ok((ok, out.join(", ")))
}

struct Family {
    name: &'static str,
    lambda: IntensitySpec,
    mu: IntensitySpec,
    /// `mu + nu` for the two-stage identity, when the catalog has it.
    raised: Option<IntensitySpec>,
}

fn families() -> Result<Vec<Family>, cmeasure::Error> {
    Ok(vec![
        Family {
            name: "constant",
            lambda: IntensitySpec::unit(2),
            mu: IntensitySpec::Constant { rates: vec![2.0, 0.5] },
            raised: Some(IntensitySpec::Constant { rates: vec![3.0, 0.75] }),
        },
        Family {
            name: "affine",
            lambda: unit(),
            mu: IntensitySpec::ExactAffine { alpha: 0.5, beta: 0.3, dim: 1 },
            raised: Some(IntensitySpec::AffineCount { alpha: 1.0, beta: 0.5, dim: 1 }),
        },
        Family {
            name: "birth",
            lambda: unit(),
            mu: IntensitySpec::PiecewiseBirth {
                alphas: AlphaFamily::new(SequenceRule::Polynomial { scale: 1.0, power: 0.5 })?,
            },
            raised: Some(IntensitySpec::PiecewiseBirth {
                alphas: AlphaFamily::new(SequenceRule::Polynomial { scale: 2.0, power: 0.5 })?,
            }),
        },
        Family {
            name: "hawkes",
            lambda: unit(),
            mu: hawkes(vec![1.0]),
            raised: Some(hawkes(vec![1.5])),
        },
        Family {
            name: "resetou",
            lambda: unit(),
            mu: IntensitySpec::ResetOu(ResetOuParams::constant(1.0, 0.5, -1.0, 0.5)?),
            raised: None,
        },
    ])
}

fn pathwise_identities() -> Outcome {
    let (horizon, step, n) = (2.0, 1e-3, 1000u64);
    let mut ok = true;
    let mut out = Vec::new();
    for fam in families()? {
        let mut worst_add = 0.0f64;
        let mut worst_two = 0.0f64;
        for id in 0..n {
            let seed = 1_000 + id;
            let path = simulate_law(&fam.lambda, horizon, 10_000, &mut path_stream(seed, Purpose::Base, id))?;
            let aux = simulate_aux(&fam.mu, &path, step, &mut path_stream(seed, Purpose::Diffusion, id))?;
            let split = 0.1 + 1.8 * (id as f64 + 0.5) / n as f64;
            let whole = log_weight(&path, &fam.lambda, &fam.mu, aux.as_ref(), Window::new(0.0, horizon)?, step)?;
            let left = log_weight(&path, &fam.lambda, &fam.mu, aux.as_ref(), Window::new(0.0, split)?, step)?;
            let right = log_weight(&path, &fam.lambda, &fam.mu, aux.as_ref(), Window::new(split, horizon)?, step)?;
            let gap = (whole.log_weight - left.log_weight - right.log_weight).abs();
            let tol = whole.quadrature_error_estimate
                + left.quadrature_error_estimate
                + right.quadrature_error_estimate
                + 1e-9 * (1.0 + whole.log_weight.abs());
            worst_add = worst_add.max(gap / tol);
            ok &= gap <= tol;

            if let Some(raised) = &fam.raised {
                let w = Window::new(0.0, horizon)?;
                let direct = log_weight(&path, &fam.lambda, raised, None, w, step)?;
                let first = log_weight(&path, &fam.lambda, &fam.mu, None, w, step)?;
                let second = log_weight(&path, &fam.mu, raised, None, w, step)?;
                let gap = (direct.log_weight - first.log_weight - second.log_weight).abs();
                let tol = direct.quadrature_error_estimate
                    + first.quadrature_error_estimate
                    + second.quadrature_error_estimate
                    + 1e-9 * (1.0 + direct.log_weight.abs());
                worst_two = worst_two.max(gap / tol);
                ok &= gap <= tol;
            }
        }
        out.push(if fam.raised.is_some() {
            format!("{} {worst_add:.3}/{worst_two:.3}", fam.name)
        } else {
            format!("{} {worst_add:.3}", fam.name)
        });
    }
    Ok((ok, format!("worst gap/tolerance (additivity/two-stage): {}", out.join(", "))))
}

fn reproducibility() -> Outcome {
    let mut weighted = ScenarioConfig::new(
        unit(),
        IntensitySpec::ResetOu(ResetOuParams::constant(1.0, 0.5, -1.0, 0.5)?),
        1.0,
        2_000,
        14,
    );
    weighted.quadrature_step = 1e-2;
    let mut simulated = ScenarioConfig::new(unit(), hawkes(vec![1.0]), 2.0, 2_000, 15);
    simulated.options.law = cmeasure::config::Law::Mu;
    let jobs = [
        (Command::Weight, &weighted, &["events.csv", "weights.csv", "paths.csv"][..]),
        (Command::Simulate, &simulated, &["events.csv"][..]),
    ];
    let mut ok = true;
    for (command, cfg, files) in jobs {
        let mut runs = Vec::new();
        for threads in [1, 4, 1] {
            let dir = tempfile::tempdir().map_err(cmeasure::Error::Io)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| cmeasure::Error::InvalidParameter {
                    field: "threads".into(),
                    reason: e.to_string(),
                })?;
            pool.install(|| run(command, cfg, dir.path()))?;
            let bytes: Vec<Vec<u8>> = files
                .iter()
                .map(|f| fs::read(dir.path().join(f)))
                .collect::<Result<_, _>>()?;
            runs.push(bytes);
        }
        ok &= runs.windows(2).all(|w| w[0] == w[1]);
    }
    Ok((ok, "weight and simulate artifacts across threads 1, 4, 1".into()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("unit mean, affine target", unit_mean_affine),
        ("phi closed form", phi_closed_form),
        ("affine exponential-moment bound", affine_bound),
        ("OU moments", ou_moments),
        ("explosion dichotomy", explosion_dichotomy),
        ("Hawkes law equivalence", law_equivalence),
        ("Poisson oracles", poisson),
        ("Gaussian bound grid", gaussian),
        ("weight positivity", positivity),
        ("pathwise identities", pathwise_identities),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (pass, detail) = match check() {
            Ok(result) => result,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name} [{:.1}s] {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
