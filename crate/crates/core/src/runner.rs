//! Subcommand execution: runs one scenario and writes its artifacts.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::config::{Law, ScenarioConfig, Statistic};
use crate::criteria::{affine_bound_comparison, hawkes_report, series_divergence, series_report, sweep_windows};
use crate::error::{Error, Result};
use crate::intensity::IntensitySpec;
use crate::likelihood::weight_positivity_audit;
use crate::model::{CriterionId, EventSequence, Verdict};
use crate::report::{
    sha256_hex, write_events_csv, write_paths_csv, write_weights_csv, Manifest, Summary, SummaryEntry,
};
use crate::rng::{path_stream, try_par_paths, Purpose};
use crate::simulate::{simulate_law, OuMode};
use crate::stats::Estimate;
use crate::verify::{
    cross_proposal_check, explosion_probe, gaussian_bound_check, ou_moment_check, poisson_oracles,
    scenario_sample, unit_mean_from, weighted_law_vs_direct, Outcome, WeightedPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Weight,
    Check,
    VerifyMartingale,
    Explosion,
    ImportanceSample,
    Oracles,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::Weight,
        Command::Check,
        Command::VerifyMartingale,
        Command::Explosion,
        Command::ImportanceSample,
        Command::Oracles,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Weight => "weight",
            Command::Check => "check",
            Command::VerifyMartingale => "verify-martingale",
            Command::Explosion => "explosion",
            Command::ImportanceSample => "importance-sample",
            Command::Oracles => "oracles",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid("command", format!("unknown subcommand `{s}`")))
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 when every check passed, 2 when a check failed.
    pub fn exit_code(&self) -> i32 {
        if self.summary.passed {
            0
        } else {
            2
        }
    }
}

/// Validates `config`, runs `command` and writes CSV, `summary.json` and
/// `manifest.json` files into `out_dir`.
pub fn run(command: Command, config: &ScenarioConfig, out_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let summary = match command {
        Command::Simulate => simulate(config, out_dir, &mut files)?,
        Command::Weight => weight(config, out_dir, &mut files)?,
        Command::Check => check(config)?,
        Command::VerifyMartingale => verify_martingale(config, out_dir, &mut files)?,
        Command::Explosion => explosion(config)?,
        Command::ImportanceSample => importance_sample(config)?,
        Command::Oracles => oracles(config)?,
    };
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, to_json(&summary)?)?;
    files.push(summary_path);

    let manifest = Manifest {
        command: command.as_str().into(),
        config_sha256: sha256_hex(config.to_toml()?.as_bytes()),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files: files
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, to_json(&manifest)?)?;
    files.push(manifest_path);
    Ok(RunOutcome { summary, files })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::invalid("summary", e.to_string()))
}

fn details<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

fn create(out_dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = out_dir.join(name);
    let file = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(file))
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn estimate_entry(id: &str, e: &Estimate, verdict: &str) -> SummaryEntry {
    SummaryEntry::new(id, e.mean, verdict).with_error(e.std_error, e.n)
}

fn simulate(config: &ScenarioConfig, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Summary> {
    let (spec, purpose) = match config.options.law {
        Law::Lambda => (&config.lambda, Purpose::Base),
        Law::Mu => (&config.mu, Purpose::Target),
    };
    if !spec.directly_simulable() {
        return Err(Error::NotDirectlySimulable(spec.family_name().into()));
    }
    let paths: Vec<EventSequence> = try_par_paths(config.n_paths, |id| {
        simulate_law(spec, config.horizon, config.event_cap, &mut path_stream(config.seed, purpose, id))
    })?;
    if config.output.events {
        write_events_csv(
            create(out_dir, "events.csv", files)?,
            paths.iter().enumerate().map(|(id, p)| (id as u64, p)),
        )?;
    }
    let counts: Vec<f64> = paths.iter().map(|p| p.total_count() as f64).collect();
    let truncated: Vec<f64> = paths.iter().map(|p| f64::from(u8::from(p.truncated()))).collect();
    let mean = Estimate::from_samples(&counts);
    let cut = Estimate::from_samples(&truncated);
    Ok(Summary {
        command: Command::Simulate.as_str().into(),
        passed: true,
        checks: vec![
            estimate_entry("MEAN_COUNT", &mean, "complete"),
            estimate_entry("TRUNCATED_FRACTION", &cut, "complete"),
        ],
        details: json!({ "law": config.options.law, "family": spec.family_name() }),
    })
}

fn write_weighted(
    config: &ScenarioConfig,
    sample: &[WeightedPath],
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    if config.output.events {
        write_events_csv(
            create(out_dir, "events.csv", files)?,
            sample.iter().map(|w| (w.record.path_id, &w.path)),
        )?;
    }
    if config.output.weights {
        write_weights_csv(create(out_dir, "weights.csv", files)?, sample.iter().map(|w| &w.record))?;
    }
    if config.output.paths {
        write_paths_csv(
            create(out_dir, "paths.csv", files)?,
            sample.iter().map(|w| (&w.path, &w.record)),
        )?;
    }
    Ok(())
}

fn weight(config: &ScenarioConfig, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Summary> {
    let sample = scenario_sample(config)?;
    write_weighted(config, &sample, out_dir, files)?;
    let records: Vec<_> = sample.iter().map(|w| w.record).collect();
    let audit = weight_positivity_audit(&records, &config.mu)?;
    let weights: Vec<f64> = records.iter().map(|r| r.weight()).collect();
    let mean = Estimate::from_samples(&weights);
    let quad = records
        .iter()
        .map(|r| r.quadrature_error_estimate)
        .fold(0.0, f64::max);
    Ok(Summary {
        command: Command::Weight.as_str().into(),
        passed: audit.consistent,
        checks: vec![
            estimate_entry("MEAN_WEIGHT", &mean, "complete").flagged(crate::stats::heavy_tail_flag(&weights)),
            estimate_entry("ZERO_WEIGHT_FRACTION", &audit.zero_fraction, pass_fail(audit.consistent)),
            SummaryEntry::new("MAX_QUADRATURE_ERROR", quad, "complete"),
        ],
        details: json!({ "positivity": details(&audit), "window": config.window() }),
    })
}

fn check(config: &ScenarioConfig) -> Result<Summary> {
    let mc = config.monte_carlo();
    let sweep = sweep_windows(&config.lambda, &config.mu, config.horizon, config.options.epsilon, &mc)?;
    let worst = &sweep.windows[sweep.worst];
    let mut checks = vec![SummaryEntry::from(&worst.first), SummaryEntry::from(&worst.second)];
    let mut passed = sweep.covered;
    let mut extra = serde_json::Map::new();
    match &config.mu {
        IntensitySpec::Hawkes { links, kernels, .. } => match hawkes_report(links, kernels) {
            Ok(report) => checks.push(SummaryEntry::from(&report)),
            Err(e @ Error::PhiBoundViolated { .. }) => {
                checks.push(SummaryEntry::new(CriterionId::Hawkes36.as_str(), f64::NAN, "fail"));
                extra.insert("hawkes".into(), json!(e.to_string()));
                passed = false;
            }
            Err(e) => return Err(e),
        },
        IntensitySpec::PiecewiseBirth { alphas } => checks.push(SummaryEntry::from(&series_report(alphas))),
        IntensitySpec::ExactAffine { alpha, beta, dim }
            if config.lambda == IntensitySpec::unit(*dim) =>
        {
            match affine_bound_comparison(*alpha, *beta, *dim, worst.window, &mc) {
                Ok(cmp) => {
                    checks.push(
                        SummaryEntry::new(CriterionId::Bound36.as_str(), cmp.bound, pass_fail(!cmp.exceeds))
                            .flagged(cmp.stability_flag),
                    );
                    extra.insert("bound".into(), details(&cmp));
                }
                Err(Error::DivergentRegime { product }) => {
                    checks.push(SummaryEntry::new(CriterionId::Bound36.as_str(), product, Verdict::Divergent.as_str()));
                }
                Err(e) => return Err(e),
            }
        }
        _ => {}
    }
    extra.insert("sweep".into(), details(&sweep));
    Ok(Summary {
        command: Command::Check.as_str().into(),
        passed,
        checks,
        details: serde_json::Value::Object(extra),
    })
}

fn verify_martingale(config: &ScenarioConfig, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Summary> {
    let sample = scenario_sample(config)?;
    write_weighted(config, &sample, out_dir, files)?;
    let test = unit_mean_from(&sample, config.n_paths)?;
    Ok(Summary {
        command: Command::VerifyMartingale.as_str().into(),
        passed: test.outcome != Outcome::Fail,
        checks: vec![estimate_entry("UNIT_MEAN", &test.estimate, test.outcome.as_str()).flagged(test.stability_flag)],
        details: details(&test),
    })
}

fn explosion(config: &ScenarioConfig) -> Result<Summary> {
    let alphas = match (&config.options.alphas, &config.mu) {
        (Some(a), _) => a.clone(),
        (None, IntensitySpec::PiecewiseBirth { alphas }) => alphas.clone(),
        _ => {
            return Err(Error::invalid(
                "options.alphas",
                "required unless mu is a piecewise_birth intensity",
            ))
        }
    };
    let probe = explosion_probe(&alphas, config.horizon, config.n_paths, config.event_cap, config.seed)?;
    let series = series_report(&alphas);
    let divergent = series_divergence(&alphas) == Verdict::Divergent;
    let no_mass = probe.mass.mean <= 3.0 * probe.mass.std_error;
    Ok(Summary {
        command: Command::Explosion.as_str().into(),
        passed: divergent && no_mass,
        checks: vec![
            SummaryEntry::from(&series),
            estimate_entry("EXPLOSION_MASS", &probe.mass, pass_fail(no_mass)),
            SummaryEntry::new(
                "CAP_SENSITIVITY",
                (probe.mass.mean - probe.half_cap_mass.mean).abs(),
                pass_fail(probe.cap_stable),
            ),
        ],
        details: json!({ "probe": details(&probe), "cap": config.event_cap }),
    })
}

fn importance_sample(config: &ScenarioConfig) -> Result<Summary> {
    let target = config.options.target.as_ref().unwrap_or(&config.mu);
    if let Some(bases) = config.options.bases {
        let cross = cross_proposal_check(target, bases, |p| p.total_count() as f64, config)?;
        return Ok(Summary {
            command: Command::ImportanceSample.as_str().into(),
            passed: cross.agree,
            checks: vec![SummaryEntry::new(
                "CROSS_PROPOSAL",
                (cross.first.mean - cross.second.mean).abs(),
                pass_fail(cross.agree),
            )
            .with_error(cross.first.combined_se(&cross.second), cross.first.n)],
            details: details(&cross),
        });
    }
    let statistic = config.options.statistic;
    let cmp = weighted_law_vs_direct(config, target, statistic)?;
    let (id, ok) = match statistic {
        Statistic::CountMarginal => ("LAW_TV", cmp.value < config.options.tv_tolerance),
        Statistic::MeanCount => ("LAW_MEAN_GAP", cmp.value <= 3.0 * cmp.combined_se),
    };
    Ok(Summary {
        command: Command::ImportanceSample.as_str().into(),
        passed: ok,
        checks: vec![SummaryEntry::new(id, cmp.value, pass_fail(ok)).with_error(cmp.combined_se, config.n_paths)],
        details: details(&cmp),
    })
}

fn oracles(config: &ScenarioConfig) -> Result<Summary> {
    let o = &config.options.oracles;
    let n = config.n_paths;
    let poisson = poisson_oracles(o.poisson_rate, o.mgf_c, o.zlogz_eps, n, config.seed)?;
    let d = o.gaussian_dim;
    let xi = vec![o.gaussian_mean; d];
    let sigma: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let gaussian = gaussian_bound_check(&xi, &sigma, o.gaussian_c, o.gaussian_eps, n, config.seed)?;
    let mode = match o.ou_euler_step {
        Some(step) => OuMode::Euler { step },
        None => OuMode::Exact { step: o.ou_time },
    };
    let ou = ou_moment_check(o.ou_a, o.ou_b, o.ou_sigma, o.ou_xi, o.ou_time, n, mode, config.seed)?;

    let mut checks = vec![
        estimate_entry("POISSON_MGF", &poisson.mgf, pass_fail(poisson.mgf_within)),
        estimate_entry(
            "POISSON_ZLOGZ",
            &poisson.zlogz.estimate,
            if poisson.zlogz.finite_evidence() {
                "finite-evidence"
            } else {
                "inconclusive"
            },
        )
        .flagged(poisson.zlogz.stability_flag),
        estimate_entry("GAUSSIAN_BOUND", &gaussian.lhs, pass_fail(gaussian.holds)),
        estimate_entry("OU_MEAN", &ou.mean, pass_fail(ou.mean_ok)),
        SummaryEntry::new("OU_VARIANCE", ou.variance, pass_fail(ou.variance_ok)).with_error(ou.variance_se, n),
    ];
    let mut passed = poisson.mgf_within && gaussian.holds && ou.mean_ok && ou.variance_ok;
    if let (Some(within), Some((m, _))) = (ou.euler_within_1pct, ou.coupled_exact) {
        checks.push(SummaryEntry::new("OU_EULER", (ou.mean.mean - m).abs(), pass_fail(within)));
        passed &= within;
    }
    Ok(Summary {
        command: Command::Oracles.as_str().into(),
        passed,
        checks,
        details: json!({
            "poisson": details(&poisson),
            "gaussian": details(&gaussian),
            "ou": details(&ou),
        }),
    })
}
