use std::path::{Path, PathBuf};

use augport::metaopt::{bayes_theta, best_theta, minimax_theta, AugFamily, OmegaPrior, ThetaGrid, TrainingSets};
use augport::noise::NoiseSource;
use augport::portfolio::Constraint;
use augport::procgen::GbmParams;
use clap::Args;
use serde::Serialize;

use super::{gbm_from, usage};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{num, write_csv, write_json};

#[derive(Args, Debug, Serialize)]
pub struct MetaoptArgs {
    /// additive, naive or proposed.
    #[arg(long)]
    pub family: Option<String>,
    /// `best` (one model), `bayes` or `minimax` (over --models).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub theta_lo: Option<f64>,
    #[arg(long)]
    pub theta_hi: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub sets: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Candidate models `r:sigma`, comma separated.
    #[arg(long)]
    pub models: Option<String>,
    /// Prior weights for `bayes`, comma separated; uniform when absent.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// unbounded, box or long-only.
    #[arg(long)]
    pub constraint: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curve CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetaoptReport {
    family: String,
    mode: String,
    theta: f64,
    thetas: Vec<f64>,
    values: Vec<f64>,
    config_hash: String,
    seed: u64,
}

fn family(name: &str) -> CliResult<(AugFamily, f64, f64)> {
    Ok(match name {
        "additive" => (AugFamily::Additive, 0.005, 0.2),
        "naive" => (AugFamily::Naive, 0.002, 0.06),
        "proposed" => (AugFamily::ProposedScaled, 0.1, 3.0),
        other => return Err(usage(format!("unknown family `{other}`"))),
    })
}

fn constraint(name: &str) -> CliResult<Constraint> {
    Ok(match name {
        "unbounded" => Constraint::Unbounded,
        "box" => Constraint::Box,
        "long-only" => Constraint::LongOnly,
        other => return Err(usage(format!("unknown constraint `{other}`"))),
    })
}

fn models(s: &Settings, s0: f64) -> CliResult<Vec<GbmParams>> {
    let items: Vec<String> = s.list("models")?.ok_or_else(|| usage("--models is required for this mode"))?;
    items
        .iter()
        .map(|m| {
            let (r, sigma) = m
                .split_once(':')
                .ok_or_else(|| usage(format!("model `{m}` is not `r:sigma`")))?;
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| usage(format!("model `{m}`: {e}")));
            Ok(GbmParams::new(s0, parse(r)?, parse(sigma)?)?)
        })
        .collect()
}

pub fn run(config: Option<&Path>, args: MetaoptArgs) -> CliResult<()> {
    let s = Settings::resolve("metaopt", config, &args)?;
    let family_name: String = s.or("family", "additive".to_string())?;
    let (fam, lo, hi) = family(&family_name)?;
    let grid = ThetaGrid::linspace(s.or("theta_lo", lo)?, s.or("theta_hi", hi)?, s.or("grid", 40)?, fam)?;
    let seed = s.seed()?;
    let sets = TrainingSets::Sampled {
        n: s.or("sets", 500)?,
        steps: s.or("steps", 400)?,
        noise: NoiseSource::new(seed).derive("metaopt"),
    };
    let lambda = s.or("lambda", 1.0)?;
    let cons = constraint(&s.or("constraint", "unbounded".to_string())?)?;
    let mode: String = s.or("mode", "best".to_string())?;

    let (theta, values) = match mode.as_str() {
        "best" => {
            let (t, curve) = best_theta(&grid, &gbm_from(&s)?, lambda, &sets, cons)?;
            (t, curve.values)
        }
        "bayes" => {
            let support = models(&s, s.or("s0", 1.0)?)?;
            let prior = match s.list::<f64>("weights")? {
                Some(w) => OmegaPrior::new(support, w)?,
                None => OmegaPrior::uniform(support)?,
            };
            bayes_theta(&grid, &prior, lambda, &sets, cons)?
        }
        "minimax" => minimax_theta(&grid, &models(&s, s.or("s0", 1.0)?)?, lambda, &sets, cons)?,
        other => return Err(usage(format!("unknown mode `{other}`; expected best, bayes or minimax"))),
    };

    if let Some(path) = s.get::<PathBuf>("out")? {
        let rows = grid.values.iter().zip(&values).map(|(t, v)| vec![num(*t), num(*v)]);
        write_csv(Some(&path), &s.csv_banner()?, &["theta", "value"], rows)?;
    }
    let report = MetaoptReport {
        family: family_name,
        mode,
        theta,
        thetas: grid.values.clone(),
        values,
        config_hash: s.hash(),
        seed,
    };
    write_json(s.get::<PathBuf>("report")?.as_deref(), &report)
}
