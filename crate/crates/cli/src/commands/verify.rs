use std::path::{Path, PathBuf};

use augport::augment::{optimal_additive_variance, optimal_proposed_variances};
use augport::nntrain::{build_samples, train, AdamConfig, MlpModel, NoisePlan, TrainConfig};
use augport::noise::NoiseSource;
use augport::portfolio::{augmented_closed_form, merton_stationary, sign_strategy, Constraint};
use augport::procgen::simulate_gbm;
use augport::utility::{
    paired_se, true_utility_additive_mc, true_utility_mc, true_utility_no_aug, true_utility_proposed, McConfig,
};
use clap::Args;
use serde::Serialize;

use super::gbm_from;
use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::output::write_json;

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Steps per training set.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Monte Carlo training sets.
    #[arg(long)]
    pub sets: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path; the table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Row {
    check: String,
    closed_form: Option<f64>,
    estimate: f64,
    se: Option<f64>,
    /// Standard errors between estimate and target; for orderings, the gap.
    z: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    config_hash: String,
    seed: u64,
    rows: Vec<Row>,
    passed: bool,
}

fn agreement(check: &str, closed: f64, estimate: f64, se: f64) -> Row {
    let z = (estimate - closed) / se;
    Row {
        check: check.into(),
        closed_form: Some(closed),
        estimate,
        se: Some(se),
        z: Some(z),
        pass: z.abs() <= 3.0,
    }
}

fn ordering(check: &str, gap: f64, se: f64) -> Row {
    Row {
        check: check.into(),
        closed_form: None,
        estimate: gap,
        se: Some(se),
        z: Some(gap / se),
        pass: gap > 3.0 * se,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.6e}"))
}

pub fn run(config: Option<&Path>, args: VerifyArgs) -> CliResult<()> {
    let s = Settings::resolve("verify", config, &args)?;
    let model = gbm_from(&s)?;
    let lambda: f64 = s.or("lambda", 1.0)?;
    let seed = s.seed()?;
    let mc = McConfig {
        steps: s.or("steps", 400)?,
        n_train_sets: s.or("sets", 2000)?,
        ..Default::default()
    };
    // refuse degenerate models before any sampling
    let no_aug = true_utility_no_aug(&model, lambda)?;
    let proposed = true_utility_proposed(&model, lambda)?;
    let noise = NoiseSource::new(seed).derive("verify");

    let sign_mc = true_utility_mc(|t| Ok(sign_strategy(&t.returns()).weights), &model, lambda, &mc, &noise)?;
    let prop_mc = true_utility_mc(
        |t| {
            let g = optimal_proposed_variances(t, &model)?;
            Ok(augmented_closed_form(&t.returns(), t, lambda, &g, Constraint::Unbounded)?.weights)
        },
        &model,
        lambda,
        &mc,
        &noise,
    )?;
    let add_mc = true_utility_additive_mc(&model, lambda, &mc, &noise)?;
    let add_fit = true_utility_mc(
        |t| {
            let g = vec![optimal_additive_variance(t, &model)?; t.len() - 1];
            Ok(augmented_closed_form(&t.returns(), t, lambda, &g, Constraint::Unbounded)?.weights)
        },
        &model,
        lambda,
        &mc,
        &noise,
    )?;

    let mut rows = vec![
        agreement("no-aug utility", no_aug.value, sign_mc.report.value, sign_mc.report.se),
        agreement("proposed utility", proposed.value, prop_mc.report.value, prop_mc.report.se),
    ];
    let worst = add_mc
        .per_set
        .iter()
        .zip(&add_fit.per_set)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max);
    rows.push(Row {
        check: "additive per-set identity".into(),
        closed_form: Some(add_mc.report.value),
        estimate: add_fit.report.value,
        se: Some(add_fit.report.se),
        z: None,
        pass: worst <= 1e-9,
    });
    rows.push(ordering(
        "proposed > additive",
        prop_mc.report.value - add_mc.report.value,
        paired_se(&prop_mc.per_set, &add_mc.per_set)?,
    ));
    rows.push(ordering(
        "proposed > no-aug",
        prop_mc.report.value - sign_mc.report.value,
        paired_se(&prop_mc.per_set, &sign_mc.per_set)?,
    ));

    // a constant position trained under the proposed strengths
    let long = simulate_gbm(&model, 5 * mc.steps, &mut noise.derive("stationary").stream(0))?;
    let samples = build_samples(&long, 1, &NoisePlan::Theory {
        gamma_sq: optimal_proposed_variances(&long, &model)?,
    })?;
    let target = merton_stationary(&model, lambda)?;
    let tc = TrainConfig {
        lambda,
        minibatch: samples.len(),
        steps: 4000,
        adam: AdamConfig {
            learning_rate: 0.02 * target.abs().max(1.0),
            ..Default::default()
        },
        ..Default::default()
    };
    let fitted = train(MlpModel::constant(0.0), &samples, &tc)?.model.forward(&[])?;
    let rel = (fitted - target).abs() / target.abs();
    rows.push(Row {
        check: "stationary recovery".into(),
        closed_form: Some(target),
        estimate: fitted,
        se: None,
        z: None,
        pass: rel <= 0.02,
    });

    println!(
        "{:<28} {:>14} {:>14} {:>12} {:>8}  status",
        "check", "closed-form", "estimate", "se", "z"
    );
    for r in &rows {
        println!(
            "{:<28} {:>14} {:>14} {:>12} {:>8}  {}",
            r.check,
            opt(r.closed_form),
            format!("{:.6e}", r.estimate),
            opt(r.se),
            r.z.map_or("-".into(), |z| format!("{z:.2}")),
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let report = VerifyReport {
        config_hash: s.hash(),
        seed,
        passed: failed == 0,
        rows,
    };
    if let Some(path) = s.get::<PathBuf>("out")? {
        write_json(Some(&path), &report)?;
    }
    if failed > 0 {
        return Err(CliError::VerificationFailed(failed));
    }
    Ok(())
}
