use std::path::{Path, PathBuf};

use augport::augment::{
    augment_prices, estimate_volatility, noisified_returns, AugmentationScheme, SchemeKind, DEFAULT_VOL_WINDOW,
};
use augport::noise::NoiseSource;
use clap::Args;
use serde::Serialize;

use super::{load_or_simulate, usage};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{num, write_csv};

#[derive(Args, Debug, Serialize)]
pub struct AugmentArgs {
    /// Price CSV; a simulated GBM path when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    /// none, additive, naive or proposed.
    #[arg(long)]
    pub scheme: Option<String>,
    /// `rho`, `rho0` or `c` depending on the scheme.
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub vol_window: Option<usize>,
    /// Augmented copies to write.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(config: Option<&Path>, args: AugmentArgs) -> CliResult<()> {
    let s = Settings::resolve("augment", config, &args)?;
    let series = load_or_simulate(&s, s.or("steps", 400)?)?;
    let kind: SchemeKind = s.or("scheme", "proposed".to_string())?.parse()?;
    let strength = if kind == SchemeKind::None { 0.0 } else { s.require("strength")? };
    let scheme = AugmentationScheme::new(kind, strength)?;
    let vol = match kind {
        SchemeKind::ProposedMultiplicative => {
            Some(estimate_volatility(&series.returns(), s.or("vol_window", DEFAULT_VOL_WINDOW)?)?)
        }
        _ => None,
    };
    let draws: usize = s.or("draws", 1)?;
    if draws == 0 {
        return Err(usage("--draws must be at least 1"));
    }
    let noise = NoiseSource::new(s.seed()?).derive("augment");

    let mut rows = Vec::with_capacity(draws * series.len());
    for d in 0..draws {
        let z = augment_prices(&series, &scheme, vol.as_ref(), &mut noise.stream(d as u64))?;
        let r = noisified_returns(&z, &series)?;
        for (t, price) in z.iter().enumerate() {
            rows.push(vec![
                d.to_string(),
                t.to_string(),
                num(series.prices()[t]),
                num(*price),
                r.get(t).map(|x| num(*x)).unwrap_or_default(),
            ]);
        }
    }
    write_csv(
        s.get::<PathBuf>("out")?.as_deref(),
        &s.csv_banner()?,
        &["draw", "t", "original", "augmented", "return"],
        rows,
    )
}
