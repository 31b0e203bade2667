pub mod augment;
pub mod backtest;
pub mod metaopt;
pub mod pipeline;
pub mod simulate;
pub mod train;
pub mod verify;

use std::path::PathBuf;

use augport::dataio::{load_price_csv, PriceSeries};
use augport::noise::NoiseSource;
use augport::procgen::{simulate_gbm, GbmParams};

use crate::config::Settings;
use crate::error::{CliError, CliResult};

/// Price series from `input` (column `column`, default `close`) or, when no
/// input is given, a simulated GBM path of `steps` steps.
pub fn load_or_simulate(s: &Settings, steps: usize) -> CliResult<PriceSeries> {
    match s.get::<PathBuf>("input")? {
        Some(path) => Ok(load_price_csv(&path, &s.or("column", "close".to_string())?)?),
        None => {
            let model = gbm_from(s)?;
            let noise = NoiseSource::new(s.seed()?).derive("prices");
            Ok(simulate_gbm(&model, steps, &mut noise.stream(0))?)
        }
    }
}

/// GBM parameters with the synthetic-experiment defaults.
pub fn gbm_from(s: &Settings) -> CliResult<GbmParams> {
    Ok(GbmParams::new(s.or("s0", 1.0)?, s.or("r", 0.005)?, s.or("sigma", 0.01)?)?)
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
