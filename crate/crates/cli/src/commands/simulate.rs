use std::path::{Path, PathBuf};

use augport::noise::NoiseSource;
use augport::procgen::{gbm_paths, heston_paths, GbmParams, HestonParams};
use clap::Args;
use serde::Serialize;

use super::usage;
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{num, write_csv};

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// `gbm` or `heston`.
    pub model: Option<String>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Initial Heston variance; defaults to `sigma^2`.
    #[arg(long)]
    pub nu0: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of paths, written as columns `price_0, price_1, ...`.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(config: Option<&Path>, args: SimulateArgs) -> CliResult<()> {
    let s = Settings::resolve("simulate", config, &args)?;
    let kind: String = s.require("model")?;
    let steps: usize = s.or("steps", 400)?;
    let count: usize = s.or("paths", 1)?;
    if count == 0 {
        return Err(usage("--paths must be at least 1"));
    }
    let noise = NoiseSource::new(s.seed()?).derive("simulate");
    let s0 = s.or("s0", 1.0)?;
    let r: f64 = s.require("r")?;

    let (columns, series): (Vec<String>, Vec<Vec<f64>>) = match kind.as_str() {
        "gbm" => {
            let params = GbmParams::new(s0, r, s.require("sigma")?)?;
            let paths = gbm_paths(&params, steps, count, &noise)?;
            let names = if count == 1 {
                vec!["price".to_string()]
            } else {
                (0..count).map(|i| format!("price_{i}")).collect()
            };
            (names, paths.iter().map(|p| p.prices().to_vec()).collect())
        }
        "heston" => {
            let nu0 = match s.get::<f64>("nu0")? {
                Some(v) => v,
                None => s.require::<f64>("sigma").map(|x| x * x)?,
            };
            let params = HestonParams {
                s0,
                r,
                nu0,
                kappa: s.or("kappa", 0.0)?,
                theta: s.or("theta", nu0)?,
                xi: s.or("xi", HestonParams::DEFAULT_XI)?,
                rho: s.or("rho", 0.0)?,
                dt: s.or("dt", 1.0)?,
            };
            params.validate()?;
            let paths = heston_paths(&params, steps, count, &noise)?;
            let mut names = Vec::new();
            let mut cols = Vec::new();
            for (i, p) in paths.iter().enumerate() {
                let suffix = if count == 1 { String::new() } else { format!("_{i}") };
                names.push(format!("price{suffix}"));
                names.push(format!("variance{suffix}"));
                cols.push(p.prices.prices().to_vec());
                cols.push(p.variance.clone());
            }
            (names, cols)
        }
        other => return Err(usage(format!("unknown model `{other}`; expected gbm or heston"))),
    };

    let mut header = vec!["t"];
    header.extend(columns.iter().map(String::as_str));
    let rows = (0..=steps).map(|t| {
        let mut row = vec![t.to_string()];
        row.extend(series.iter().map(|c| num(c[t])));
        row
    });
    write_csv(s.get::<PathBuf>("out")?.as_deref(), &s.csv_banner()?, &header, rows)
}
