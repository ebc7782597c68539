//! `quiver analyze`: dataset compressibility metrics.

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use crate::common::DatasetArgs;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Include the per-dimension and per-byte-position detail arrays.
    #[arg(long)]
    pub detail: bool,
}

#[derive(Serialize)]
struct AnalyzeReport {
    vectors: usize,
    dim: usize,
    global_dispersion: f64,
    dimensional_dispersion: f64,
    global_entropy: f64,
    columnar_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_dimension_stddev: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_column_entropy: Option<Vec<f64>>,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let data = args.dataset.load()?;
    let report = quiver::characterize::characterize(&data)?;
    let out = AnalyzeReport {
        vectors: data.count(),
        dim: data.dim(),
        global_dispersion: report.global_dispersion,
        dimensional_dispersion: report.dimensional_dispersion,
        global_entropy: report.global_entropy,
        columnar_entropy: report.columnar_entropy,
        per_dimension_stddev: args.detail.then(|| quiver::characterize::per_dimension_stddev(&data)),
        per_column_entropy: args.detail.then(|| quiver::characterize::per_column_entropy(&data)),
    };
    println!("{}", serde_json::to_string(&out)?);
    eprintln!(
        "{} vectors x {} dims: dispersion {:.3} global / {:.3} dimensional, entropy {:.3} global / {:.3} columnar bits",
        out.vectors, out.dim, out.global_dispersion, out.dimensional_dispersion,
        out.global_entropy, out.columnar_entropy
    );
    Ok(())
}
