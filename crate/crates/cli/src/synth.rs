//! `gsopt synth`: planted two-view Gaussian data with its ground truth.

use std::fs;
use std::path::Path;

use gsopt_core::data::save_bin;
use gsopt_core::gcca::{synthetic_cca, GroundTruth, SyntheticSpec};
use serde::Serialize;

use crate::failure::{CliResult, Failure};

#[derive(Serialize)]
struct TruthEntry {
    canonical_correlations: Vec<f64>,
    tcc: f64,
    xbar: String,
}

#[derive(Serialize)]
struct Sidecar {
    dims: [usize; 2],
    samples: usize,
    seed: u64,
    views: [String; 2],
    /// Planted model.
    population: TruthEntry,
    /// Full-sample solution on the written views.
    sample: TruthEntry,
}

fn entry(t: &GroundTruth, file: &str) -> TruthEntry {
    TruthEntry {
        canonical_correlations: t.canonical_correlations.clone(),
        tcc: t.tcc_ref,
        xbar: file.into(),
    }
}

pub const SIDECAR: &str = "truth.toml";

/// Writes `view1.gsmx`, `view2.gsmx`, the reference solutions and the
/// `truth.toml` sidecar into `out`.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> CliResult<()> {
    let (n1, n2) = spec.dims;
    if n1 == 0 || n2 == 0 {
        return Err(Failure::config("view dimensions must be positive"));
    }
    let synth = synthetic_cca(spec)?;
    fs::create_dir_all(out).map_err(|e| Failure::io(out.display(), e))?;
    let save = |name: &str, m: &gsopt_core::DenseMatrix| -> CliResult<()> {
        let p = out.join(name);
        save_bin(&p, m).map_err(|e| Failure::io(p.display(), e))
    };
    save("view1.gsmx", synth.views[0].as_dense())?;
    save("view2.gsmx", synth.views[1].as_dense())?;
    save("xbar_population.gsmx", &synth.population_truth.xbar)?;
    save("xbar_sample.gsmx", &synth.sample_truth.xbar)?;
    let sidecar = Sidecar {
        dims: [n1, n2],
        samples: spec.n_samples,
        seed: spec.seed,
        views: ["view1.gsmx".into(), "view2.gsmx".into()],
        population: entry(&synth.population_truth, "xbar_population.gsmx"),
        sample: entry(&synth.sample_truth, "xbar_sample.gsmx"),
    };
    let body = toml::to_string(&sidecar).expect("sidecar serializes");
    let p = out.join(SIDECAR);
    fs::write(&p, body).map_err(|e| Failure::io(p.display(), e))
}
