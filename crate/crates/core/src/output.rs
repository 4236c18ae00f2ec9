//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::ensemble::{EnsembleResult, SweepAxis, SweepResult};
use crate::error::Result;
use crate::observables::TimeSeries;

pub const TIMESERIES_HEADER: &str = "t,p_exc,gamma_tot,gamma_inst,p_exc_stderr,gamma_tot_stderr";
pub const SUMMARY_HEADER: &str = "N,a,mode,param,order,peak_value,peak_time,is_burst,p_sub,gamma_dot0,n_exc_crit,eta_crit,beta";

/// Shortest round-trip decimal; NaN prints as an empty field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn timeseries_csv(s: &TimeSeries) -> String {
    let mut out = String::with_capacity(64 * (s.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for i in 0..s.len() {
        let se = |v: &Option<Vec<f64>>| v.as_ref().map(|x| fmt_f64(x[i])).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(s.t[i]),
            fmt_f64(s.p_exc[i]),
            fmt_f64(s.gamma_tot[i]),
            fmt_f64(s.gamma_inst[i]),
            se(&s.p_exc_stderr),
            se(&s.gamma_tot_stderr)
        ));
    }
    out
}

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub a: f64,
    pub mode: String,
    pub param: Option<f64>,
    /// Cumulant order, or the exact method's name.
    pub order: String,
    pub peak_value: f64,
    pub peak_time: f64,
    pub is_burst: bool,
    pub p_sub: Option<f64>,
    pub gamma_dot0: f64,
    pub n_exc_crit: Option<f64>,
    pub eta_crit: Option<f64>,
    pub beta: Option<f64>,
}

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            fmt_f64(self.a),
            self.mode,
            fmt_opt(self.param),
            self.order,
            fmt_f64(self.peak_value),
            fmt_f64(self.peak_time),
            self.is_burst,
            fmt_opt(self.p_sub),
            fmt_f64(self.gamma_dot0),
            fmt_opt(self.n_exc_crit),
            fmt_opt(self.eta_crit),
            fmt_opt(self.beta)
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub n_samples: usize,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepAxis>>,
}

impl Provenance {
    /// The hash ignores `output_dir`, which does not affect any result.
    pub fn new(config: &RunConfig, n_samples: usize) -> Self {
        let mut hashed = config.clone();
        hashed.output_dir = Default::default();
        Self {
            config_hash: sha256_hex(hashed.canonical_json().as_bytes()),
            seed: config.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            n_samples,
            config: serde_json::to_value(config).expect("config serializes"),
            sweep: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("provenance serializes") + "\n"
    }
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".partial-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Paths written by one `run`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputBundle {
    pub timeseries: PathBuf,
    pub summary: PathBuf,
    pub provenance: PathBuf,
}

impl OutputBundle {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            timeseries: dir.join("timeseries.csv"),
            summary: dir.join("summary.csv"),
            provenance: dir.join("provenance.json"),
        }
    }
}

/// Write `timeseries.csv`, `summary.csv` and `provenance.json` into `dir`.
pub fn write_run(result: &EnsembleResult, dir: &Path) -> Result<OutputBundle> {
    let b = OutputBundle::in_dir(dir);
    write_atomic(&b.timeseries, timeseries_csv(&result.mean).as_bytes())?;
    write_atomic(&b.summary, summary_csv(&[result.summary_row(None)]).as_bytes())?;
    write_atomic(&b.provenance, result.provenance.to_json().as_bytes())?;
    Ok(b)
}

pub fn grid_csv(sweep: &SweepResult) -> String {
    let names: Vec<&str> = sweep.axes.iter().map(|a| a.name.as_str()).collect();
    let mut out = format!("point,{}\n", names.join(","));
    for (k, p) in sweep.points.iter().enumerate() {
        let vals: Vec<String> = p.coords.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!("{k},{}\n", vals.join(",")));
    }
    out
}

/// All time series of a sweep, keyed by grid point.
pub fn timeseries_long_csv(sweep: &SweepResult) -> String {
    let mut out = format!("point,{TIMESERIES_HEADER}\n");
    for (k, p) in sweep.points.iter().enumerate() {
        for line in timeseries_csv(&p.result.mean).lines().skip(1) {
            out.push_str(&format!("{k},{line}\n"));
        }
    }
    out
}

/// Sweep outputs: `summary.csv` (one row per point), `grid.csv`,
/// `timeseries_long.csv` and `provenance.json`.
pub fn write_sweep(sweep: &SweepResult, base: &RunConfig, dir: &Path) -> Result<OutputBundle> {
    let b = OutputBundle { timeseries: dir.join("timeseries_long.csv"), ..OutputBundle::in_dir(dir) };
    write_atomic(&b.summary, summary_csv(&sweep.summary_rows()).as_bytes())?;
    write_atomic(&dir.join("grid.csv"), grid_csv(sweep).as_bytes())?;
    write_atomic(&b.timeseries, timeseries_long_csv(sweep).as_bytes())?;
    let total = sweep.points.iter().map(|p| p.result.n_samples).sum();
    let mut prov = Provenance::new(base, total);
    prov.sweep = Some(sweep.axes.clone());
    write_atomic(&b.provenance, prov.to_json().as_bytes())?;
    Ok(b)
}
