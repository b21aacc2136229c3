//! Multi-seed experiments, sweeps, and their CSV and checkpoint output.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! config.toml           effective configuration
//! metrics.csv           median over seeds
//! seed_<n>/metrics.csv
//! seed_<n>/subdomain_<s>.ckpt
//! seed_<n>/coarse.ckpt  (two-level only)
//! ```
//!
//! A sweep directory holds one experiment directory per cell plus
//! `summary.csv`.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::IterationMetrics;
use crate::neuralnet::write_checkpoint;
use crate::schwarz::{init_run, run, SchwarzState};

/// Fixed leading columns of `metrics.csv`; per-subdomain loss columns
/// `s0`, `s1`, ... follow.
pub const METRICS_COLUMNS: [&str; 6] = [
    "iteration",
    "global_mse",
    "global_rel_l2",
    "max_interface_jump",
    "coarse_final_loss",
    "wall_seconds",
];

/// Shortest representation that parses back to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Other(format!("csv: {e}"))
}

fn metrics_header(subdomains: usize) -> Vec<String> {
    METRICS_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain((0..subdomains).map(|s| format!("s{s}")))
        .collect()
}

fn metrics_fields(m: &IterationMetrics) -> Vec<String> {
    let mut row = vec![
        m.iteration_index.to_string(),
        fmt_f64(m.global_mse),
        fmt_f64(m.global_rel_l2),
        fmt_f64(m.max_interface_jump),
        m.coarse_final_loss.map(fmt_f64).unwrap_or_default(),
        fmt_f64(m.wall_seconds),
    ];
    row.extend(m.per_subdomain_final_loss.iter().map(|&l| fmt_f64(l)));
    row
}

pub fn metrics_csv(series: &[IterationMetrics]) -> Result<String> {
    let subdomains = series.first().map_or(0, |m| m.per_subdomain_final_loss.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(metrics_header(subdomains)).map_err(csv_error)?;
    for m in series {
        if m.per_subdomain_final_loss.len() != subdomains {
            return Err(Error::Shape("metrics rows disagree on the subdomain count".into()));
        }
        w.write_record(metrics_fields(m)).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<IterationMetrics>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?.clone();
    let fixed = METRICS_COLUMNS.len();
    if header.len() < fixed || header.iter().take(fixed).ne(METRICS_COLUMNS.iter().copied()) {
        return Err(Error::Other(format!("unexpected metrics header {header:?}")));
    }
    let subdomains = header.len() - fixed;
    if header.iter().skip(fixed).ne((0..subdomains).map(|s| format!("s{s}"))) {
        return Err(Error::Other(format!("unexpected subdomain columns {header:?}")));
    }
    let num = |field: &str, col: &str| -> Result<f64> {
        field
            .parse::<f64>()
            .map_err(|e| Error::Other(format!("column {col}: `{field}`: {e}")))
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            let iteration_index = rec[0]
                .parse()
                .map_err(|e| Error::Other(format!("column iteration: `{}`: {e}", &rec[0])))?;
            Ok(IterationMetrics {
                iteration_index,
                global_mse: num(&rec[1], "global_mse")?,
                global_rel_l2: num(&rec[2], "global_rel_l2")?,
                max_interface_jump: num(&rec[3], "max_interface_jump")?,
                coarse_final_loss: match &rec[4] {
                    "" => None,
                    f => Some(num(f, "coarse_final_loss")?),
                },
                wall_seconds: num(&rec[5], "wall_seconds")?,
                per_subdomain_final_loss: (0..subdomains)
                    .map(|s| num(&rec[fixed + s], &header[fixed + s]))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// Median of a non-empty slice; the mean of the two middle values for an
/// even count.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pointwise median across seeds, field by field and iteration by
/// iteration.
pub fn median_series(series: &[Vec<IterationMetrics>]) -> Result<Vec<IterationMetrics>> {
    let first = series
        .first()
        .ok_or_else(|| Error::Other("median over zero seeds".into()))?;
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(Error::Shape("seed series have different lengths".into()));
    }
    (0..first.len())
        .map(|k| {
            let rows: Vec<&IterationMetrics> = series.iter().map(|s| &s[k]).collect();
            let field = |f: fn(&IterationMetrics) -> f64| median(&rows.iter().map(|m| f(m)).collect::<Vec<_>>());
            let subdomains = rows[0].per_subdomain_final_loss.len();
            if rows.iter().any(|m| {
                m.iteration_index != rows[0].iteration_index || m.per_subdomain_final_loss.len() != subdomains
            }) {
                return Err(Error::Shape(format!("seed series disagree at row {k}")));
            }
            let coarse: Option<Vec<f64>> = rows.iter().map(|m| m.coarse_final_loss).collect();
            Ok(IterationMetrics {
                iteration_index: rows[0].iteration_index,
                global_mse: field(|m| m.global_mse),
                global_rel_l2: field(|m| m.global_rel_l2),
                per_subdomain_final_loss: (0..subdomains)
                    .map(|s| median(&rows.iter().map(|m| m.per_subdomain_final_loss[s]).collect::<Vec<_>>()))
                    .collect(),
                coarse_final_loss: coarse.map(|c| median(&c)),
                max_interface_jump: field(|m| m.max_interface_jump),
                wall_seconds: field(|m| m.wall_seconds),
            })
        })
        .collect()
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes one checkpoint per network of `state` into `dir`.
pub fn write_checkpoints(state: &SchwarzState, dir: &Path) -> Result<()> {
    let save = |name: String, net| -> Result<()> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_checkpoint(net, BufWriter::new(file))
    };
    for (s, t) in state.locals.iter().enumerate() {
        save(format!("subdomain_{s}.ckpt"), &t.network)?;
    }
    if let Some(c) = &state.coarse {
        save("coarse.ckpt".into(), &c.network)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: Vec<IterationMetrics>,
    /// `(λ_f, λ_c)` in force at each recorded iteration.
    pub weight_history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<SeedRun>,
    pub median: Vec<IterationMetrics>,
}

/// Runs every seed of `config`. With `out` set, writes the directory
/// layout described in the module documentation.
pub fn run_experiment(
    config: &RunConfig,
    out: Option<&Path>,
    mut progress: impl FnMut(u64, &IterationMetrics),
) -> Result<ExperimentResult> {
    config.validate()?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("config.toml"), &config.to_toml_string())?;
    }
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let (state, metrics) = run(config, seed, |m| progress(seed, m))?;
        if let Some(dir) = out {
            let seed_dir = dir.join(format!("seed_{seed}"));
            create_dir(&seed_dir)?;
            write_file(&seed_dir.join("metrics.csv"), &metrics_csv(&metrics)?)?;
            write_checkpoints(&state, &seed_dir)?;
        }
        runs.push(SeedRun {
            seed,
            metrics,
            weight_history: state.weight_history,
        });
    }
    let all: Vec<Vec<IterationMetrics>> = runs.iter().map(|r| r.metrics.clone()).collect();
    let median = median_series(&all)?;
    if let Some(dir) = out {
        write_file(&dir.join("metrics.csv"), &metrics_csv(&median)?)?;
    }
    Ok(ExperimentResult { runs, median })
}

/// What a sweep varies.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// `(nx, ny)` per cell; sample totals stay fixed.
    Grids(Vec<(usize, usize)>),
    EpochsPerTraining(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub label: String,
    pub config: RunConfig,
    pub result: ExperimentResult,
}

/// One config per cell of the sweep, labelled.
pub fn sweep_configs(base: &RunConfig, axis: &SweepAxis) -> Result<Vec<(String, RunConfig)>> {
    let cells: Vec<(String, RunConfig)> = match axis {
        SweepAxis::Grids(grids) => grids
            .iter()
            .map(|&(nx, ny)| {
                let mut c = base.clone();
                c.decomposition.nx = nx;
                c.decomposition.ny = ny;
                (format!("grid_{nx}x{ny}"), c)
            })
            .collect(),
        SweepAxis::EpochsPerTraining(epochs) => epochs
            .iter()
            .map(|&e| {
                let mut c = base.clone();
                c.schedule.epochs_per_training = e;
                (format!("epochs_{e}"), c)
            })
            .collect(),
    };
    if cells.is_empty() {
        return Err(Error::config("sweep", "the sweep axis has no values"));
    }
    for (label, c) in &cells {
        c.validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(key, format!("{message} (cell {label})")),
            other => other,
        })?;
    }
    Ok(cells)
}

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "cell",
    "nx",
    "ny",
    "epochs_per_training",
    "iteration",
    "global_mse",
    "global_rel_l2",
    "max_interface_jump",
    "coarse_final_loss",
    "wall_seconds",
];

/// One row per `(cell, iteration)` of the median series.
pub fn summary_csv(cells: &[SweepCell]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS).map_err(csv_error)?;
    for cell in cells {
        for m in &cell.result.median {
            let metrics = metrics_fields(m);
            let mut row = vec![
                cell.label.clone(),
                cell.config.decomposition.nx.to_string(),
                cell.config.decomposition.ny.to_string(),
                cell.config.schedule.epochs_per_training.to_string(),
            ];
            row.extend(metrics.into_iter().take(METRICS_COLUMNS.len()));
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Runs every cell in order, each into `out/<label>` when `out` is set.
pub fn sweep(
    base: &RunConfig,
    axis: &SweepAxis,
    out: Option<&Path>,
    mut progress: impl FnMut(&str, u64, &IterationMetrics),
) -> Result<Vec<SweepCell>> {
    let configs = sweep_configs(base, axis)?;
    let mut cells = Vec::with_capacity(configs.len());
    for (label, config) in configs {
        let dir: Option<PathBuf> = out.map(|o| o.join(&label));
        let result = run_experiment(&config, dir.as_deref(), |seed, m| progress(&label, seed, m))?;
        cells.push(SweepCell { label, config, result });
    }
    if let Some(dir) = out {
        write_file(&dir.join("summary.csv"), &summary_csv(&cells)?)?;
    }
    Ok(cells)
}

/// One sampled point for visual inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRow {
    pub x: f64,
    pub y: f64,
    /// `interior`, `boundary`, `interface` or `coarse`.
    pub role: &'static str,
    /// Subdomain index, or `coarse`.
    pub owner: String,
}

/// Every sampled point of the first seed of `config`. The coarse level
/// reuses the fine outer-boundary points, so only its interior points
/// appear under the `coarse` role.
pub fn sampled_points(config: &RunConfig) -> Result<Vec<PointRow>> {
    let state = init_run(config, config.seeds[0])?;
    let mut rows = Vec::new();
    for set in &state.fine_sets {
        let owner = set.owner.to_string();
        for (role, pts) in [
            ("interior", &set.interior),
            ("boundary", &set.outer_boundary),
            ("interface", &set.interface),
        ] {
            rows.extend(pts.iter().map(|p| PointRow {
                x: p[0],
                y: p[1],
                role,
                owner: owner.clone(),
            }));
        }
    }
    let owner = state.coarse_sets.owner.to_string();
    rows.extend(state.coarse_sets.interior.iter().map(|p| PointRow {
        x: p[0],
        y: p[1],
        role: "coarse",
        owner: owner.clone(),
    }));
    Ok(rows)
}

pub fn points_csv(rows: &[PointRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["x", "y", "role", "owner"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([fmt_f64(r.x), fmt_f64(r.y), r.role.to_string(), r.owner.clone()])
            .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}
