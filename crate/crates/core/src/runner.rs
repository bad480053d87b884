//! Subcommand implementations behind the `nlpa` binary. Each run writes one
//! data file (CSV or JSON), an optional per-point summary, and a
//! `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beamformers::Scheme;
use crate::channel::{array_response, ArrayGeometry};
use crate::config::ExperimentConfig;
use crate::ee_optimizer::{channel_for, solve_p2, sweep, with_threads, SweepGrid, SweepRow};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianCov};
use crate::link_metrics::{signal_and_distortion_patterns, uniform_angle_grid};
use crate::oracle::validate_all;
use crate::rng::{mix_seed, rng_from_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    SweepPower,
    SweepAntennas,
    Beampattern,
    EeSweep,
    OptimizeEe,
    CompareSchemes,
    Validate,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::SweepPower => "sweep-power",
            Subcommand::SweepAntennas => "sweep-antennas",
            Subcommand::Beampattern => "beampattern",
            Subcommand::EeSweep => "ee-sweep",
            Subcommand::OptimizeEe => "optimize-ee",
            Subcommand::CompareSchemes => "compare-schemes",
            Subcommand::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub data_files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub rows: usize,
    /// Grid points that failed numerically, with their error.
    pub failed_points: Vec<String>,
    /// Oracle checks that did not pass (`validate` only).
    pub failed_checks: Vec<String>,
}

impl RunOutcome {
    /// 0 on success, 1 for failed validation checks, 3 for failed grid points.
    pub fn exit_code(&self) -> i32 {
        if !self.failed_points.is_empty() {
            3
        } else if !self.failed_checks.is_empty() {
            1
        } else {
            0
        }
    }
}

/// Exit status for an error that aborted a run.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Schema { .. } | Error::Json(_) => 2,
        Error::Config(_) | Error::Domain(_) | Error::Dimension(_) => 2,
        Error::Numerical(_) | Error::Validation(_) | Error::Infeasible(_) => 3,
        Error::Io(_) | Error::Csv(_) => 4,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x}"),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
                w.flush()?;
            }
            OutputFormat::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: serde_json::Map<String, Value> =
                            self.header.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut text = serde_json::to_string_pretty(&rows)?;
                text.push('\n');
                fs::write(path, text)?;
            }
        }
        Ok(())
    }
}

const SWEEP_HEADER: [&str; 12] = [
    "P_dBm",
    "Nt",
    "Ns",
    "Nrf",
    "scheme",
    "SE",
    "Pcons_mW",
    "EE_bits_per_J",
    "seed",
    "pa_model",
    "SE_lower_bound",
    "error",
];

fn sweep_table(rows: &[SweepRow], cfg: &ExperimentConfig) -> Table {
    let unit = cfg.pa.unit;
    Table {
        header: SWEEP_HEADER.to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Num(r.p_dbm),
                    Cell::Int(r.n_t as u64),
                    Cell::Int(r.n_s as u64),
                    Cell::Int(r.n_rf as u64),
                    Cell::Text(r.scheme.to_string()),
                    opt_num(r.error.is_none(), r.se),
                    opt_num(r.error.is_none(), unit.to_milliwatts(r.pcons)),
                    opt_num(r.error.is_none(), r.ee),
                    Cell::Int(r.seed),
                    Cell::Text(r.pa_model.clone()),
                    r.se_lower_bound.map_or(Cell::Empty, Cell::Num),
                    r.error.clone().map_or(Cell::Empty, Cell::Text),
                ]
            })
            .collect(),
    }
}

fn opt_num(ok: bool, x: f64) -> Cell {
    if ok {
        Cell::Num(x)
    } else {
        Cell::Empty
    }
}

#[derive(Default)]
struct PointSums {
    n_s: usize,
    n_rf: usize,
    se: f64,
    pcons_mw: f64,
    ee: f64,
    count: usize,
}

/// Channel averages per (pa, Nt, scheme, P), over points without errors.
fn summary_table(rows: &[SweepRow], cfg: &ExperimentConfig) -> Table {
    let unit = cfg.pa.unit;
    let mut order: Vec<(String, usize, Scheme, u64)> = Vec::new();
    let mut acc: BTreeMap<(String, usize, String, u64), PointSums> = BTreeMap::new();
    for r in rows {
        let key = (r.pa_model.clone(), r.n_t, r.scheme.to_string(), r.p_dbm.to_bits());
        let e = acc.entry(key).or_insert_with(|| {
            order.push((r.pa_model.clone(), r.n_t, r.scheme, r.p_dbm.to_bits()));
            PointSums { n_s: r.n_s, n_rf: r.n_rf, ..Default::default() }
        });
        if r.error.is_none() {
            e.se += r.se;
            e.pcons_mw += unit.to_milliwatts(r.pcons);
            e.ee += r.ee;
            e.count += 1;
        }
    }
    let rows = order
        .into_iter()
        .map(|(pa, nt, scheme, pbits)| {
            let s = &acc[&(pa.clone(), nt, scheme.to_string(), pbits)];
            let n = s.count;
            let mean = |x: f64| if n > 0 { Cell::Num(x / n as f64) } else { Cell::Empty };
            vec![
                Cell::Num(f64::from_bits(pbits)),
                Cell::Int(nt as u64),
                Cell::Int(s.n_s as u64),
                Cell::Int(s.n_rf as u64),
                Cell::Text(scheme.to_string()),
                mean(s.se),
                mean(s.pcons_mw),
                mean(s.ee),
                Cell::Int(n as u64),
                Cell::Text(pa),
            ]
        })
        .collect();
    Table {
        header: vec!["P_dBm", "Nt", "Ns", "Nrf", "scheme", "SE_mean", "Pcons_mW_mean", "EE_bits_per_J_mean", "n_channels", "pa_model"],
        rows,
    }
}

struct Produced {
    tables: Vec<(&'static str, Table)>,
    failed_points: Vec<String>,
    failed_checks: Vec<String>,
    extra: Value,
}

fn failed(rows: &[SweepRow]) -> Vec<String> {
    rows.iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| {
                format!(
                    "P_dBm={} Nt={} scheme={} pa_model={} seed={}: {e}",
                    r.p_dbm, r.n_t, r.scheme, r.pa_model, r.seed
                )
            })
        })
        .collect()
}

fn run_sweep(cfg: &ExperimentConfig, grid: SweepGrid, n_rf: usize, n_s: usize, threads: Option<usize>) -> Result<Produced> {
    let settings = cfg.sweep_settings(n_rf, n_s)?;
    let rows = sweep(&grid, &settings, threads)?;
    Ok(Produced {
        failed_points: failed(&rows),
        tables: vec![("", sweep_table(&rows, cfg)), ("_summary", summary_table(&rows, cfg))],
        failed_checks: Vec::new(),
        extra: Value::Null,
    })
}

fn run_optimize(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Produced> {
    let pa = cfg.pa()?;
    let budget = cfg.budget()?;
    let spec = cfg.channel_spec(cfg.system.n_t)?;
    let [lo, hi] = cfg.sweep.p_bounds_dbm;
    let mut points = Vec::new();
    for &nt in &cfg.sweep.n_t.values() {
        for seed in cfg.seeds.channel_seeds() {
            points.push((nt, seed));
        }
    }
    let results = with_threads(threads, || {
        points
            .par_iter()
            .map(|&(nt, seed)| channel_for(&spec, nt, seed).and_then(|ch| solve_p2(&ch, &pa, &budget, (lo, hi))))
            .collect::<Vec<_>>()
    })?;
    let unit = budget.unit;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&(nt, seed), res) in points.iter().zip(results) {
        let mut row = vec![Cell::Empty; 11];
        row[1] = Cell::Int(nt as u64);
        row[2] = Cell::Int(1);
        row[3] = Cell::Int(1);
        row[4] = Cell::Text(Scheme::Analog.to_string());
        row[8] = Cell::Int(seed);
        match res {
            Ok(sol) => {
                row[0] = Cell::Num(unit.to_dbm(sol.p_star));
                row[5] = Cell::Num(sol.se_at_star);
                row[6] = Cell::Num(unit.to_milliwatts(sol.pcons_at_star));
                row[7] = Cell::Num(sol.ee_star);
                row[9] = Cell::Text(sol.on_constraint_boundary.to_string());
            }
            // An infeasible budget is a property of the point, not a numerical failure.
            Err(Error::Infeasible(msg)) => row[10] = Cell::Text(format!("infeasible: {msg}")),
            Err(e) => {
                failures.push(format!("Nt={nt} seed={seed}: {e}"));
                row[10] = Cell::Text(e.to_string());
            }
        }
        rows.push(row);
    }
    Ok(Produced {
        tables: vec![(
            "",
            Table {
                header: vec![
                    "P_dBm",
                    "Nt",
                    "Ns",
                    "Nrf",
                    "scheme",
                    "SE",
                    "Pcons_mW",
                    "EE_bits_per_J",
                    "seed",
                    "on_constraint_boundary",
                    "error",
                ],
                rows,
            },
        )],
        failed_points: failures,
        failed_checks: Vec::new(),
        extra: Value::Null,
    })
}

fn run_beampattern(cfg: &ExperimentConfig) -> Result<Produced> {
    let bp = &cfg.beampattern;
    let pa = cfg.pa()?;
    let unit = pa.unit();
    let p = unit.from_dbm(bp.p_dbm);
    let geom = ArrayGeometry { num_elements: bp.n_t, spacing: cfg.system.antenna_spacing };
    let angles = uniform_angle_grid(bp.n_angles);
    let mut rows = Vec::new();
    for (k, &ns) in bp.n_s.iter().enumerate() {
        let n_rf = bp.n_rf.unwrap_or(ns);
        let cols: Vec<_> = bp.aods[..n_rf].iter().map(|&a| array_response(a, &geom)).collect();
        let f_rf = CMatrix::from_columns(&cols);
        let f_bb = match bp.n_rf {
            None => CMatrix::identity(ns, ns),
            Some(_) => {
                let mut rng = rng_from_seed(mix_seed(mix_seed(cfg.seeds.base_seed, stream::PROPERTY), k as u64));
                CMatrix::from_fn(n_rf, ns, |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    num_complex::Complex64::new(re, im)
                })
            }
        };
        let f = &f_rf * &f_bb;
        let norm = f.norm_squared();
        if !(norm > 0.0) {
            return Err(Error::Numerical("beampattern beamformer has zero output".into()));
        }
        let cu = HermitianCov::new((&f * f.adjoint()).scale(p / norm))?;
        let (sig, dist) = signal_and_distortion_patterns(&cu, &pa, &geom, &angles)?;
        for (i, &a) in angles.iter().enumerate() {
            rows.push(vec![
                Cell::Num(bp.p_dbm),
                Cell::Int(bp.n_t as u64),
                Cell::Int(ns as u64),
                Cell::Int(n_rf as u64),
                Cell::Num(a),
                Cell::Num(sig.values[i]),
                Cell::Num(dist.values[i]),
                Cell::Text(if sig.all_zero || dist.all_zero { "true" } else { "false" }.into()),
            ]);
        }
    }
    Ok(Produced {
        tables: vec![(
            "",
            Table {
                header: vec!["P_dBm", "Nt", "Ns", "Nrf", "angle_rad", "signal", "distortion", "all_zero"],
                rows,
            },
        )],
        failed_points: Vec::new(),
        failed_checks: Vec::new(),
        extra: Value::Null,
    })
}

fn run_validate(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Produced> {
    let vcfg = cfg.validation_config()?;
    let report = with_threads(threads, || validate_all(&vcfg))??;
    let rows = report
        .checks
        .iter()
        .map(|c| {
            vec![
                Cell::Text(c.check.clone()),
                Cell::Num(c.measured),
                Cell::Num(c.tolerance),
                Cell::Text(serde_json::to_value(c.expect).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()),
                Cell::Text(c.pass.to_string()),
            ]
        })
        .collect();
    Ok(Produced {
        tables: vec![("", Table { header: vec!["check", "measured", "tolerance", "expect", "pass"], rows })],
        failed_points: Vec::new(),
        failed_checks: report.failing().into_iter().map(String::from).collect(),
        extra: serde_json::to_value(&report)?,
    })
}

/// Run `cmd` and write its outputs into `opts.out_dir`.
pub fn run(cmd: Subcommand, config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut cfg = config.clone();
    if let Some(seed) = opts.seed {
        cfg.seeds.base_seed = seed;
    }
    cfg.validate()?;
    let seeds = cfg.seeds.channel_seeds();
    let p_grid = cfg.sweep.p_dbm.values();
    let produced = match cmd {
        Subcommand::SweepPower => {
            let grid = SweepGrid { p_dbm: p_grid, n_t: cfg.sweep.n_t.values(), schemes: vec![cfg.scheme], seeds };
            run_sweep(&cfg, grid, cfg.system.n_rf, cfg.system.n_s, opts.threads)?
        }
        Subcommand::SweepAntennas => {
            let grid = SweepGrid {
                p_dbm: vec![cfg.antennas.p_dbm],
                n_t: cfg.antennas.n_t.values(),
                schemes: vec![cfg.scheme],
                seeds,
            };
            run_sweep(&cfg, grid, cfg.system.n_rf, cfg.system.n_s, opts.threads)?
        }
        Subcommand::EeSweep => {
            let grid = SweepGrid { p_dbm: p_grid, n_t: cfg.sweep.n_t.values(), schemes: vec![Scheme::Analog], seeds };
            run_sweep(&cfg, grid, 1, 1, opts.threads)?
        }
        Subcommand::CompareSchemes => {
            let grid = SweepGrid {
                p_dbm: p_grid,
                n_t: vec![cfg.compare.n_t],
                schemes: cfg.compare.schemes.clone(),
                seeds,
            };
            run_sweep(&cfg, grid, cfg.compare.n_rf, cfg.compare.n_s, opts.threads)?
        }
        Subcommand::OptimizeEe => run_optimize(&cfg, opts.threads)?,
        Subcommand::Beampattern => run_beampattern(&cfg)?,
        Subcommand::Validate => run_validate(&cfg, opts.threads)?,
    };

    fs::create_dir_all(&opts.out_dir)?;
    let mut data_files = Vec::new();
    let mut rows = 0;
    for (suffix, table) in &produced.tables {
        let path = opts.out_dir.join(format!("{}{}.{}", cmd.name(), suffix, opts.format.extension()));
        table.write(&path, opts.format)?;
        if suffix.is_empty() {
            rows = table.rows.len();
        }
        data_files.push(path);
    }
    if !produced.extra.is_null() {
        let path = opts.out_dir.join(format!("{}_report.json", cmd.name()));
        fs::write(&path, serde_json::to_string_pretty(&produced.extra)? + "\n")?;
        data_files.push(path);
    }

    let manifest_path = opts.out_dir.join("manifest.json");
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "config": serde_json::to_value(&cfg)?,
        "config_sha256": cfg.hash(),
        "seeds": {
            "base_seed": cfg.seeds.base_seed,
            "n_channels": cfg.seeds.n_channels,
            "channel_seeds": cfg.seeds.channel_seeds(),
        },
        "threads": opts.threads,
        "format": opts.format,
        "data_files": data_files.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "rows": rows,
        "failed_points": produced.failed_points,
        "failed_checks": produced.failed_checks,
        "finished_unix_s": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    Ok(RunOutcome {
        data_files,
        manifest: manifest_path,
        rows,
        failed_points: produced.failed_points,
        failed_checks: produced.failed_checks,
    })
}
