//! Single-RF-chain energy-efficiency maximization and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamformers::{build_beamformer, Scheme, SchemeOptions};
use crate::channel::{generate_channel, ArrayGeometry, ChannelRealization, ChannelSpec};
use crate::distortion::{apply_crosstalk, sample_crosstalk, CrosstalkModel};
use crate::error::{Error, Result};
use crate::link_metrics::{consumed_power_single_rf, evaluate_link, se_lower_bound, se_single_rf, LinkBudget};
use crate::pa_model::PaCoefficients;
use crate::rng::{mix_seed, stream};

pub const DEFAULT_BOUNDS_DBM: (f64, f64) = (-40.0, 20.0);
const PRESCAN_POINTS: usize = 64;
const GOLDEN_TOL_DB: f64 = 1e-9;
const BISECTION_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P2Solution {
    pub p_star: f64,
    pub ee_star: f64,
    pub se_at_star: f64,
    pub pcons_at_star: f64,
    pub on_constraint_boundary: bool,
}

/// Objective of the single-RF problem at one input power.
#[derive(Debug, Clone, Copy)]
pub struct EeObjective<'a> {
    pub channel: &'a ChannelRealization,
    pub pa: &'a PaCoefficients,
    pub budget: &'a LinkBudget,
}

impl EeObjective<'_> {
    pub fn se(&self, p: f64) -> Result<f64> {
        se_single_rf(p, self.channel, self.pa, self.budget.noise_power)
    }

    pub fn consumed(&self, p: f64) -> Result<f64> {
        consumed_power_single_rf(p, self.channel.n_t(), self.pa, self.budget)
    }

    /// Energy efficiency in bits per joule.
    pub fn ee(&self, p: f64) -> Result<f64> {
        let pc = self.consumed(p)?;
        if pc == 0.0 {
            return Ok(0.0);
        }
        Ok(self.budget.bandwidth_hz * self.se(p)? / self.budget.unit.to_watts(pc))
    }

    pub fn ee_dbm(&self, dbm: f64) -> Result<f64> {
        self.ee(self.budget.unit.from_dbm(dbm))
    }
}

fn check_bounds(bounds: (f64, f64)) -> Result<()> {
    let (lo, hi) = bounds;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Config(format!("power bounds must be finite with lower < upper, got [{lo}, {hi}] dBm")));
    }
    Ok(())
}

/// Largest power in `[lo, hi]` dBm whose consumed power stays within the cap.
/// Returns `(upper_dbm, capped)`.
fn feasible_upper(obj: &EeObjective, lo: f64, hi: f64) -> Result<(f64, bool)> {
    let cap = obj.budget.consumed_power_cap;
    let unit = obj.budget.unit;
    if !cap.is_finite() {
        return Ok((hi, false));
    }
    if obj.consumed(unit.from_dbm(lo))? > cap {
        return Err(Error::Infeasible(format!(
            "consumed power at the lower bound {lo} dBm exceeds the cap {cap}"
        )));
    }
    if obj.consumed(unit.from_dbm(hi))? <= cap {
        return Ok((hi, false));
    }
    // Bisection in linear power; the consumed power is strictly increasing.
    let (mut a, mut b) = (unit.from_dbm(lo), unit.from_dbm(hi));
    while b - a > BISECTION_REL_TOL * b {
        let mid = 0.5 * (a + b);
        if obj.consumed(mid)? <= cap {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((unit.to_dbm(a), true))
}

/// Maximize `EE(P)` over `P` in `bounds_dbm`, subject to the consumed-power cap.
///
/// A 64-point scan on the dBm axis picks the bracket, golden-section search
/// refines it.
pub fn solve_p2(
    ch: &ChannelRealization,
    pa: &PaCoefficients,
    budget: &LinkBudget,
    bounds_dbm: (f64, f64),
) -> Result<P2Solution> {
    check_bounds(bounds_dbm)?;
    budget.validate()?;
    let obj = EeObjective { channel: ch, pa, budget };
    let (lo, _) = bounds_dbm;
    let (hi, capped) = feasible_upper(&obj, bounds_dbm.0, bounds_dbm.1)?;

    let step = (hi - lo) / (PRESCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..PRESCAN_POINTS).map(|k| lo + k as f64 * step).collect();
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, &x) in grid.iter().enumerate() {
        let v = obj.ee_dbm(x)?;
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(PRESCAN_POINTS - 1)];
    let (mut x_star, mut ee_star) = golden_section(|x| obj.ee_dbm(x), a, b, GOLDEN_TOL_DB)?;
    if best_val > ee_star {
        x_star = grid[best];
        ee_star = best_val;
    }
    let p_star = budget.unit.from_dbm(x_star);
    let on_boundary = capped && (hi - x_star) <= 1e-6;
    Ok(P2Solution {
        p_star,
        ee_star,
        se_at_star: obj.se(p_star)?,
        pcons_at_star: obj.consumed(p_star)?,
        on_constraint_boundary: on_boundary,
    })
}

/// Golden-section maximization of `f` on `[a, b]`; returns the best point
/// evaluated, including the endpoints.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (fa, fb) = (f(a)?, f(b)?);
    let mut best = if fa >= fb { (a, fa) } else { (b, fb) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    for cand in [(c, fc), (d, fd)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}

/// A named PA model included in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPa {
    pub name: String,
    pub pa: PaCoefficients,
}

/// Cartesian sweep grid. Rows are emitted in the order
/// pa, n_t, scheme, p_dbm, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub p_dbm: Vec<f64>,
    pub n_t: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn len(&self, n_pa: usize) -> usize {
        n_pa * self.n_t.len() * self.schemes.len() * self.p_dbm.len() * self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_dbm.is_empty() || self.n_t.is_empty() || self.schemes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sweep grid must be nonempty in every dimension".into()));
        }
        if self.p_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("sweep powers must be finite".into()));
        }
        if self.n_t.contains(&0) {
            return Err(Error::Config("sweep antenna counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything besides the grid that a sweep point needs.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    /// Template; `tx.num_elements` is overridden by the grid.
    pub channel: ChannelSpec,
    pub pas: Vec<NamedPa>,
    pub budget: LinkBudget,
    pub n_rf: usize,
    pub n_s: usize,
    pub options: SchemeOptions,
    pub crosstalk: Option<CrosstalkSetting>,
}

/// Pre-PA coupling applied to every sweep point, drawn per channel seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkSetting {
    pub model: CrosstalkModel,
    pub sigma_ct_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_dbm: f64,
    pub n_t: usize,
    pub n_s: usize,
    pub n_rf: usize,
    pub scheme: Scheme,
    pub pa_model: String,
    pub seed: u64,
    pub se: f64,
    /// Only for the single-RF analog scheme.
    pub se_lower_bound: Option<f64>,
    pub pcons: f64,
    pub ee: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    pa: usize,
    n_t: usize,
    scheme: Scheme,
    p_dbm: f64,
    seed: u64,
}

fn expand(grid: &SweepGrid, n_pa: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(grid.len(n_pa));
    for pa in 0..n_pa {
        for &n_t in &grid.n_t {
            for &scheme in &grid.schemes {
                for &p_dbm in &grid.p_dbm {
                    for &seed in &grid.seeds {
                        out.push(Point { pa, n_t, scheme, p_dbm, seed });
                    }
                }
            }
        }
    }
    out
}

pub fn channel_for(spec: &ChannelSpec, n_t: usize, seed: u64) -> Result<ChannelRealization> {
    let mut spec = spec.clone();
    spec.tx = ArrayGeometry { num_elements: n_t, ..spec.tx };
    generate_channel(seed, &spec)
}

fn evaluate_point(pt: &Point, s: &SweepSettings) -> Result<(f64, Option<f64>, f64, f64)> {
    let named = &s.pas[pt.pa];
    let ch = channel_for(&s.channel, pt.n_t, pt.seed)?;
    let p = s.budget.unit.from_dbm(pt.p_dbm);
    let bf = build_beamformer(pt.scheme, &ch, s.n_rf, s.n_s, p, &s.options)?;
    let mut cu = bf.covariance();
    if let Some(ct) = &s.crosstalk {
        let b = sample_crosstalk(mix_seed(pt.seed, stream::CROSSTALK), pt.n_t, ct.sigma_ct_sq, ct.model)?;
        cu = apply_crosstalk(&cu, &b)?;
    }
    let report = evaluate_link(&ch.h, &cu, &named.pa, &s.budget)?;
    let lb = if pt.scheme == Scheme::Analog && s.n_rf == 1 && s.n_s == 1 && s.crosstalk.is_none() {
        Some(se_lower_bound(p, &ch, &named.pa, s.budget.noise_power)?)
    } else {
        None
    };
    let se = report.se_bits_per_s_hz;
    if !se.is_finite() || !report.ee_bits_per_joule.is_finite() {
        return Err(Error::Numerical("non-finite metric".into()));
    }
    Ok((se, lb, report.consumed_total, report.ee_bits_per_joule))
}

/// Evaluate every grid point; failures are recorded in the row's `error`.
/// Row order follows the grid regardless of the thread count.
pub fn sweep(grid: &SweepGrid, settings: &SweepSettings, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    if settings.pas.is_empty() {
        return Err(Error::Config("sweep needs at least one PA model".into()));
    }
    let points = expand(grid, settings.pas.len());
    let run = || {
        points
            .par_iter()
            .map(|pt| {
                let mut row = SweepRow {
                    p_dbm: pt.p_dbm,
                    n_t: pt.n_t,
                    n_s: settings.n_s,
                    n_rf: if pt.scheme == Scheme::Digital { pt.n_t } else { settings.n_rf },
                    scheme: pt.scheme,
                    pa_model: settings.pas[pt.pa].name.clone(),
                    seed: pt.seed,
                    se: f64::NAN,
                    se_lower_bound: None,
                    pcons: f64::NAN,
                    ee: f64::NAN,
                    error: None,
                };
                match evaluate_point(pt, settings) {
                    Ok((se, lb, pc, ee)) => {
                        row.se = se;
                        row.se_lower_bound = lb;
                        row.pcons = pc;
                        row.ee = ee;
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                row
            })
            .collect::<Vec<_>>()
    };
    with_threads(threads, run)
}

/// Run `f` on a dedicated pool of `threads` workers, or the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{AngleDistribution, LargeScaleFading, PathLossModel};
    use crate::units::PowerUnit;

    fn spec(nt: usize) -> ChannelSpec {
        ChannelSpec {
            num_paths: 5,
            tx: ArrayGeometry::half_wavelength(nt),
            rx: ArrayGeometry::half_wavelength(16),
            path_loss: PathLossModel::reference(15.0),
            angles: AngleDistribution::default(),
            large_scale: LargeScaleFading::PerRealization,
        }
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, v) = golden_section(|x| Ok(-(x - 0.3) * (x - 0.3)), -2.0, 5.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!(v <= 0.0 && v > -1e-15);
    }

    #[test]
    fn unconstrained_interior_optimum() {
        let ch = generate_channel(3, &spec(16)).unwrap();
        let pa = PaCoefficients::reference();
        let budget = LinkBudget::reference(PowerUnit::Milliwatt);
        let sol = solve_p2(&ch, &pa, &budget, DEFAULT_BOUNDS_DBM).unwrap();
        assert!(!sol.on_constraint_boundary);
        let x = PowerUnit::Milliwatt.to_dbm(sol.p_star);
        assert!(x > -40.0 && x < 20.0, "{x}");
        let rel = sol.ee_star - budget.bandwidth_hz * sol.se_at_star / (sol.pcons_at_star * 1e-3);
        assert!(rel.abs() <= 1e-9 * sol.ee_star);
        // stationarity
        let obj = EeObjective { channel: &ch, pa: &pa, budget: &budget };
        let h = 1e-4;
        let d = (obj.ee_dbm(x + h).unwrap() - obj.ee_dbm(x - h).unwrap()) / (2.0 * h);
        assert!(d.abs() / sol.ee_star < 1e-6);
    }

    #[test]
    fn capped_and_infeasible() {
        let ch = generate_channel(4, &spec(8)).unwrap();
        let pa = PaCoefficients::reference();
        let mut budget = LinkBudget::reference(PowerUnit::Milliwatt);
        let obj = EeObjective { channel: &ch, pa: &pa, budget: &budget };
        let free = solve_p2(&ch, &pa, &budget, DEFAULT_BOUNDS_DBM).unwrap();
        let cap = obj.consumed(free.p_star / 10.0).unwrap();
        budget.consumed_power_cap = cap;
        let sol = solve_p2(&ch, &pa, &budget, DEFAULT_BOUNDS_DBM).unwrap();
        assert!(sol.on_constraint_boundary);
        assert!(sol.pcons_at_star <= cap * (1.0 + 1e-9));
        assert!((sol.p_star / (free.p_star / 10.0) - 1.0).abs() < 1e-6);

        budget.consumed_power_cap = 1e-9;
        assert!(matches!(solve_p2(&ch, &pa, &budget, DEFAULT_BOUNDS_DBM), Err(Error::Infeasible(_))));
        assert!(solve_p2(&ch, &pa, &budget, (5.0, 5.0)).is_err());
        assert!(solve_p2(&ch, &pa, &budget, (f64::NEG_INFINITY, 5.0)).is_err());
    }

    #[test]
    fn sweep_row_count_and_order() {
        let settings = SweepSettings {
            channel: spec(4),
            pas: vec![NamedPa { name: "nonlinear".into(), pa: PaCoefficients::reference() }],
            budget: LinkBudget::reference(PowerUnit::Milliwatt),
            n_rf: 1,
            n_s: 1,
            options: SchemeOptions::default(),
            crosstalk: None,
        };
        let p: Vec<f64> = (0..71).map(|k| -20.0 + 0.5 * k as f64).collect();
        let grid = SweepGrid { p_dbm: p, n_t: vec![4, 8, 16, 32, 64], schemes: vec![Scheme::Analog], seeds: vec![1] };
        assert_eq!(grid.len(1), 355);
        let one = SweepGrid { p_dbm: vec![0.0], n_t: vec![4], schemes: vec![Scheme::Analog], seeds: vec![9] };
        let rows = sweep(&one, &settings, Some(1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].error.is_none());
        assert!(rows[0].se_lower_bound.unwrap() <= rows[0].se + 1e-12);
    }

    #[test]
    fn sweep_records_point_errors() {
        let settings = SweepSettings {
            channel: spec(4),
            pas: vec![NamedPa { name: "nonlinear".into(), pa: PaCoefficients::reference() }],
            budget: LinkBudget::reference(PowerUnit::Milliwatt),
            n_rf: 6,
            n_s: 1,
            options: SchemeOptions::default(),
            crosstalk: None,
        };
        let grid = SweepGrid { p_dbm: vec![0.0], n_t: vec![4], schemes: vec![Scheme::Analog, Scheme::Digital], seeds: vec![1] };
        let rows = sweep(&grid, &settings, None).unwrap();
        assert!(rows[0].error.is_some());
        assert!(rows[1].error.is_none());
    }
}
