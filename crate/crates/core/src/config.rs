//! Experiment configuration. Powers are given in dBm here and converted to
//! the PA's unit when the model objects are built.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamformers::{sine_spaced_dictionary, PowerAllocation, Scheme, SchemeOptions};
use crate::channel::{AngleDistribution, ArrayGeometry, ChannelSpec, LargeScaleFading, PathLossModel};
use crate::distortion::CrosstalkModel;
use crate::ee_optimizer::{CrosstalkSetting, NamedPa, SweepSettings};
use crate::error::{Error, Result};
use crate::link_metrics::LinkBudget;
use crate::oracle::{ValidationConfig, MC_MIN_SAMPLES};
use crate::pa_model::{PaCoefficients, PaSpec};
use crate::units::db_to_linear;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub pa: PaSpec,
    pub budget: BudgetConfig,
    pub channel: ChannelConfig,
    pub scheme: Scheme,
    pub scheme_options: SchemeOptionsConfig,
    pub crosstalk: Option<CrosstalkConfig>,
    pub sweep: SweepConfig,
    pub antennas: AntennaSweepConfig,
    pub compare: CompareConfig,
    pub beampattern: BeampatternConfig,
    pub seeds: SeedConfig,
    pub validation: ValidationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            pa: PaSpec::reference(),
            budget: BudgetConfig::default(),
            channel: ChannelConfig::default(),
            scheme: Scheme::Analog,
            scheme_options: SchemeOptionsConfig::default(),
            crosstalk: None,
            sweep: SweepConfig::default(),
            antennas: AntennaSweepConfig::default(),
            compare: CompareConfig::default(),
            beampattern: BeampatternConfig::default(),
            seeds: SeedConfig::default(),
            validation: ValidationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub n_rf: usize,
    pub n_s: usize,
    pub num_paths: usize,
    pub distance_m: f64,
    /// In wavelengths.
    pub antenna_spacing: f64,
    /// Informational; the model is narrowband.
    pub carrier_ghz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_t: 64,
            n_r: 16,
            n_rf: 1,
            n_s: 1,
            num_paths: 5,
            distance_m: 15.0,
            antenna_spacing: 0.5,
            carrier_ghz: 73.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub pa_max_output_dbm: f64,
    pub pa_max_efficiency: f64,
    /// Cap on total consumed power; absent for none.
    pub consumed_power_cap_dbm: Option<f64>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            noise_dbm: -105.0,
            bandwidth_hz: 1e9,
            pa_max_output_dbm: 6.0,
            pa_max_efficiency: 0.3,
            consumed_power_cap_dbm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub path_loss_fixed_db: f64,
    pub path_loss_slope_db: f64,
    pub shadowing_std_db: f64,
    pub large_scale: LargeScaleFading,
    pub angles: AngleDistribution,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let pl = PathLossModel::reference(15.0);
        Self {
            path_loss_fixed_db: pl.fixed_db,
            path_loss_slope_db: pl.slope_db_per_decade,
            shadowing_std_db: pl.shadowing_std_db,
            large_scale: LargeScaleFading::PerRealization,
            angles: AngleDistribution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AllocationKind {
    #[default]
    EqualSplit,
    WaterFilling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeOptionsConfig {
    pub quantization_bits: u32,
    pub dictionary_size: usize,
    pub power_allocation: AllocationKind,
}

impl Default for SchemeOptionsConfig {
    fn default() -> Self {
        Self {
            quantization_bits: 4,
            dictionary_size: 256,
            power_allocation: AllocationKind::EqualSplit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkConfig {
    #[serde(default)]
    pub model: CrosstalkModel,
    /// Average crosstalk power per coupling coefficient, in dB.
    pub sigma_ct_db: f64,
}

/// Either an explicit list or an inclusive `start..=stop` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid<T> {
    List(Vec<T>),
    Range { start: T, stop: T, step: T },
}

impl Grid<f64> {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|k| start + k as f64 * step).collect()
            }
        }
    }
}

impl Grid<usize> {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if *step == 0 || stop < start {
                    return Vec::new();
                }
                (*start..=*stop).step_by(*step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p_dbm: Grid<f64>,
    pub n_t: Grid<usize>,
    /// Also evaluate the ideal PA with the same small-signal gain.
    pub include_linear_reference: bool,
    /// Search interval of the energy-efficiency solver.
    pub p_bounds_dbm: [f64; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            p_dbm: Grid::Range { start: -20.0, stop: 15.0, step: 0.5 },
            n_t: Grid::List(vec![4, 8, 16, 32, 64]),
            include_linear_reference: true,
            p_bounds_dbm: [-40.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaSweepConfig {
    pub n_t: Grid<usize>,
    pub p_dbm: f64,
}

impl Default for AntennaSweepConfig {
    fn default() -> Self {
        Self {
            n_t: Grid::Range { start: 5, stop: 64, step: 1 },
            p_dbm: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub n_t: usize,
    pub n_rf: usize,
    pub n_s: usize,
    pub schemes: Vec<Scheme>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            n_t: 16,
            n_rf: 5,
            n_s: 5,
            schemes: vec![Scheme::Digital, Scheme::Analog, Scheme::Hybrid, Scheme::QuantizedAnalog],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeampatternConfig {
    pub n_t: usize,
    /// Steering angles of the RF chains, radians.
    pub aods: Vec<f64>,
    pub n_s: Vec<usize>,
    /// RF chains; when absent `N_RF = N_s` and `F_BB` is a scaled identity,
    /// otherwise `F_BB` has i.i.d. Gaussian entries.
    pub n_rf: Option<usize>,
    pub n_angles: usize,
    pub p_dbm: f64,
}

impl Default for BeampatternConfig {
    fn default() -> Self {
        Self {
            n_t: 8,
            aods: vec![0.0, -PI / 4.0, PI / 6.0, PI / 3.0, -PI / 12.0],
            n_s: vec![1, 3, 5],
            n_rf: None,
            n_angles: 1024,
            p_dbm: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub base_seed: u64,
    pub n_channels: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { base_seed: 1, n_channels: 100 }
    }
}

impl SeedConfig {
    /// Channel seeds `base, base + 1, ...`.
    pub fn channel_seeds(&self) -> Vec<u64> {
        (0..self.n_channels as u64).map(|k| self.base_seed.wrapping_add(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    pub n_samples: usize,
    pub n_channels: usize,
    pub branch_power_mw: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            n_channels: 1000,
            branch_power_mw: 1.0,
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(schema(path, format!("must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(path, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(schema(path, format!("must be >= {min}, got {v}")))
    }
}

/// Parse and validate a JSON configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path, message: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        at_least("system.n_t", s.n_t, 1)?;
        at_least("system.n_r", s.n_r, 1)?;
        at_least("system.num_paths", s.num_paths, 1)?;
        at_least("system.n_s", s.n_s, 1)?;
        if s.n_rf < s.n_s {
            return Err(schema("system.n_rf", format!("must be >= n_s ({}), got {}", s.n_s, s.n_rf)));
        }
        positive("system.distance_m", s.distance_m)?;
        positive("system.antenna_spacing", s.antenna_spacing)?;
        positive("system.carrier_ghz", s.carrier_ghz)?;

        self.pa.build().map_err(|e| schema("pa", e.to_string()))?;

        let b = &self.budget;
        finite("budget.noise_dbm", b.noise_dbm)?;
        positive("budget.bandwidth_hz", b.bandwidth_hz)?;
        finite("budget.pa_max_output_dbm", b.pa_max_output_dbm)?;
        if !(b.pa_max_efficiency > 0.0 && b.pa_max_efficiency <= 1.0) {
            return Err(schema("budget.pa_max_efficiency", format!("must be in (0, 1], got {}", b.pa_max_efficiency)));
        }
        if let Some(cap) = b.consumed_power_cap_dbm {
            finite("budget.consumed_power_cap_dbm", cap)?;
        }

        let c = &self.channel;
        finite("channel.path_loss_fixed_db", c.path_loss_fixed_db)?;
        finite("channel.path_loss_slope_db", c.path_loss_slope_db)?;
        if !(c.shadowing_std_db >= 0.0) || !c.shadowing_std_db.is_finite() {
            return Err(schema("channel.shadowing_std_db", "must be finite and >= 0"));
        }
        if let LargeScaleFading::Fixed { zeta_db } = c.large_scale {
            finite("channel.large_scale.fixed.zeta_db", zeta_db)?;
        }
        self.channel_spec(s.n_t).map_err(|e| schema("channel.angles", e.to_string()))?;

        let o = &self.scheme_options;
        if !(1..=52).contains(&o.quantization_bits) {
            return Err(schema("scheme_options.quantization_bits", "must be in 1..=52"));
        }
        at_least("scheme_options.dictionary_size", o.dictionary_size, 1)?;

        if let Some(ct) = &self.crosstalk {
            finite("crosstalk.sigma_ct_db", ct.sigma_ct_db)?;
        }

        let p = self.sweep.p_dbm.values();
        if p.is_empty() {
            return Err(schema("sweep.p_dbm", "grid is empty"));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(schema("sweep.p_dbm", "values must be finite"));
        }
        validate_nt_grid("sweep.n_t", &self.sweep.n_t)?;
        let [lo, hi] = self.sweep.p_bounds_dbm;
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(schema("sweep.p_bounds_dbm", "must be finite with lower < upper"));
        }

        validate_nt_grid("antennas.n_t", &self.antennas.n_t)?;
        finite("antennas.p_dbm", self.antennas.p_dbm)?;

        let cmp = &self.compare;
        at_least("compare.n_t", cmp.n_t, 1)?;
        at_least("compare.n_s", cmp.n_s, 1)?;
        if cmp.n_rf < cmp.n_s {
            return Err(schema("compare.n_rf", "must be >= compare.n_s"));
        }
        if cmp.schemes.is_empty() {
            return Err(schema("compare.schemes", "must not be empty"));
        }

        let bp = &self.beampattern;
        at_least("beampattern.n_t", bp.n_t, 1)?;
        at_least("beampattern.n_angles", bp.n_angles, 1)?;
        finite("beampattern.p_dbm", bp.p_dbm)?;
        if bp.aods.iter().any(|a| !a.is_finite()) {
            return Err(schema("beampattern.aods", "angles must be finite"));
        }
        if bp.n_s.is_empty() {
            return Err(schema("beampattern.n_s", "must not be empty"));
        }
        let chains_needed = bp.n_rf.unwrap_or_else(|| bp.n_s.iter().copied().max().unwrap_or(0));
        if chains_needed > bp.aods.len() {
            return Err(schema("beampattern.aods", format!("need {chains_needed} angles, got {}", bp.aods.len())));
        }
        for (k, &ns) in bp.n_s.iter().enumerate() {
            at_least(&format!("beampattern.n_s[{k}]"), ns, 1)?;
            if let Some(nrf) = bp.n_rf {
                if ns > nrf {
                    return Err(schema(&format!("beampattern.n_s[{k}]"), "exceeds beampattern.n_rf"));
                }
            }
        }

        at_least("seeds.n_channels", self.seeds.n_channels, 1)?;
        at_least("validation.n_samples", self.validation.n_samples, MC_MIN_SAMPLES)?;
        at_least("validation.n_channels", self.validation.n_channels, 1)?;
        positive("validation.branch_power_mw", self.validation.branch_power_mw)?;
        Ok(())
    }

    pub fn pa(&self) -> Result<PaCoefficients> {
        self.pa.build()
    }

    pub fn budget(&self) -> Result<LinkBudget> {
        let unit = self.pa.unit;
        let b = &self.budget;
        let budget = LinkBudget {
            noise_power: unit.from_dbm(b.noise_dbm),
            bandwidth_hz: b.bandwidth_hz,
            pa_max_output: unit.from_dbm(b.pa_max_output_dbm),
            pa_max_efficiency: b.pa_max_efficiency,
            consumed_power_cap: b.consumed_power_cap_dbm.map_or(f64::INFINITY, |c| unit.from_dbm(c)),
            unit,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn channel_spec(&self, n_t: usize) -> Result<ChannelSpec> {
        let s = &self.system;
        let c = &self.channel;
        let spec = ChannelSpec {
            num_paths: s.num_paths,
            tx: ArrayGeometry { num_elements: n_t, spacing: s.antenna_spacing },
            rx: ArrayGeometry { num_elements: s.n_r, spacing: s.antenna_spacing },
            path_loss: PathLossModel {
                fixed_db: c.path_loss_fixed_db,
                slope_db_per_decade: c.path_loss_slope_db,
                shadowing_std_db: c.shadowing_std_db,
                distance_m: s.distance_m,
            },
            angles: c.angles.clone(),
            large_scale: c.large_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scheme_options(&self) -> Result<SchemeOptions> {
        let o = &self.scheme_options;
        let allocation = match o.power_allocation {
            AllocationKind::EqualSplit => PowerAllocation::EqualSplit,
            AllocationKind::WaterFilling => PowerAllocation::WaterFilling { noise_power: self.budget()?.noise_power },
        };
        Ok(SchemeOptions {
            quantization_bits: o.quantization_bits,
            dictionary: sine_spaced_dictionary(o.dictionary_size),
            allocation,
        })
    }

    pub fn crosstalk_setting(&self) -> Option<CrosstalkSetting> {
        self.crosstalk.as_ref().map(|c| CrosstalkSetting {
            model: c.model,
            sigma_ct_sq: db_to_linear(c.sigma_ct_db),
        })
    }

    /// The configured PA, plus its linearized version when requested.
    pub fn named_pas(&self) -> Result<Vec<NamedPa>> {
        let pa = self.pa()?;
        let mut out = vec![NamedPa { name: "nonlinear".into(), pa: pa.clone() }];
        if self.sweep.include_linear_reference && !pa.is_linear() {
            out.push(NamedPa { name: "linear".into(), pa: pa.linearized() });
        }
        Ok(out)
    }

    pub fn sweep_settings(&self, n_rf: usize, n_s: usize) -> Result<SweepSettings> {
        Ok(SweepSettings {
            channel: self.channel_spec(self.system.n_t)?,
            pas: self.named_pas()?,
            budget: self.budget()?,
            n_rf,
            n_s,
            options: self.scheme_options()?,
            crosstalk: self.crosstalk_setting(),
        })
    }

    pub fn validation_config(&self) -> Result<ValidationConfig> {
        let pa = self.pa()?;
        Ok(ValidationConfig {
            branch_power: pa.unit().from_milliwatts(self.validation.branch_power_mw),
            pa,
            channel: self.channel_spec(self.system.n_t)?,
            noise_power: self.budget()?.noise_power,
            n_samples: self.validation.n_samples,
            n_channels: self.validation.n_channels,
            seed: self.seeds.base_seed,
        })
    }

    /// Canonical JSON (serde field order, shortest round-trip floats).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn validate_nt_grid(path: &str, grid: &Grid<usize>) -> Result<()> {
    let v = grid.values();
    if v.is_empty() {
        return Err(schema(path, "grid is empty"));
    }
    if v.contains(&0) {
        return Err(schema(path, "antenna counts must be >= 1"));
    }
    Ok(())
}
