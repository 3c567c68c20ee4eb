//! Problem instances: geometry, tasks, platform capabilities, radio constants
//! and channel-error moments.
//!
//! Every stored quantity is linear SI (watts, hertz, bits, joules, meters).
//! Decibel inputs are converted once, in [`RadioParams::from_decibels`], and
//! never reach the formulas downstream.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm/Hz to W/Hz.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl AreaBounds {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.x_min, self.x_max),
            p[1].clamp(self.y_min, self.y_max),
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundUser {
    pub id: usize,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub data_bits: f64,
    pub cycles_per_bit: f64,
    /// Maximum tolerable delay, seconds.
    pub deadline: f64,
    /// Required probability of meeting the deadline.
    pub confidence: f64,
}

impl TaskSpec {
    /// Total CPU cycles needed, `c_m * L_m`.
    pub fn cycles(&self) -> f64 {
        self.cycles_per_bit * self.data_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub id: usize,
    pub altitude: f64,
    pub cpu_cap: f64,
    pub energy_cap: f64,
    pub switch_cap: f64,
    pub tx_power_to_hap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapSpec {
    pub position: [f64; 3],
    pub cpu_cap: f64,
    pub energy_cap: f64,
    pub switch_cap: f64,
    pub task_slots: usize,
}

/// Radio constants, linear units only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub uplink_bandwidth: f64,
    pub gu_tx_power: f64,
    /// Power gain at the 1 m reference distance.
    pub ref_gain: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    pub u2h_bandwidth: f64,
    pub u2h_antenna_gain: f64,
    pub line_loss: f64,
    pub boltzmann: f64,
    pub noise_temp: f64,
    pub carrier: f64,
    pub light_speed: f64,
}

/// Decibel-denominated radio inputs as they are usually quoted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioDecibels {
    pub uplink_bandwidth: f64,
    pub gu_tx_power: f64,
    pub ref_gain_db: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub u2h_bandwidth: f64,
    pub u2h_antenna_gain_db: f64,
    pub line_loss_db: f64,
    pub boltzmann: f64,
    pub noise_temp: f64,
    pub carrier: f64,
    pub light_speed: f64,
}

impl Default for RadioDecibels {
    fn default() -> Self {
        Self {
            uplink_bandwidth: 5e6,
            gu_tx_power: 0.5,
            ref_gain_db: -50.0,
            noise_psd_dbm_per_hz: -174.0,
            u2h_bandwidth: 5e6,
            u2h_antenna_gain_db: 42.0,
            line_loss_db: -23.0,
            boltzmann: 1.38e-23,
            noise_temp: 1000.0,
            carrier: 2.4e9,
            light_speed: 3e8,
        }
    }
}

impl RadioParams {
    pub fn from_decibels(db: &RadioDecibels) -> Self {
        Self {
            uplink_bandwidth: db.uplink_bandwidth,
            gu_tx_power: db.gu_tx_power,
            ref_gain: db_to_linear(db.ref_gain_db),
            noise_psd: dbm_to_watts(db.noise_psd_dbm_per_hz),
            u2h_bandwidth: db.u2h_bandwidth,
            u2h_antenna_gain: db_to_linear(db.u2h_antenna_gain_db),
            line_loss: db_to_linear(db.line_loss_db),
            boltzmann: db.boltzmann,
            noise_temp: db.noise_temp,
            carrier: db.carrier,
            light_speed: db.light_speed,
        }
    }

    fn named_fields(&self) -> [(&'static str, f64); 11] {
        [
            ("uplink_bandwidth", self.uplink_bandwidth),
            ("gu_tx_power", self.gu_tx_power),
            ("ref_gain", self.ref_gain),
            ("noise_psd", self.noise_psd),
            ("u2h_bandwidth", self.u2h_bandwidth),
            ("u2h_antenna_gain", self.u2h_antenna_gain),
            ("line_loss", self.line_loss),
            ("boltzmann", self.boltzmann),
            ("noise_temp", self.noise_temp),
            ("carrier", self.carrier),
            ("light_speed", self.light_speed),
        ]
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        Self::from_decibels(&RadioDecibels::default())
    }
}

/// Mean and standard deviation of the uplink gain estimation error of one user.
///
/// The deviation is usually specified relative to the mean uplink gain, which
/// only exists once a deployment fixes the serving UAV. `stdev_override`, when
/// present, wins over the fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyMoments {
    pub mean: f64,
    pub stdev_fraction: f64,
    pub stdev_override: Option<f64>,
}

impl UncertaintyMoments {
    pub fn resolve_stdev(&self, mean_gain: f64) -> f64 {
        self.stdev_override
            .unwrap_or(self.stdev_fraction * mean_gain)
    }
}

impl Default for UncertaintyMoments {
    fn default() -> Self {
        Self {
            mean: 0.0,
            stdev_fraction: 0.1,
            stdev_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub bounds: AreaBounds,
    pub users: Vec<GroundUser>,
    pub tasks: Vec<TaskSpec>,
    pub uavs: Vec<UavSpec>,
    pub hap: HapSpec,
    pub radio: RadioParams,
    pub uncertainty: Vec<UncertaintyMoments>,
    pub seed: u64,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// Sets every user's error deviation to zero (perfectly known channel).
    pub fn with_ideal_csi(mut self) -> Self {
        for u in &mut self.uncertainty {
            u.stdev_override = Some(0.0);
            u.mean = 0.0;
        }
        self
    }

    /// SHA-256 of the canonical JSON encoding, lowercase hex.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

/// Knobs for [`generate_scenario`]. `Default` reproduces the reference setup:
/// a 1 km square, 100 m UAV altitude and the HAP at (500, 500, 20 000) m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub bounds: AreaBounds,
    pub data_bits: Range,
    pub cycles_per_bit: Range,
    pub deadline: Range,
    pub confidence: f64,
    pub uav_altitude: f64,
    pub uav_cpu_cap: f64,
    pub uav_energy_cap: f64,
    pub uav_switch_cap: f64,
    pub uav_tx_power: f64,
    pub hap: HapSpec,
    pub radio: RadioDecibels,
    pub error_mean: f64,
    pub stdev_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            bounds: AreaBounds {
                x_min: 0.0,
                x_max: 1000.0,
                y_min: 0.0,
                y_max: 1000.0,
            },
            data_bits: Range {
                min: 50e6,
                max: 70e6,
            },
            cycles_per_bit: Range::fixed(300.0),
            deadline: Range::fixed(20.0),
            confidence: 0.95,
            uav_altitude: 100.0,
            uav_cpu_cap: 8e9,
            uav_energy_cap: 200.0,
            uav_switch_cap: 1e-27,
            uav_tx_power: 2.0,
            hap: HapSpec {
                position: [500.0, 500.0, 2e4],
                cpu_cap: 4e11,
                energy_cap: 20e3,
                switch_cap: 1e-28,
                task_slots: 10,
            },
            radio: RadioDecibels::default(),
            error_mean: 0.0,
            stdev_fraction: 0.1,
        }
    }
}

impl GenConfig {
    fn check(&self) -> Result<()> {
        let ranges = [
            ("x", self.bounds.x_min, self.bounds.x_max),
            ("y", self.bounds.y_min, self.bounds.y_max),
            ("data_bits", self.data_bits.min, self.data_bits.max),
            ("cycles_per_bit", self.cycles_per_bit.min, self.cycles_per_bit.max),
            ("deadline", self.deadline.min, self.deadline.max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name} range has min {lo} > max {hi}")));
            }
        }
        if self.stdev_fraction < 0.0 {
            return Err(Error::Config("stdev_fraction must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draws a scenario with `users` ground users placed uniformly in the area.
pub fn generate_scenario(users: usize, uavs: usize, seed: u64, config: &GenConfig) -> Result<Scenario> {
    if users == 0 || uavs == 0 {
        return Err(Error::Config(format!(
            "need at least one user and one UAV, got M={users}, N={uavs}"
        )));
    }
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = config.bounds;
    let xs = Range { min: b.x_min, max: b.x_max };
    let ys = Range { min: b.y_min, max: b.y_max };

    let mut gus = Vec::with_capacity(users);
    let mut tasks = Vec::with_capacity(users);
    for id in 0..users {
        let position = [xs.sample(&mut rng), ys.sample(&mut rng)];
        gus.push(GroundUser { id, position });
        tasks.push(TaskSpec {
            data_bits: config.data_bits.sample(&mut rng),
            cycles_per_bit: config.cycles_per_bit.sample(&mut rng),
            deadline: config.deadline.sample(&mut rng),
            confidence: config.confidence,
        });
    }
    let uav_list = (0..uavs)
        .map(|id| UavSpec {
            id,
            altitude: config.uav_altitude,
            cpu_cap: config.uav_cpu_cap,
            energy_cap: config.uav_energy_cap,
            switch_cap: config.uav_switch_cap,
            tx_power_to_hap: config.uav_tx_power,
        })
        .collect();
    let uncertainty = vec![
        UncertaintyMoments {
            mean: config.error_mean,
            stdev_fraction: config.stdev_fraction,
            stdev_override: None,
        };
        users
    ];

    Ok(Scenario {
        schema_version: SCHEMA_VERSION,
        bounds: b,
        users: gus,
        tasks,
        uavs: uav_list,
        hap: config.hap,
        radio: RadioParams::from_decibels(&config.radio),
        uncertainty,
        seed,
    })
}

/// A broken invariant of a scenario record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    EmptyPopulation,
    BoundsInverted,
    UserOutsideBounds { user: usize },
    LengthMismatch { section: String, expected: usize, found: usize },
    NonPositiveTaskField { task: usize, field: String },
    ConfidenceOutOfRange { task: usize },
    NonPositiveUavField { uav: usize, field: String },
    DuplicateUavId { id: usize },
    HapBelowUavs,
    NonPositiveHapField { field: String },
    NonPositiveRadioField { field: String },
    InvalidUncertainty { user: usize },
    UnsupportedSchema { version: u32 },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::EmptyPopulation => "empty-population",
            Violation::BoundsInverted => "bounds-inverted",
            Violation::UserOutsideBounds { .. } => "user-outside-bounds",
            Violation::LengthMismatch { .. } => "length-mismatch",
            Violation::NonPositiveTaskField { .. } => "task-field-not-positive",
            Violation::ConfidenceOutOfRange { .. } => "confidence-out-of-range",
            Violation::NonPositiveUavField { .. } => "uav-field-not-positive",
            Violation::DuplicateUavId { .. } => "duplicate-uav-id",
            Violation::HapBelowUavs => "hap-below-uavs",
            Violation::NonPositiveHapField { .. } => "hap-field-not-positive",
            Violation::NonPositiveRadioField { .. } => "radio-field-not-positive",
            Violation::InvalidUncertainty { .. } => "invalid-uncertainty",
            Violation::UnsupportedSchema { .. } => "unsupported-schema",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())?;
        match self {
            Violation::UserOutsideBounds { user } => write!(f, " (user {user})"),
            Violation::LengthMismatch { section, expected, found } => {
                write!(f, " ({section}: expected {expected}, found {found})")
            }
            Violation::NonPositiveTaskField { task, field } => write!(f, " (task {task}, {field})"),
            Violation::ConfidenceOutOfRange { task } => write!(f, " (task {task})"),
            Violation::NonPositiveUavField { uav, field } => write!(f, " (uav {uav}, {field})"),
            Violation::DuplicateUavId { id } => write!(f, " (id {id})"),
            Violation::NonPositiveHapField { field } | Violation::NonPositiveRadioField { field } => {
                write!(f, " ({field})")
            }
            Violation::InvalidUncertainty { user } => write!(f, " (user {user})"),
            Violation::UnsupportedSchema { version } => write!(f, " (version {version})"),
            _ => Ok(()),
        }
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Lists every broken invariant; an empty list means the scenario is usable.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.schema_version != SCHEMA_VERSION {
        out.push(Violation::UnsupportedSchema { version: s.schema_version });
    }
    let b = s.bounds;
    if !(b.x_min < b.x_max && b.y_min < b.y_max) {
        out.push(Violation::BoundsInverted);
    }
    let m = s.users.len();
    if m == 0 || s.uavs.is_empty() {
        out.push(Violation::EmptyPopulation);
    }
    for (idx, u) in s.users.iter().enumerate() {
        if !s.bounds.contains(u.position) {
            out.push(Violation::UserOutsideBounds { user: idx });
        }
    }
    for (section, found) in [("tasks", s.tasks.len()), ("uncertainty", s.uncertainty.len())] {
        if found != m {
            out.push(Violation::LengthMismatch {
                section: section.into(),
                expected: m,
                found,
            });
        }
    }
    for (idx, t) in s.tasks.iter().enumerate() {
        for (field, v) in [
            ("data_bits", t.data_bits),
            ("cycles_per_bit", t.cycles_per_bit),
            ("deadline", t.deadline),
        ] {
            if !positive(v) {
                out.push(Violation::NonPositiveTaskField {
                    task: idx,
                    field: field.into(),
                });
            }
        }
        if !(t.confidence > 0.0 && t.confidence < 1.0) {
            out.push(Violation::ConfidenceOutOfRange { task: idx });
        }
    }
    let mut ids: Vec<usize> = Vec::with_capacity(s.uavs.len());
    for (idx, u) in s.uavs.iter().enumerate() {
        for (field, v) in [
            ("altitude", u.altitude),
            ("cpu_cap", u.cpu_cap),
            ("energy_cap", u.energy_cap),
            ("switch_cap", u.switch_cap),
            ("tx_power_to_hap", u.tx_power_to_hap),
        ] {
            if !positive(v) {
                out.push(Violation::NonPositiveUavField {
                    uav: idx,
                    field: field.into(),
                });
            }
        }
        if ids.contains(&u.id) {
            out.push(Violation::DuplicateUavId { id: u.id });
        }
        ids.push(u.id);
    }
    let top_uav = s.uavs.iter().map(|u| u.altitude).fold(f64::NEG_INFINITY, f64::max);
    if !(s.hap.position[2] > top_uav) {
        out.push(Violation::HapBelowUavs);
    }
    for (field, v) in [
        ("cpu_cap", s.hap.cpu_cap),
        ("energy_cap", s.hap.energy_cap),
        ("switch_cap", s.hap.switch_cap),
    ] {
        if !positive(v) {
            out.push(Violation::NonPositiveHapField { field: field.into() });
        }
    }
    for (field, v) in s.radio.named_fields() {
        if !positive(v) {
            out.push(Violation::NonPositiveRadioField { field: field.into() });
        }
    }
    for (idx, u) in s.uncertainty.iter().enumerate() {
        let bad_override = u.stdev_override.is_some_and(|v| !(v >= 0.0) || !v.is_finite());
        if !u.mean.is_finite() || !(u.stdev_fraction >= 0.0) || !u.stdev_fraction.is_finite() || bad_override {
            out.push(Violation::InvalidUncertainty { user: idx });
        }
    }
    out
}

/// Rejects a scenario that has any violation.
pub fn ensure_valid(s: &Scenario) -> Result<()> {
    let v = validate_scenario(s);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(v))
    }
}

pub fn scenario_to_string(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serializes")
}

/// Parses a scenario document. Unknown keys are tolerated and returned as
/// dotted paths so callers can surface them.
pub fn parse_scenario(text: &str) -> Result<(Scenario, Vec<String>)> {
    let mut ignored = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_ignored::deserialize(de, |path| ignored.push(path.to_string()))?;
    Ok((scenario, ignored))
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    let mut text = scenario_to_string(s);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let (s, ignored) = parse_scenario(&text)?;
    for key in ignored {
        log::warn!("{}: ignoring unknown field `{key}`", path.display());
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decibel_conversions() {
        let r = RadioParams::default();
        assert!((r.ref_gain - 1e-5).abs() < 1e-20);
        assert!((r.noise_psd / 10f64.powf(-20.4) - 1.0).abs() < 1e-12);
        assert!((r.line_loss / 10f64.powf(-2.3) - 1.0).abs() < 1e-12);
        assert!((r.u2h_antenna_gain / 10f64.powf(4.2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_instance_geometry() {
        let s = generate_scenario(30, 6, 42, &GenConfig::default()).unwrap();
        assert_eq!(s.users.len(), 30);
        assert_eq!(s.uavs.len(), 6);
        assert!(s.uavs.iter().all(|u| u.altitude == 100.0));
        assert_eq!(s.hap.position, [500.0, 500.0, 2e4]);
        assert!(s.users.iter().all(|u| s.bounds.contains(u.position)));
        assert!(s.tasks.iter().all(|t| (50e6..=70e6).contains(&t.data_bits)));
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn minimal_instance_is_valid() {
        let s = generate_scenario(1, 1, 0, &GenConfig::default()).unwrap();
        assert_eq!(s.users.len(), 1);
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scenario(30, 6, 42, &GenConfig::default()).unwrap();
        let b = generate_scenario(30, 6, 42, &GenConfig::default()).unwrap();
        assert_eq!(scenario_to_string(&a), scenario_to_string(&b));
        let c = generate_scenario(30, 6, 43, &GenConfig::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn inverted_range_rejected() {
        let cfg = GenConfig {
            data_bits: Range { min: 70e6, max: 50e6 },
            ..GenConfig::default()
        };
        assert!(matches!(generate_scenario(3, 1, 0, &cfg), Err(Error::Config(_))));
        assert!(generate_scenario(0, 1, 0, &GenConfig::default()).is_err());
    }

    #[test]
    fn confidence_violation() {
        let mut s = generate_scenario(4, 2, 1, &GenConfig::default()).unwrap();
        s.tasks[2].confidence = 1.2;
        let v = validate_scenario(&s);
        assert_eq!(v, vec![Violation::ConfidenceOutOfRange { task: 2 }]);
        assert_eq!(v[0].code(), "confidence-out-of-range");
    }

    #[test]
    fn user_outside_bounds() {
        let mut s = generate_scenario(4, 2, 1, &GenConfig::default()).unwrap();
        s.users[0].position[0] = -5.0;
        let codes: Vec<_> = validate_scenario(&s).iter().map(Violation::code).collect();
        assert_eq!(codes, vec!["user-outside-bounds"]);
    }

    #[test]
    fn decibel_leak_is_caught() {
        let mut s = generate_scenario(2, 1, 1, &GenConfig::default()).unwrap();
        s.radio.ref_gain = -50.0;
        let codes: Vec<_> = validate_scenario(&s).iter().map(Violation::code).collect();
        assert_eq!(codes, vec!["radio-field-not-positive"]);
    }

    #[test]
    fn structural_violations() {
        let mut s = generate_scenario(3, 2, 1, &GenConfig::default()).unwrap();
        s.uavs[1].id = 0;
        s.hap.position[2] = 50.0;
        s.tasks.pop();
        let codes: Vec<_> = validate_scenario(&s).iter().map(Violation::code).collect();
        assert!(codes.contains(&"duplicate-uav-id"));
        assert!(codes.contains(&"hap-below-uavs"));
        assert!(codes.contains(&"length-mismatch"));
    }

    #[test]
    fn missing_section_names_field() {
        let s = generate_scenario(2, 1, 1, &GenConfig::default()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_string(&s)).unwrap();
        v.as_object_mut().unwrap().remove("hap");
        let err = parse_scenario(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("hap"), "{err}");
    }

    #[test]
    fn unknown_field_tolerated() {
        let s = generate_scenario(2, 1, 1, &GenConfig::default()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_string(&s)).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("comment".into(), serde_json::json!("from the future"));
        v["hap"]
            .as_object_mut()
            .unwrap()
            .insert("color".into(), serde_json::json!(3));
        let (back, ignored) = parse_scenario(&v.to_string()).unwrap();
        assert_eq!(back, s);
        assert_eq!(ignored, vec!["comment".to_string(), "hap.color".to_string()]);
    }

    #[test]
    fn ideal_csi_zeroes_deviation() {
        let s = generate_scenario(3, 1, 1, &GenConfig::default()).unwrap().with_ideal_csi();
        assert!(s.uncertainty.iter().all(|u| u.resolve_stdev(1e-9) == 0.0));
    }
}
