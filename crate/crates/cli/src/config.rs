//! Study configuration files.
//!
//! A study is one TOML file. Vehicle keys use the units of the usual parameter
//! table (km/h for the top speed, percent for the start gradient); anything not
//! given is taken from the vehicle preset and listed in a log notice.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use microsize::components::battery::CellTable;
use microsize::components::motor::{LossShape, MotorRating};
use microsize::components::params::VehicleParams;
use microsize::presets::{self, VehicleClass};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Scooter,
    Moped,
}

impl Preset {
    pub fn class(self) -> VehicleClass {
        match self {
            Preset::Scooter => VehicleClass::Scooter,
            Preset::Moped => VehicleClass::Moped,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Preset::Scooter => "scooter",
            Preset::Moped => "moped",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionKind {
    #[default]
    Fgt,
    Cvt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Study name; defaults to the file stem.
    pub name: Option<String>,
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub motor: MotorSection,
    #[serde(default)]
    pub battery: BatterySection,
    pub cycle: CycleSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSection {
    pub preset: Preset,
    #[serde(default)]
    pub transmission: TransmissionKind,
    /// Parameter overrides, checked against [`VEHICLE_KEYS`].
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

/// Config key, field of [`VehicleParams`] and factor from config to internal units.
const VEHICLE_KEYS: &[(&str, &str, f64)] = &[
    ("m_d", "m_d", 1.0),
    ("m_f", "m_f", 1.0),
    ("c_rr", "c_rr", 1.0),
    ("g", "g", 1.0),
    ("rho_a", "rho_a", 1.0),
    ("c_d", "c_d", 1.0),
    ("a_f", "a_f", 1.0),
    ("r_w", "r_w", 1.0),
    ("gamma_fd", "gamma_fd", 1.0),
    ("eta_gb", "eta_gb", 1.0),
    ("eta_fd", "eta_fd", 1.0),
    ("r_b", "r_b", 1.0),
    ("p_aux", "p_aux", 1.0),
    ("zeta_min", "zeta_min", 1.0),
    ("zeta_max", "zeta_max", 1.0),
    ("rho_em", "rho_em", 1.0),
    ("rho_bat", "rho_bat", 1.0),
    ("c_el", "c_el", 1.0),
    ("c_bat", "c_bat", 1.0),
    ("c_em", "c_em", 1.0),
    ("c_add", "c_add", 1.0),
    ("d_max_km", "d_max_km", 1.0),
    ("d_exp_km", "d_exp_km", 1.0),
    ("t_acc", "t_acc", 1.0),
    ("theta_start_pct", "theta_start", 0.01),
    ("v_max_kmh", "v_max", 1.0 / 3.6),
    ("omega_em_max", "omega_em_max", 1.0),
    ("mu_x", "mu_x", 1.0),
];

const FGT_KEYS: &[&str] = &["rho_fgt"];
const CVT_KEYS: &[&str] = &["c_f", "m_cvt_base", "rho_cvt"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorSection {
    pub p_max_ref_w: Option<f64>,
    pub t_max_ref_nm: Option<f64>,
    pub omega_max_radps: Option<f64>,
    pub km1_ref: Option<f64>,
    pub km2_ref: Option<f64>,
    /// Loss shape the reference map is synthesized from.
    pub loss_shape: Option<LossShape>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub v_empty: f64,
    pub v_full: f64,
    pub r_ohm: f64,
    pub i_max_a: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySection {
    pub series: Option<usize>,
    pub parallel: Option<usize>,
    pub cell_capacity_ah: Option<f64>,
    pub pack_voltage_v: Option<f64>,
    /// Affine cell description; ignored when `cell_table` is given.
    pub cell: Option<CellSection>,
    /// CSV with columns `soe,voc_v,r_ohm,i_max_a`.
    pub cell_table: Option<PathBuf>,
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientSection {
    /// `[length_m, grade]` pairs in driving order.
    pub segments: Vec<[f64; 2]>,
    #[serde(default = "default_smoothing")]
    pub smoothing: usize,
}

fn default_smoothing() -> usize {
    5
}

fn default_true() -> bool {
    true
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSection {
    /// Bundled cycle: `scooter_urban` or `moped_urban`.
    pub builtin: Option<String>,
    /// Cycle CSV, relative to the config file.
    pub path: Option<PathBuf>,
    pub label: Option<String>,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub v_cap_kmh: Option<f64>,
    /// Shipped hill profile of a vehicle preset.
    pub hills: Option<Preset>,
    pub gradient: Option<GradientSection>,
    /// Slow down on climbs when overlaying hills.
    #[serde(default = "default_true")]
    pub speed_adjust: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub min_w: Option<f64>,
    pub max_w: Option<f64>,
    pub step_w: Option<f64>,
    pub eps_kg: Option<f64>,
    pub max_iter: Option<usize>,
    pub m_v0_kg: Option<f64>,
    /// Solver feasibility and gap tolerance.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Md,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Results table formats; JSON artifacts are always written.
    pub tables: Option<Vec<TableFormat>>,
    pub currency: Option<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub grid_min_w: Option<f64>,
    pub grid_max_w: Option<f64>,
    pub grid_step_w: Option<f64>,
    pub tolerance: Option<f64>,
}

impl StudyConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.output_dir {
            self.output.dir = Some(d.clone());
        }
        let s = &mut self.sweep;
        s.min_w = o.grid_min_w.or(s.min_w);
        s.max_w = o.grid_max_w.or(s.max_w);
        s.step_w = o.grid_step_w.or(s.step_w);
        s.tolerance = o.tolerance.or(s.tolerance);
    }
}

/// Preset parameters with the vehicle section applied.
pub fn vehicle_params(v: &VehicleSection) -> CliResult<VehicleParams> {
    let cvt = v.transmission == TransmissionKind::Cvt;
    let base = match (v.preset, cvt) {
        (Preset::Moped, true) => presets::moped_cvt(),
        (Preset::Scooter, true) => VehicleParams { transmission: presets::moped_cvt().transmission, ..presets::scooter() },
        (preset, false) => presets::vehicle(preset.class()),
    };
    if cvt && !v.values.contains_key("c_f") {
        return Err(CliError::Config("vehicle.c_f is required when transmission = \"cvt\"".into()));
    }
    let (own, other) = if cvt { (CVT_KEYS, FGT_KEYS) } else { (FGT_KEYS, CVT_KEYS) };

    let Value::Object(mut fields) = serde_json::to_value(&base).expect("parameters serialize") else {
        unreachable!("parameters serialize to an object")
    };
    let Some(Value::Object(mut transmission)) = fields.remove("transmission") else {
        unreachable!("transmission serializes to an object")
    };
    let mut defaulted = Vec::new();
    for (key, field, factor) in VEHICLE_KEYS {
        match v.values.get(*key) {
            Some(x) => {
                fields.insert((*field).into(), number(x * factor, key)?);
            }
            None => defaulted.push(*key),
        }
    }
    for key in own {
        match v.values.get(*key) {
            Some(x) => {
                transmission.insert((*key).into(), number(*x, key)?);
            }
            None => defaulted.push(*key),
        }
    }
    for key in v.values.keys() {
        if other.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "vehicle.{key} does not apply to transmission = \"{}\"",
                if cvt { "cvt" } else { "fgt" }
            )));
        }
        if !own.contains(&key.as_str()) && !VEHICLE_KEYS.iter().any(|(k, _, _)| k == key) {
            return Err(CliError::Config(format!("unknown vehicle key `{key}`")));
        }
    }
    if !defaulted.is_empty() {
        log::info!("vehicle keys defaulted from the {} preset: {}", v.preset.name(), defaulted.join(", "));
    }
    fields.insert("transmission".into(), Value::Object(transmission));
    let params: VehicleParams =
        serde_json::from_value(Value::Object(fields)).map_err(|e| CliError::Config(e.to_string()))?;
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(params)
}

fn number(x: f64, key: &str) -> CliResult<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| CliError::Config(format!("vehicle.{key} must be finite")))
}

/// Vehicle parameters in config units, the inverse of [`vehicle_params`].
pub fn vehicle_table(params: &VehicleParams) -> Map<String, Value> {
    let Value::Object(fields) = serde_json::to_value(params).expect("parameters serialize") else {
        unreachable!("parameters serialize to an object")
    };
    let mut out = Map::new();
    for (key, field, factor) in VEHICLE_KEYS {
        let value = match &fields[*field] {
            Value::Number(n) => n.as_f64().and_then(|x| serde_json::Number::from_f64(x / factor)).map(Value::Number),
            _ => None,
        };
        out.insert((*key).into(), value.unwrap_or(Value::Null));
    }
    if let Value::Object(t) = &fields["transmission"] {
        out.extend(t.clone());
    }
    out
}

pub fn motor_rating(m: &MotorSection) -> MotorRating {
    let r = presets::reference_motor();
    MotorRating {
        p_max_ref: m.p_max_ref_w.unwrap_or(r.p_max_ref),
        t_max_ref: m.t_max_ref_nm.unwrap_or(r.t_max_ref),
        omega_max: m.omega_max_radps.unwrap_or(r.omega_max),
        km1_ref: m.km1_ref.unwrap_or(r.km1_ref),
        km2_ref: m.km2_ref.unwrap_or(r.km2_ref),
    }
}

pub fn loss_shape(m: &MotorSection) -> LossShape {
    m.loss_shape.unwrap_or_else(presets::reference_loss_shape)
}

#[derive(Deserialize)]
struct CellRow {
    soe: f64,
    voc_v: f64,
    r_ohm: f64,
    i_max_a: f64,
}

/// Cell table from the battery section; `base` resolves relative paths.
pub fn cell_table(b: &BatterySection, base: &Path) -> CliResult<CellTable> {
    if let Some(path) = &b.cell_table {
        let path = base.join(path);
        let mut reader = csv::Reader::from_path(&path)
            .map_err(|e| CliError::Config(format!("cannot read cell table {}: {e}", path.display())))?;
        let mut table = CellTable { soe: vec![], voc: vec![], r: vec![], i_max: vec![] };
        for row in reader.deserialize::<CellRow>() {
            let row = row.map_err(|e| CliError::Config(format!("cell table {}: {e}", path.display())))?;
            table.soe.push(row.soe);
            table.voc.push(row.voc_v);
            table.r.push(row.r_ohm);
            table.i_max.push(row.i_max_a);
        }
        table.validate().map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(table);
    }
    Ok(match &b.cell {
        Some(c) => CellTable::affine_voc(c.v_empty, c.v_full, c.r_ohm, c.i_max_a, 21),
        None => presets::default_cell(),
    })
}

/// Default sweep range of a vehicle preset [W].
pub fn default_grid(preset: Preset) -> (f64, f64, f64) {
    match preset {
        Preset::Scooter => (300.0, 800.0, 10.0),
        Preset::Moped => (2000.0, 3000.0, 10.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(text: &str) -> VehicleSection {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn preset_round_trips_through_config_units() {
        let params = vehicle_params(&section("preset = \"moped\"")).unwrap();
        assert_eq!(params, presets::moped_fgt());
        let table = vehicle_table(&params);
        assert!((table["v_max_kmh"].as_f64().unwrap() - 45.0).abs() < 1e-12);
        assert!((table["theta_start_pct"].as_f64().unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_use_table_units() {
        let params = vehicle_params(&section("preset = \"scooter\"\nv_max_kmh = 36.0\ntheta_start_pct = 5\n")).unwrap();
        assert!((params.v_max - 10.0).abs() < 1e-12);
        assert!((params.theta_start - 0.05).abs() < 1e-12);
    }

    #[test]
    fn cvt_needs_its_coverage() {
        let err = vehicle_params(&section("preset = \"moped\"\ntransmission = \"cvt\"")).unwrap_err();
        assert!(err.to_string().contains("c_f"), "{err}");
        let params = vehicle_params(&section("preset = \"moped\"\ntransmission = \"cvt\"\nc_f = 2.7")).unwrap();
        assert_eq!(params, presets::moped_cvt());
    }

    #[test]
    fn stray_keys_are_rejected() {
        assert!(vehicle_params(&section("preset = \"scooter\"\nc_f = 2.0")).is_err());
        assert!(vehicle_params(&section("preset = \"scooter\"\nwheel_count = 2")).is_err());
        assert!(vehicle_params(&section("preset = \"scooter\"\nr_b = 1.5")).is_err());
    }
}
