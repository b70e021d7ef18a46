//! Resolved studies and the pipeline stages that produce their artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use microsize::components::battery::{fit_battery, BatteryModel, BatteryPack, PackLayout};
use microsize::components::motor::{fit_loss_coefficients, synthesize_motor_map, CoeffTable, MotorModel, MotorRating};
use microsize::components::params::VehicleParams;
use microsize::cycle::{self, DriveCycle, GradientProfileSpec};
use microsize::designloop::{size_grid, sweep, ClarabelAdapter, FixedPointSettings, SweepEntry, SweepResult, Tolerances};
use microsize::presets::{self, VehicleClass};
use microsize::validator::{operating_points, simulate, summarize, OpenCircuit, ValidationSummary};

use crate::config::{self, Overrides, StudyConfig, TableFormat};
use crate::error::{CliError, CliResult};
use crate::tables::{self, ResultsRow};

/// Version of the artifact layout; `report` refuses anything else.
pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const CYCLE_CSV: &str = "cycle.csv";
pub const MODELS_JSON: &str = "models.json";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const TRAJECTORY_CSV: &str = "best_trajectory.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_MD: &str = "results.md";
pub const VALIDATION_JSON: &str = "validation.json";
pub const VALIDATION_TRACE_CSV: &str = "validation_trace.csv";
pub const OPERATING_POINTS_CSV: &str = "operating_points.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub study: String,
    pub transmission: String,
    pub cycle: String,
    pub currency: String,
    /// Resolved vehicle parameters in config units.
    pub vehicle: Map<String, Value>,
}

pub struct Study {
    pub name: String,
    pub config: StudyConfig,
    /// Directory relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub params: VehicleParams,
    pub output_dir: PathBuf,
    pub grid: Vec<f64>,
    pub settings: FixedPointSettings,
    pub currency: String,
    pub tables: Vec<TableFormat>,
}

impl Study {
    pub fn resolve(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let mut config = StudyConfig::load(path)?;
        config.apply(overrides);
        let name = config.name.clone().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "study".into())
        });
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(name, config, base_dir)
    }

    pub fn from_config(name: String, config: StudyConfig, base_dir: PathBuf) -> CliResult<Self> {
        let params = config::vehicle_params(&config.vehicle)?;
        let (min, max, step) = config::default_grid(config.vehicle.preset);
        let s = &config.sweep;
        let grid = size_grid(s.min_w.unwrap_or(min), s.max_w.unwrap_or(max), s.step_w.unwrap_or(step))
            .map_err(|e| CliError::Config(format!("sweep: {e}")))?;
        let tolerances = match s.tolerance {
            Some(t) if !(t > 0.0 && t < 1.0) => {
                return Err(CliError::Config(format!("sweep.tolerance must lie in (0, 1), got {t}")))
            }
            Some(t) => Tolerances { feasibility: t, gap: t },
            None => Tolerances::default(),
        };
        let tolerances = tolerances.with_env_override().map_err(|e| CliError::Config(e.to_string()))?;
        let defaults = FixedPointSettings::default();
        let settings = FixedPointSettings {
            eps: s.eps_kg.unwrap_or(defaults.eps),
            max_iter: s.max_iter.unwrap_or(defaults.max_iter),
            m_v0: s.m_v0_kg,
            tolerances,
            ..defaults
        };
        if !(settings.eps > 0.0) || settings.max_iter == 0 {
            return Err(CliError::Config("sweep.eps_kg must be positive and sweep.max_iter at least 1".into()));
        }
        let output_dir = config.output.dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&name));
        let currency = config.output.currency.clone().unwrap_or_else(|| "EUR".into());
        let tables = config.output.tables.clone().unwrap_or_else(|| vec![TableFormat::Csv, TableFormat::Md]);
        Ok(Self { name, config, base_dir, params, output_dir, grid, settings, currency, tables })
    }

    pub fn cycle(&self) -> CliResult<DriveCycle> {
        let c = &self.config.cycle;
        let mut cycle = match (&c.builtin, &c.path) {
            (Some(name), None) => {
                let class = match name.as_str() {
                    "scooter_urban" => VehicleClass::Scooter,
                    "moped_urban" => VehicleClass::Moped,
                    other => {
                        return Err(CliError::Config(format!(
                            "unknown builtin cycle `{other}` (expected `scooter_urban` or `moped_urban`)"
                        )))
                    }
                };
                let cycle = presets::urban_cycle(class)?;
                if c.dt_s != cycle.dt() {
                    cycle.resample(c.dt_s)?
                } else {
                    cycle
                }
            }
            (None, Some(path)) => cycle::load_cycle(self.base_dir.join(path), c.dt_s)?,
            _ => return Err(CliError::Config("cycle needs exactly one of `builtin` and `path`".into())),
        };
        if let Some(v_cap) = c.v_cap_kmh {
            cycle = cycle::cap_speed(&cycle, v_cap / 3.6)?;
        }
        let profile = match (&c.hills, &c.gradient) {
            (Some(_), Some(_)) => return Err(CliError::Config("cycle takes either `hills` or `gradient`, not both".into())),
            (Some(preset), None) => Some(presets::hill_profile(preset.class())),
            (None, Some(g)) => Some(GradientProfileSpec {
                segments: g.segments.iter().map(|s| (s[0], s[1])).collect(),
                smoothing: g.smoothing,
            }),
            (None, None) => None,
        };
        if let Some(profile) = profile {
            let label = format!("{}_hilly", cycle.label());
            cycle = cycle::synthesize_gradient(&cycle, &profile, c.speed_adjust)?.with_label(label);
        }
        if let Some(label) = &c.label {
            cycle = cycle.with_label(label.clone());
        }
        Ok(cycle)
    }

    pub fn motor(&self) -> CliResult<MotorModel> {
        let m = &self.config.motor;
        let map = synthesize_motor_map(config::loss_shape(m), config::motor_rating(m))?;
        Ok(fit_loss_coefficients(&map)?)
    }

    pub fn pack(&self) -> CliResult<BatteryPack> {
        let b = &self.config.battery;
        let layout = PackLayout {
            series: b.series.unwrap_or(presets::DEFAULT_SERIES),
            parallel: b.parallel.unwrap_or(presets::DEFAULT_PARALLEL),
            capacity_ah: b.cell_capacity_ah.unwrap_or(presets::DEFAULT_CELL_CAPACITY_AH),
            v_nom: b.pack_voltage_v.unwrap_or(presets::DEFAULT_PACK_VOLTAGE),
        };
        Ok(BatteryPack::new(config::cell_table(b, &self.base_dir)?, layout)?)
    }

    pub fn battery(&self, pack: &BatteryPack) -> CliResult<BatteryModel> {
        let window = self.config.battery.fit_window.unwrap_or(presets::DEFAULT_FIT_WINDOW);
        Ok(fit_battery(pack, window)?)
    }

    pub fn manifest(&self, cycle: &DriveCycle) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            study: self.name.clone(),
            transmission: self.params.transmission.name().into(),
            cycle: cycle.label().into(),
            currency: self.currency.clone(),
            vehicle: config::vehicle_table(&self.params),
        }
    }

    /// Resolved configuration and planned grid, for `--dry-run`.
    pub fn plan(&self) -> Value {
        json!({
            "study": self.name,
            "output_dir": self.output_dir,
            "preset": self.config.vehicle.preset,
            "transmission": self.params.transmission.name(),
            "vehicle": config::vehicle_table(&self.params),
            "motor": { "rating": config::motor_rating(&self.config.motor), "loss_shape": config::loss_shape(&self.config.motor) },
            "battery": self.battery_plan(),
            "cycle": self.config.cycle,
            "sweep": {
                "grid_w": self.grid,
                "sizes": self.grid.len(),
                "eps_kg": self.settings.eps,
                "max_iter": self.settings.max_iter,
                "m_v0_kg": self.settings.m_v0.unwrap_or(self.params.m_f + 3.0),
                "tolerance": self.settings.tolerances.feasibility,
            },
            "currency": self.currency,
            "tables": self.tables,
        })
    }

    fn battery_plan(&self) -> Value {
        let b = &self.config.battery;
        json!({
            "series": b.series.unwrap_or(presets::DEFAULT_SERIES),
            "parallel": b.parallel.unwrap_or(presets::DEFAULT_PARALLEL),
            "cell_capacity_ah": b.cell_capacity_ah.unwrap_or(presets::DEFAULT_CELL_CAPACITY_AH),
            "pack_voltage_v": b.pack_voltage_v.unwrap_or(presets::DEFAULT_PACK_VOLTAGE),
            "cell": match (&b.cell_table, &b.cell) {
                (Some(path), _) => json!({ "table": self.base_dir.join(path) }),
                (None, Some(c)) => json!(c),
                (None, None) => json!("default"),
            },
            "fit_window": b.fit_window.unwrap_or(presets::DEFAULT_FIT_WINDOW),
        })
    }

    fn out(&self, file: &str) -> PathBuf {
        self.output_dir.join(file)
    }

    fn prepare(&self, cycle: &DriveCycle) -> CliResult<()> {
        std::fs::create_dir_all(&self.output_dir)?;
        write_json(&self.out(MANIFEST), &self.manifest(cycle))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Artifact(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))
}

/// Cycle statistics printed by the `cycle` stage.
pub fn cycle_summary(cycle: &DriveCycle) -> Value {
    json!({
        "label": cycle.label(),
        "samples": cycle.len(),
        "dt_s": cycle.dt(),
        "duration_s": cycle.duration(),
        "distance_m": cycle.distance(),
        "max_speed_mps": cycle.max_speed(),
        "net_climb_m": cycle.net_climb(),
        "notes": cycle.notes(),
    })
}

pub fn run_cycle(study: &Study) -> CliResult<(DriveCycle, PathBuf)> {
    let cycle = study.cycle()?;
    study.prepare(&cycle)?;
    let path = study.out(CYCLE_CSV);
    cycle.save_csv(&path)?;
    Ok((cycle, path))
}

/// Fitted models without the tabulated loss map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub motor: FittedMotor,
    pub battery: BatteryModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedMotor {
    pub source: String,
    pub rating: MotorRating,
    pub fit_rmse_norm: Option<f64>,
    pub excluded_levels: Vec<f64>,
    pub coeff_table: Option<CoeffTable>,
}

pub struct Models {
    pub motor: MotorModel,
    pub pack: BatteryPack,
    pub battery: BatteryModel,
}

impl Models {
    pub fn summary(&self) -> FittedModels {
        let m = &self.motor;
        FittedModels {
            motor: FittedMotor {
                source: m.source.clone(),
                rating: m.rating,
                fit_rmse_norm: m.fit_rmse_norm,
                excluded_levels: m.coeff_table.as_ref().map(CoeffTable::excluded_levels).unwrap_or_default(),
                coeff_table: m.coeff_table.clone(),
            },
            battery: self.battery.clone(),
        }
    }
}

pub fn fit_models(study: &Study) -> CliResult<Models> {
    let motor = study.motor()?;
    let pack = study.pack()?;
    let battery = study.battery(&pack)?;
    Ok(Models { motor, pack, battery })
}

pub fn run_fit(study: &Study, cycle: &DriveCycle) -> CliResult<Models> {
    let models = fit_models(study)?;
    study.prepare(cycle)?;
    write_json(&study.out(MODELS_JSON), &models.summary())?;
    Ok(models)
}

pub fn run_optimize(study: &Study, cycle: &DriveCycle, models: &Models) -> CliResult<SweepResult> {
    let started = std::time::Instant::now();
    let result = sweep(
        cycle,
        &study.params,
        &models.motor,
        &models.battery,
        &study.grid,
        &study.settings,
        &ClarabelAdapter::default(),
    )?;
    log::info!(
        "{}: {} sizes in {:.1} s, {} feasible",
        study.name,
        result.grid.len(),
        started.elapsed().as_secs_f64(),
        result.feasible().count()
    );
    if result.is_partial() {
        log::info!("{}: some motor sizes are infeasible or failed; see {SWEEP_CSV}", study.name);
    }
    study.prepare(cycle)?;
    write_json(&study.out(SWEEP_JSON), &result)?;
    tables::write_sweep_csv(&study.out(SWEEP_CSV), &result, &study.currency)?;
    let best = result.best_design();
    tables::write_trajectory_csv(&study.out(TRAJECTORY_CSV), best)?;
    let row = ResultsRow::from_design(&study.name, best);
    write_json(&study.out(RESULTS_JSON), &row)?;
    if study.tables.contains(&TableFormat::Csv) {
        tables::write_results_csv(&study.out(RESULTS_CSV), std::slice::from_ref(&row), &study.currency)?;
    }
    if study.tables.contains(&TableFormat::Md) {
        std::fs::write(study.out(RESULTS_MD), tables::results_markdown(&[row], &study.currency, false))?;
    }
    Ok(result)
}

/// Consumption gap with the cell table and with the optimizer's affine fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub table: ValidationSummary,
    pub fit: ValidationSummary,
}

pub fn run_validate(study: &Study, cycle: &DriveCycle, models: &Models, result: &SweepResult) -> CliResult<ValidationReport> {
    let design = result.best_design();
    let trace = simulate(design, cycle, &study.params, &models.motor, OpenCircuit::Table(&models.pack))?;
    let fit_trace = simulate(design, cycle, &study.params, &models.motor, OpenCircuit::Fit(&models.battery))?;
    let report = ValidationReport {
        table: summarize(design, &trace, &models.motor)?,
        fit: summarize(design, &fit_trace, &models.motor)?,
    };
    if !trace.is_feasible() {
        log::warn!("{}: simulated trace raised flags {:?}", study.name, report.table.flags);
    }
    study.prepare(cycle)?;
    write_json(&study.out(VALIDATION_JSON), &report)?;
    trace.save_csv(&study.out(VALIDATION_TRACE_CSV))?;
    tables::write_operating_points_csv(&study.out(OPERATING_POINTS_CSV), &operating_points(&trace, &models.motor)?)?;
    Ok(report)
}

/// Sweep saved by an earlier `optimize` run of this study.
pub fn load_sweep(study: &Study) -> CliResult<SweepResult> {
    let path = study.out(SWEEP_JSON);
    if !path.exists() {
        return Err(CliError::Artifact(format!("{} not found; run `optimize` first", path.display())));
    }
    read_json(&path)
}

/// Best-size TCO, for logging.
pub fn best_line(study: &Study, result: &SweepResult) -> String {
    let d = result.best_design();
    let infeasible = result.entries.iter().filter(|e| !matches!(e, SweepEntry::Feasible(_))).count();
    format!(
        "{}: best P_em,max = {} W, TCO = {:.1} {} ({} of {} sizes infeasible or failed)",
        study.name,
        d.p_em_max,
        d.costs.tco,
        study.currency,
        infeasible,
        result.grid.len()
    )
}
