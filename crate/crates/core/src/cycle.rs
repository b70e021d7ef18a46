//! Driving cycles: CSV ingest, uniform resampling, speed capping and synthetic
//! gradient profiles.
//!
//! Two CSV layouts are accepted, distinguished by their header:
//!
//! * `t_s,v_mps,grade` with the grade as a rise/run fraction;
//! * `t_s,v_kmh,alt_m` with altitude in metres, from which the grade is derived.
//!
//! Grades are stored internally as angles in radians.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling time [s].
pub const DEFAULT_DT: f64 = 1.0;

/// Minimum distance per step used when differentiating altitude [m].
const ALTITUDE_DISTANCE_FLOOR: f64 = 0.1;

/// Climb attenuation gain for [`synthesize_gradient`]: `v / (1 + gain * grade)`.
pub const CLIMB_ATTENUATION_GAIN: f64 = 4.0;

/// Speeds are never attenuated below this value while the vehicle moves [m/s].
pub const CLIMB_SPEED_FLOOR: f64 = 2.0;

/// A uniformly sampled speed and gradient trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    label: String,
    dt: f64,
    t0: f64,
    speed: Vec<f64>,
    accel: Vec<f64>,
    grade: Vec<f64>,
    distance: f64,
    notes: Vec<String>,
}

/// Forward-difference acceleration; the last sample carries zero.
pub fn forward_accel(speed: &[f64], dt: f64) -> Vec<f64> {
    let mut accel: Vec<f64> = speed.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    accel.push(0.0);
    accel
}

fn forward_distance(speed: &[f64], dt: f64) -> f64 {
    speed.iter().map(|v| v * dt).sum()
}

impl DriveCycle {
    /// Builds a cycle from speed [m/s] and grade angle [rad] samples.
    pub fn new(label: impl Into<String>, dt: f64, speed: Vec<f64>, grade: Vec<f64>) -> Result<Self> {
        Self::with_start(label, dt, 0.0, speed, grade)
    }

    fn with_start(
        label: impl Into<String>,
        dt: f64,
        t0: f64,
        speed: Vec<f64>,
        grade: Vec<f64>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("sampling time must be positive, got {dt}")));
        }
        if speed.len() < 2 {
            return Err(Error::Validation("a cycle needs at least two samples".into()));
        }
        if speed.len() != grade.len() {
            return Err(Error::Validation(format!(
                "speed has {} samples but grade has {}",
                speed.len(),
                grade.len()
            )));
        }
        if let Some(k) = speed.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation(format!(
                "speed must be finite and non-negative (sample {k} is {})",
                speed[k]
            )));
        }
        if let Some(k) = grade.iter().position(|g| !g.is_finite() || g.abs() >= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Validation(format!("grade angle at sample {k} is invalid")));
        }
        let accel = forward_accel(&speed, dt);
        let distance = forward_distance(&speed, dt);
        Ok(Self {
            label: label.into(),
            dt,
            t0,
            speed,
            accel,
            grade,
            distance,
            notes: Vec::new(),
        })
    }

    /// Flat cycle from speeds only.
    pub fn flat(label: impl Into<String>, dt: f64, speed: Vec<f64>) -> Result<Self> {
        let n = speed.len();
        Self::new(label, dt, speed, vec![0.0; n])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    /// Number of Euler steps, one less than the sample count.
    pub fn steps(&self) -> usize {
        self.speed.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn accel(&self) -> &[f64] {
        &self.accel
    }

    /// Grade angles [rad].
    pub fn grade(&self) -> &[f64] {
        &self.grade
    }

    /// Cycle distance [m].
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn max_speed(&self) -> f64 {
        self.speed.iter().copied().fold(0.0, f64::max)
    }

    /// Net altitude change `sum v sin(theta) dt` [m].
    pub fn net_climb(&self) -> f64 {
        self.speed
            .iter()
            .zip(&self.grade)
            .map(|(v, th)| v * th.sin() * self.dt)
            .sum()
    }

    /// Free-form provenance notes (e.g. the speed attenuation rule that was applied).
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Whether every grade sample is zero.
    pub fn is_flat(&self) -> bool {
        self.grade.iter().all(|g| *g == 0.0)
    }

    /// Linear-interpolation resampling onto a new uniform grid.
    pub fn resample(&self, dt: f64) -> Result<Self> {
        let times = self.timestamps();
        let (t0, speed) = resample_uniform(&times, &self.speed, dt)?;
        let (_, grade) = resample_uniform(&times, &self.grade, dt)?;
        let mut out = Self::with_start(self.label.clone(), dt, t0, speed, grade)?;
        out.notes = self.notes.clone();
        Ok(out)
    }

    /// Writes the cycle in the `t_s,v_mps,grade` layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "v_mps", "grade"])?;
        for k in 0..self.len() {
            w.write_record([
                self.time(k).to_string(),
                self.speed[k].to_string(),
                self.grade[k].tan().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Resamples `values` given at strictly increasing `times` onto `t0 + k dt`.
///
/// The grid has `ceil(duration / dt) + 1` points; samples past the last
/// timestamp hold the final value.
fn resample_uniform(times: &[f64], values: &[f64], dt: f64) -> Result<(f64, Vec<f64>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("sampling time must be positive, got {dt}")));
    }
    let t0 = times[0];
    let duration = times[times.len() - 1] - t0;
    let n = ((duration / dt) - 1e-9).ceil().max(0.0) as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        while j + 1 < times.len() && times[j + 1] <= t {
            j += 1;
        }
        if j + 1 >= times.len() {
            out.push(values[times.len() - 1]);
        } else if t <= times[j] {
            out.push(values[j]);
        } else {
            let w = (t - times[j]) / (times[j + 1] - times[j]);
            out.push(values[j] + w * (values[j + 1] - values[j]));
        }
    }
    Ok((t0, out))
}

enum Layout {
    Grade,
    Altitude,
}

/// Reads a cycle CSV and resamples it to `dt_target`.
pub fn load_cycle(path: impl AsRef<Path>, dt_target: f64) -> Result<DriveCycle> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cycle".into());
    read_cycle(file, &label, dt_target)
}

/// Parses cycle CSV content from any reader.
pub fn read_cycle<R: Read>(reader: R, label: &str, dt_target: f64) -> Result<DriveCycle> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let layout = if find("v_kmh").is_some() || find("alt_m").is_some() {
        Layout::Altitude
    } else {
        Layout::Grade
    };
    let names: [&str; 3] = match layout {
        Layout::Grade => ["t_s", "v_mps", "grade"],
        Layout::Altitude => ["t_s", "v_kmh", "alt_m"],
    };
    let mut cols = [0usize; 3];
    for (slot, name) in cols.iter_mut().zip(names) {
        *slot = find(name).ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
    }

    let mut t = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |c: usize, name: &str| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: column `{name}` has value `{raw}`", row + 1)))
        };
        t.push(field(cols[0], names[0])?);
        a.push(field(cols[1], names[1])?);
        b.push(field(cols[2], names[2])?);
    }
    if t.is_empty() {
        return Err(Error::Validation("cycle file contains no samples".into()));
    }
    if let Some(k) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(format!(
            "timestamps must be strictly increasing (row {} -> {})",
            k + 1,
            k + 2
        )));
    }

    match layout {
        Layout::Grade => {
            let grade: Vec<f64> = b.iter().map(|g| g.atan()).collect();
            let (t0, speed) = resample_uniform(&t, &a, dt_target)?;
            let (_, grade) = resample_uniform(&t, &grade, dt_target)?;
            DriveCycle::with_start(label, dt_target, t0, speed, grade)
        }
        Layout::Altitude => {
            let speed_mps: Vec<f64> = a.iter().map(|v| v / 3.6).collect();
            let (t0, speed) = resample_uniform(&t, &speed_mps, dt_target)?;
            let (_, alt) = resample_uniform(&t, &b, dt_target)?;
            let grade = grade_from_altitude(&speed, &alt, dt_target);
            DriveCycle::with_start(label, dt_target, t0, speed, grade)
        }
    }
}

/// Grade angles from altitude by central differences on cumulative distance.
fn grade_from_altitude(speed: &[f64], alt: &[f64], dt: f64) -> Vec<f64> {
    let n = speed.len();
    let mut pos = Vec::with_capacity(n);
    let mut s = 0.0;
    for v in speed {
        pos.push(s);
        s += v * dt;
    }
    (0..n)
        .map(|k| {
            if n < 2 {
                return 0.0;
            }
            let (lo, hi) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            let floor = ALTITUDE_DISTANCE_FLOOR * (hi - lo) as f64;
            let run = (pos[hi] - pos[lo]).max(floor);
            ((alt[hi] - alt[lo]) / run).atan()
        })
        .collect()
}

/// Limits every speed sample to `v_cap` [m/s].
pub fn cap_speed(cycle: &DriveCycle, v_cap: f64) -> Result<DriveCycle> {
    if !(v_cap > 0.0) {
        return Err(Error::Validation(format!("speed cap must be positive, got {v_cap}")));
    }
    let speed = cycle.speed.iter().map(|v| v.min(v_cap)).collect();
    let mut out = DriveCycle::with_start(cycle.label.clone(), cycle.dt, cycle.t0, speed, cycle.grade.clone())?;
    out.notes = cycle.notes.clone();
    Ok(out)
}

/// Piecewise-constant gradient profile over distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientProfileSpec {
    /// `(length [m], grade [rise/run])` segments, in driving order.
    pub segments: Vec<(f64, f64)>,
    /// Width of the centred box filter applied to the sampled grade [samples].
    pub smoothing: usize,
}

impl GradientProfileSpec {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.0).sum()
    }

    /// Net signed climb over the segments [m].
    pub fn net_climb(&self) -> f64 {
        self.segments.iter().map(|(l, g)| l * g).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, (len, grade)) in self.segments.iter().enumerate() {
            if !(len.is_finite() && *len > 0.0) {
                return Err(Error::Validation(format!("segment {i} has non-positive length")));
            }
            if !(grade.is_finite() && grade.abs() < 0.5) {
                return Err(Error::Validation(format!("segment {i} grade {grade} outside (-0.5, 0.5)")));
            }
        }
        let scale: f64 = self.segments.iter().map(|(l, g)| (l * g).abs()).sum();
        if self.net_climb().abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::Validation(format!(
                "gradient profile does not return to its start altitude (net climb {} m)",
                self.net_climb()
            )));
        }
        Ok(())
    }
}

/// Overlays a hilly profile on a flat cycle.
///
/// Grades are assigned by the distance travelled at the start of each sample,
/// box-smoothed, and optionally used to slow the vehicle on climbs. Descending
/// grades are finally rescaled so that the cycle ends at its start altitude.
pub fn synthesize_gradient(
    cycle: &DriveCycle,
    spec: &GradientProfileSpec,
    speed_adjust: bool,
) -> Result<DriveCycle> {
    spec.validate()?;
    if !cycle.is_flat() {
        return Err(Error::Validation("gradient synthesis needs a flat input cycle".into()));
    }
    if spec.total_length() > cycle.distance + 1e-9 {
        return Err(Error::Validation(format!(
            "gradient profile ({} m) is longer than the cycle ({} m)",
            spec.total_length(),
            cycle.distance
        )));
    }
    let n = cycle.len();
    let dt = cycle.dt;

    let mut raw = Vec::with_capacity(n);
    let mut pos = 0.0;
    for v in &cycle.speed {
        raw.push(segment_grade(&spec.segments, pos));
        pos += v * dt;
    }
    let smoothed = box_smooth(&raw, spec.smoothing.max(1));

    let mut notes = cycle.notes.clone();
    let speed: Vec<f64> = if speed_adjust {
        cycle
            .speed
            .iter()
            .zip(&smoothed)
            .map(|(&v, &g)| {
                if g > 0.0 && v > 0.0 {
                    (v / (1.0 + CLIMB_ATTENUATION_GAIN * g)).max(v.min(CLIMB_SPEED_FLOOR))
                } else {
                    v
                }
            })
            .collect()
    } else {
        cycle.speed.clone()
    };
    if speed != cycle.speed {
        notes.push(format!(
            "climb speed attenuation v/(1+{CLIMB_ATTENUATION_GAIN}*grade), floor {CLIMB_SPEED_FLOOR} m/s while moving"
        ));
    }

    let mut grade: Vec<f64> = smoothed.iter().map(|g| g.atan()).collect();
    let climb: f64 = speed.iter().zip(&grade).filter(|(_, th)| **th > 0.0).map(|(v, th)| v * th.sin() * dt).sum();
    let descent: f64 = -speed.iter().zip(&grade).filter(|(_, th)| **th < 0.0).map(|(v, th)| v * th.sin() * dt).sum::<f64>();
    if climb > 0.0 || descent > 0.0 {
        if !(climb > 0.0 && descent > 0.0) {
            return Err(Error::Validation(
                "gradient profile climbs or descends only while stationary; altitude cannot be closed".into(),
            ));
        }
        let scale = climb / descent;
        for th in grade.iter_mut().filter(|th| **th < 0.0) {
            let s = (th.sin() * scale).max(-0.999);
            *th = s.asin();
        }
        notes.push(format!("descent grades rescaled by {scale} to close altitude"));
    }

    let mut out = DriveCycle::with_start(cycle.label.clone(), dt, cycle.t0, speed, grade)?;
    out.notes = notes;
    Ok(out)
}

fn segment_grade(segments: &[(f64, f64)], pos: f64) -> f64 {
    let mut start = 0.0;
    for (len, grade) in segments {
        if pos < start + len {
            return *grade;
        }
        start += len;
    }
    0.0
}

fn box_smooth(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let half_lo = (window - 1) / 2;
    let half_hi = window / 2;
    (0..values.len())
        .map(|k| {
            let lo = k.saturating_sub(half_lo);
            let hi = (k + half_hi).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}
