//! Results tables and plot-data CSVs.
//!
//! Every numeric CSV column carries its unit in the header. Values are written
//! with Rust's shortest round-trip formatting, so parsing a CSV gives back the
//! numbers stored in the matching JSON artifact.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use microsize::designloop::{DesignPoint, RatioDesign, ScenarioDelta, SweepEntry, SweepResult};
use microsize::validator::OperatingPoints;

use crate::error::{CliError, CliResult};

/// One study's best design in the layout of the published results tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub study: String,
    pub transmission: String,
    pub tco: f64,
    pub c_comp: f64,
    pub c_el: f64,
    pub p_m_max_w: f64,
    pub e_b_max_wh: f64,
    pub m_v_kg: f64,
    pub gamma_fgt: Option<f64>,
    pub gamma_min: Option<f64>,
    pub gamma_max: Option<f64>,
}

impl ResultsRow {
    pub fn from_design(study: &str, d: &DesignPoint) -> Self {
        let (gamma_fgt, gamma_min, gamma_max) = match d.ratio {
            RatioDesign::Fgt { gamma } => (Some(gamma), None, None),
            RatioDesign::Cvt { gamma_min, gamma_max } => (None, Some(gamma_min), Some(gamma_max)),
        };
        Self {
            study: study.into(),
            transmission: d.transmission.clone(),
            tco: d.costs.tco,
            c_comp: d.costs.c_comp,
            c_el: d.costs.c_op,
            p_m_max_w: d.p_em_max,
            e_b_max_wh: d.e_b_max,
            m_v_kg: d.m_v(),
            gamma_fgt,
            gamma_min,
            gamma_max,
        }
    }
}

fn results_header(currency: &str) -> Vec<String> {
    let mut h: Vec<String> = vec!["study".into(), "transmission".into()];
    for cost in ["tco", "c_comp", "c_el"] {
        h.push(format!("{cost}_{}", currency.to_lowercase()));
    }
    for col in ["p_m_max_w", "e_b_max_wh", "m_v_kg", "gamma_fgt", "gamma_min", "gamma_max"] {
        h.push(col.into());
    }
    h
}

fn opt(x: Option<f64>) -> String {
    x.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv(path: &Path, rows: &[ResultsRow], currency: &str) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(results_header(currency))?;
    for r in rows {
        w.write_record([
            r.study.clone(),
            r.transmission.clone(),
            r.tco.to_string(),
            r.c_comp.to_string(),
            r.c_el.to_string(),
            r.p_m_max_w.to_string(),
            r.e_b_max_wh.to_string(),
            r.m_v_kg.to_string(),
            opt(r.gamma_fgt),
            opt(r.gamma_min),
            opt(r.gamma_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> CliResult<Vec<ResultsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let bad = |what: &str| CliError::Artifact(format!("{}: {what}", path.display()));
    if r.headers()?.len() != 11 {
        return Err(bad("expected 11 columns"));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let rec = record?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(&format!("`{}` is not a number", &rec[i])));
        let maybe = |i: usize| if rec[i].is_empty() { Ok(None) } else { num(i).map(Some) };
        rows.push(ResultsRow {
            study: rec[0].into(),
            transmission: rec[1].into(),
            tco: num(2)?,
            c_comp: num(3)?,
            c_el: num(4)?,
            p_m_max_w: num(5)?,
            e_b_max_wh: num(6)?,
            m_v_kg: num(7)?,
            gamma_fgt: maybe(8)?,
            gamma_min: maybe(9)?,
            gamma_max: maybe(10)?,
        });
    }
    Ok(rows)
}

struct Quantity {
    label: String,
    get: fn(&ResultsRow) -> Option<f64>,
    decimals: usize,
}

fn quantities(rows: &[ResultsRow], currency: &str) -> Vec<Quantity> {
    let q = |label: String, get: fn(&ResultsRow) -> Option<f64>, decimals| Quantity { label, get, decimals };
    let mut out = vec![
        q(format!("TCO [{currency}]"), |r| Some(r.tco), 0),
        q(format!("C_comp [{currency}]"), |r| Some(r.c_comp), 0),
        q(format!("C_el [{currency}]"), |r| Some(r.c_el), 0),
        q("P_m,max [W]".into(), |r| Some(r.p_m_max_w), 0),
        q("E_b,max [Wh]".into(), |r| Some(r.e_b_max_wh), 0),
        q("m_v [kg]".into(), |r| Some(r.m_v_kg), 1),
    ];
    if rows.iter().all(|r| r.gamma_fgt.is_some()) {
        out.push(q("gamma [-]".into(), |r| r.gamma_fgt, 2));
    } else {
        out.push(q("gamma_fgt [-]".into(), |r| r.gamma_fgt, 2));
        out.push(q("gamma_min [-]".into(), |r| r.gamma_min, 2));
        out.push(q("gamma_max [-]".into(), |r| r.gamma_max, 2));
    }
    out
}

/// Row labels of the results table for these studies.
pub fn row_labels(rows: &[ResultsRow], currency: &str) -> Vec<String> {
    quantities(rows, currency).into_iter().map(|q| q.label).collect()
}

/// Markdown table with one column per study. With `deltas`, every study after
/// the first gets a column of changes relative to the first, e.g. `(+17.8%)`.
pub fn results_markdown(rows: &[ResultsRow], currency: &str, deltas: bool) -> String {
    let deltas = deltas && rows.len() > 1;
    let mut header = vec!["Quantity".to_string()];
    header.extend(rows.iter().map(|r| format!("{} ({})", r.study, r.transmission)));
    if deltas {
        header.extend(rows[1..].iter().map(|r| format!("{} vs {}", r.study, rows[0].study)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
    for q in quantities(rows, currency) {
        let mut cells = vec![q.label.clone()];
        cells.extend(rows.iter().map(|r| match (q.get)(r) {
            Some(x) => format!("{x:.*}", q.decimals),
            None => "-".into(),
        }));
        if deltas {
            let base = (q.get)(&rows[0]);
            cells.extend(rows[1..].iter().map(|r| match (base, (q.get)(r)) {
                (Some(b), Some(o)) => format!("({:+.1}%)", ScenarioDelta::new(b, o).pct),
                _ => String::new(),
            }));
        }
        let _ = writeln!(s, "| {} |", cells.join(" | "));
    }
    s
}

#[derive(Serialize)]
struct SweepRow<'a> {
    p_em_max_w: f64,
    status: &'a str,
    tco: Option<f64>,
    c_comp: Option<f64>,
    c_el: Option<f64>,
    e_b_max_wh: Option<f64>,
    m_v_kg: Option<f64>,
    gamma_sizing: Option<f64>,
    iterations: Option<usize>,
    detail: String,
}

pub fn write_sweep_csv(path: &Path, result: &SweepResult, currency: &str) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let cur = currency.to_lowercase();
    w.write_record([
        "p_em_max_w".to_string(),
        "status".into(),
        format!("tco_{cur}"),
        format!("c_comp_{cur}"),
        format!("c_el_{cur}"),
        "e_b_max_wh".into(),
        "m_v_kg".into(),
        "gamma_sizing".into(),
        "iterations".into(),
        "detail".into(),
    ])?;
    for e in &result.entries {
        let row = match e {
            SweepEntry::Feasible(d) => SweepRow {
                p_em_max_w: d.p_em_max,
                status: "feasible",
                tco: Some(d.costs.tco),
                c_comp: Some(d.costs.c_comp),
                c_el: Some(d.costs.c_op),
                e_b_max_wh: Some(d.e_b_max),
                m_v_kg: Some(d.m_v()),
                gamma_sizing: Some(d.ratio.sizing()),
                iterations: Some(d.iterations),
                detail: String::new(),
            },
            SweepEntry::Infeasible(i) => SweepRow {
                p_em_max_w: i.p_em_max,
                status: "infeasible",
                tco: None,
                c_comp: None,
                c_el: None,
                e_b_max_wh: None,
                m_v_kg: None,
                gamma_sizing: None,
                iterations: None,
                detail: i.constraints.join("; "),
            },
            SweepEntry::Failed { p_em_max, message } => SweepRow {
                p_em_max_w: *p_em_max,
                status: "failed",
                tco: None,
                c_comp: None,
                c_el: None,
                e_b_max_wh: None,
                m_v_kg: None,
                gamma_sizing: None,
                iterations: None,
                detail: message.clone(),
            },
        };
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_s: f64,
    pub v_mps: f64,
    pub p_req_w: f64,
    pub p_em_w: f64,
    pub p_dc_w: f64,
    pub p_b_w: f64,
    pub p_i_w: f64,
    /// Battery energy at the start of the step.
    pub e_b_wh: f64,
    pub soe: f64,
    pub gamma: f64,
    pub omega_radps: f64,
}

pub fn trajectory_rows(d: &DesignPoint) -> Vec<TrajectoryRow> {
    let t = &d.trajectories;
    (0..t.p_em.len())
        .map(|k| TrajectoryRow {
            t_s: t.time[k],
            v_mps: t.speed[k],
            p_req_w: t.p_req[k],
            p_em_w: t.p_em[k],
            p_dc_w: t.p_dc[k],
            p_b_w: t.p_b[k],
            p_i_w: t.p_i[k],
            e_b_wh: t.e_b[k],
            soe: t.e_b[k] / d.e_b_max,
            gamma: t.gamma[k],
            omega_radps: t.omega[k],
        })
        .collect()
}

pub fn write_trajectory_csv(path: &Path, d: &DesignPoint) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in trajectory_rows(d) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_operating_points_csv(path: &Path, points: &OperatingPoints) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "omega_radps", "torque_nm", "efficiency"])?;
    for p in &points.points {
        w.write_record([p.step.to_string(), p.omega.to_string(), p.torque.to_string(), p.efficiency.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
