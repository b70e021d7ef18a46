//! Cross-study comparison tables and plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use microsize::designloop::{compare_scenarios, ScenarioDelta, SweepResult, TrendReport};

use crate::error::{CliError, CliResult};
use crate::study::{self, Manifest, ValidationReport, FORMAT_VERSION};
use crate::tables::{self, ResultsRow};

pub struct StudyArtifacts {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub sweep: SweepResult,
    pub validation: Option<ValidationReport>,
}

pub fn load_study(dir: &Path) -> CliResult<StudyArtifacts> {
    let manifest: Manifest = study::read_json(&dir.join(study::MANIFEST))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CliError::Artifact(format!(
            "{} has artifact format {} but this build reads format {FORMAT_VERSION}",
            dir.display(),
            manifest.format_version
        )));
    }
    let sweep_path = dir.join(study::SWEEP_JSON);
    if !sweep_path.exists() {
        return Err(CliError::Artifact(format!("{} has no {}; run `optimize` first", dir.display(), study::SWEEP_JSON)));
    }
    let sweep = study::read_json(&sweep_path)?;
    let validation_path = dir.join(study::VALIDATION_JSON);
    let validation = if validation_path.exists() { Some(study::read_json(&validation_path)?) } else { None };
    Ok(StudyArtifacts { dir: dir.to_path_buf(), manifest, sweep, validation })
}

#[derive(Serialize)]
struct DeltaRow<'a> {
    base: &'a str,
    other: &'a str,
    quantity: &'a str,
    unit: &'a str,
    base_value: f64,
    other_value: f64,
    delta_abs: f64,
    delta_pct: f64,
}

fn delta_rows<'a>(t: &'a TrendReport, currency: &'a str) -> Vec<DeltaRow<'a>> {
    let rows: [(&str, &str, &ScenarioDelta); 7] = [
        ("tco", currency, &t.tco),
        ("c_comp", currency, &t.c_comp),
        ("c_el", currency, &t.c_el),
        ("p_m_max", "W", &t.p_em_max),
        ("e_b_max", "Wh", &t.e_b_max),
        ("m_v", "kg", &t.m_v),
        ("gamma_sizing", "-", &t.gamma),
    ];
    rows.into_iter()
        .map(|(quantity, unit, d)| DeltaRow {
            base: &t.base,
            other: &t.other,
            quantity,
            unit,
            base_value: d.base,
            other_value: d.other,
            delta_abs: d.abs,
            delta_pct: d.pct,
        })
        .collect()
}

/// Files written by [`report`].
#[derive(Debug)]
pub struct ReportOutput {
    pub markdown: String,
    pub files: Vec<PathBuf>,
}

/// Compares the studies in `inputs`, the first being the base, and writes the
/// tables and plot data into `out`.
pub fn report(inputs: &[PathBuf], out: &Path) -> CliResult<ReportOutput> {
    if inputs.is_empty() {
        return Err(CliError::Config("report needs at least one study directory".into()));
    }
    let studies = inputs.iter().map(|d| load_study(d)).collect::<CliResult<Vec<_>>>()?;
    let currency = studies[0].manifest.currency.clone();
    for s in &studies[1..] {
        if s.manifest.currency != currency {
            return Err(CliError::Artifact(format!(
                "studies use different currencies ({currency} and {})",
                s.manifest.currency
            )));
        }
    }
    let mut names: Vec<&str> = studies.iter().map(|s| s.manifest.study.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Artifact(format!("study `{}` appears more than once", w[0])));
    }

    let plots = out.join("plots");
    std::fs::create_dir_all(&plots)?;
    let mut files = Vec::new();
    let rows: Vec<ResultsRow> =
        studies.iter().map(|s| ResultsRow::from_design(&s.manifest.study, s.sweep.best_design())).collect();

    let summary = out.join("summary.csv");
    tables::write_results_csv(&summary, &rows, &currency)?;
    files.push(summary);

    if studies.len() > 1 {
        let trends: Vec<TrendReport> = studies[1..].iter().map(|s| compare_scenarios(&studies[0].sweep, &s.sweep)).collect();
        let path = out.join("deltas.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for t in &trends {
            for row in delta_rows(t, &currency) {
                w.serialize(row)?;
            }
        }
        w.flush()?;
        files.push(path);
        let path = out.join("deltas.json");
        std::fs::write(&path, serde_json::to_string_pretty(&trends)?)?;
        files.push(path);
    }

    for s in &studies {
        let name = &s.manifest.study;
        let path = plots.join(format!("{name}_trajectories.csv"));
        tables::write_trajectory_csv(&path, s.sweep.best_design())?;
        files.push(path);
        for (src, suffix) in [(study::SWEEP_CSV, "sweep"), (study::OPERATING_POINTS_CSV, "operating_points")] {
            let from = s.dir.join(src);
            if from.exists() {
                let to = plots.join(format!("{name}_{suffix}.csv"));
                std::fs::copy(&from, &to)?;
                files.push(to);
            }
        }
    }

    let mut md = String::from("# Study comparison\n\n");
    md.push_str(&tables::results_markdown(&rows, &currency, true));
    if studies.iter().any(|s| s.validation.is_some()) {
        md.push_str("\n## Validation\n\n");
        md.push_str("| Study | dE opt [Wh] | dE sim [Wh] | gap [%] | gap, fitted P_oc [%] | flagged steps | mean motoring efficiency |\n");
        md.push_str("|---|---|---|---|---|---|---|\n");
        for s in &studies {
            let Some(v) = &s.validation else { continue };
            let f = &v.table.flags;
            let flagged = f.torque_limited + f.power_limited + f.overspeed + f.map_clamped + f.cone_infeasible;
            let _ = writeln!(
                md,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {} | {:.3} |",
                s.manifest.study,
                v.table.delta_e_opt_wh,
                v.table.delta_e_sim_wh,
                v.table.gap_pct,
                v.fit.gap_pct,
                flagged,
                v.table.mean_motoring_efficiency
            );
        }
    }
    let path = out.join("report.md");
    std::fs::write(&path, &md)?;
    files.push(path);
    Ok(ReportOutput { markdown: md, files })
}
