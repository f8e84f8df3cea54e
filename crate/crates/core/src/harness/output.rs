//! CSV, JSON and SVG artefacts of an experiment. Everything is rendered in
//! memory first and written only once all files are ready.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiment::{CellInfo, ExperimentResult, RegretCurve, RegretMode};
use crate::baselines::Algorithm;
use crate::error::{Error, Result};

pub const REGRET_LONG: &str = "regret_long.csv";
pub const LOSS_LONG: &str = "loss_long.csv";
pub const REGRET_MEAN: &str = "regret_mean.csv";
pub const SUMMARY: &str = "summary.csv";
pub const METADATA: &str = "metadata.json";

pub fn svg_name(scenario: &str) -> String {
    format!("regret_{scenario}.svg")
}

/// Per-round mean over curves. A curve shorter than the longest one keeps
/// its final value for the remaining rounds.
pub fn mean_curve(curves: &[&RegretCurve]) -> Vec<f64> {
    let len = curves.iter().map(|c| c.values.len()).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let s: f64 = curves
                .iter()
                .map(|c| c.values.get(t).copied().unwrap_or_else(|| c.final_value()))
                .sum();
            s / curves.len() as f64
        })
        .collect()
}

/// Curves grouped by `(scenario, algorithm)` in first-seen order.
fn grouped(curves: &[RegretCurve]) -> Vec<((String, Algorithm), Vec<&RegretCurve>)> {
    let mut order: Vec<(String, Algorithm)> = Vec::new();
    let mut map: BTreeMap<(String, Algorithm), Vec<&RegretCurve>> = BTreeMap::new();
    for c in curves {
        let key = (c.scenario.clone(), c.algorithm);
        if !map.contains_key(&key) {
            order.push(key.clone());
        }
        map.entry(key).or_default().push(c);
    }
    order
        .into_iter()
        .map(|k| {
            let v = map.remove(&k).expect("key recorded");
            (k, v)
        })
        .collect()
}

pub fn long_csv(curves: &[RegretCurve]) -> String {
    let mut s = String::from("scenario,algorithm,seed,round,cumulative_regret\n");
    for c in curves {
        for (t, v) in c.values.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", c.scenario, c.algorithm, c.seed, t + 1, v);
        }
    }
    s
}

pub fn mean_csv(curves: &[RegretCurve]) -> String {
    let mut s = String::from("scenario,algorithm,round,mean_cumulative_regret,seeds\n");
    for ((scenario, alg), group) in grouped(curves) {
        for (t, v) in mean_curve(&group).iter().enumerate() {
            let _ = writeln!(s, "{scenario},{alg},{},{v},{}", t + 1, group.len());
        }
    }
    s
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("scenario,algorithm,mode,seeds,final_mean,final_stderr\n");
    for curves in [&result.curves, &result.absolute] {
        for ((scenario, alg), group) in grouped(curves) {
            let finals: Vec<f64> = group.iter().map(|c| c.final_value()).collect();
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let se = if finals.len() > 1 {
                (finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            let _ = writeln!(s, "{scenario},{alg},{},{},{mean},{se}", group[0].mode.as_str(), finals.len());
        }
    }
    s
}

#[derive(Serialize)]
struct Metadata<'a> {
    scenario: String,
    primary_mode: Option<RegretMode>,
    files: BTreeMap<&'static str, &'static str>,
    config: &'a ExperimentConfig,
    cells: &'a [CellInfo],
    notes: Vec<&'static str>,
}

pub fn metadata_json(result: &ExperimentResult, cfg: &ExperimentConfig) -> Result<String> {
    let mut files = BTreeMap::new();
    files.insert(REGRET_LONG, "cumulative regret per round in the primary mode");
    if !result.absolute.is_empty() {
        files.insert(LOSS_LONG, "cumulative 0-1 loss per round without oracle subtraction");
    }
    files.insert(REGRET_MEAN, "seed-averaged primary curves");
    files.insert(SUMMARY, "final values per scenario and algorithm, both modes");
    let meta = Metadata {
        scenario: cfg.scenario.to_string(),
        primary_mode: result.curves.first().map(|c| c.mode),
        files,
        config: cfg,
        cells: &result.cells,
        notes: vec![
            "rounds are 1-based global round-robin steps: every test user at t, then t + 1",
            "oracle_relative: loss of the recommendation minus loss of the true-preference recommendation, choices drawn with shared randomness",
            "seed averages hold a shorter curve at its final value",
        ],
    };
    let mut s = serde_json::to_string_pretty(&meta)?;
    s.push('\n');
    Ok(s)
}

const PALETTE: [&str; 9] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4",
];

/// Self-contained line chart of the seed-averaged curves of one scenario.
pub fn svg_chart(scenario: &str, curves: &[RegretCurve]) -> String {
    let groups: Vec<(Algorithm, Vec<f64>)> = grouped(curves)
        .into_iter()
        .filter(|((s, _), _)| s == scenario)
        .map(|((_, a), g)| (a, mean_curve(&g)))
        .collect();
    let (w, h, left, right, top, bottom) = (760.0, 440.0, 70.0, 190.0, 30.0, 50.0);
    let len = groups.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(1);
    let lo = groups.iter().flat_map(|(_, v)| v.iter().copied()).fold(0.0f64, f64::min);
    let hi = groups.iter().flat_map(|(_, v)| v.iter().copied()).fold(1.0f64, f64::max);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x = |t: usize| left + pw * t as f64 / len as f64;
    let y = |v: f64| top + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18">cumulative regret: {scenario}</text>"#);
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="#000"/>"##,
        top + ph,
        left + pw,
        top + ph
    );
    let _ = writeln!(s, r##"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="#000"/>"##, top + ph);
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.0}</text>"#,
            left - 6.0,
            y(v) + 4.0,
            v
        );
        let t = len * i / 4;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{t}</text>"#,
            x(t),
            top + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">round</text>"#,
        left + pw / 2.0,
        h - 8.0
    );
    for (i, (alg, values)) in groups.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let step = (values.len() / 400).max(1);
        let mut pts = format!("{:.1},{:.1}", x(0), y(0.0));
        for (t, v) in values.iter().enumerate() {
            if (t + 1) % step == 0 || t + 1 == values.len() {
                let _ = write!(pts, " {:.1},{:.1}", x(t + 1), y(*v));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>"#
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{alg}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

/// All output files keyed by file name.
pub fn render(result: &ExperimentResult, cfg: &ExperimentConfig) -> Result<BTreeMap<String, String>> {
    if result.curves.is_empty() {
        return Err(Error::invalid("no regret curves to write"));
    }
    let mut files = BTreeMap::new();
    files.insert(REGRET_LONG.to_string(), long_csv(&result.curves));
    if !result.absolute.is_empty() {
        files.insert(LOSS_LONG.to_string(), long_csv(&result.absolute));
    }
    files.insert(REGRET_MEAN.to_string(), mean_csv(&result.curves));
    files.insert(SUMMARY.to_string(), summary_csv(result));
    files.insert(METADATA.to_string(), metadata_json(result, cfg)?);
    for scenario in result.scenarios() {
        files.insert(svg_name(&scenario), svg_chart(&scenario, &result.curves));
    }
    Ok(files)
}

/// Create `dir` and check that a file can be written there.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-check");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

pub fn write_files(dir: &Path, files: &BTreeMap<String, String>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, text)| {
            let p = dir.join(name);
            fs::write(&p, text)?;
            Ok(p)
        })
        .collect()
}

pub fn emit_outputs(result: &ExperimentResult, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = render(result, cfg)?;
    write_files(dir, &files)
}
