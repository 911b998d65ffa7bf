//! Per-round metric rows and their CSV, SVG, and JSON renderings.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Scores of one task after one round of one setting and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub setting: String,
    pub seed: u64,
    pub round: usize,
    pub labeled_count: usize,
    pub task: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Extractor forward passes spent on training so far.
    pub forward_passes: u64,
    /// Seconds of training and evaluation so far. Not part of the
    /// reproducible CSV.
    #[serde(skip)]
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenario: String,
    pub rows: Vec<RoundRow>,
    pub summary: serde_json::Value,
}

/// Trapezoidal area under `(x, y)` points divided by the x-range, so a
/// constant curve at `y` scores `y`.
pub fn area_under_curve(points: &[(f64, f64)]) -> f64 {
    match points {
        [] => 0.0,
        [(_, y)] => *y,
        _ => {
            let area: f64 = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
            let span = points[points.len() - 1].0 - points[0].0;
            if span == 0.0 { points[0].1 } else { area / span }
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Output(format!("{}: {e}", path.display()))
}

impl MetricReport {
    pub fn settings(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.setting) {
                out.push(r.setting.clone());
            }
        }
        out
    }

    pub fn tasks(&self) -> Vec<String> {
        let mut out: Vec<String> = self.rows.iter().map(|r| r.task.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// `(labeled_count, f1)` points of one setting, seed, and task.
    pub fn curve(&self, setting: &str, seed: u64, task: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.setting == setting && r.seed == seed && r.task == task)
            .map(|r| (r.labeled_count as f64, r.f1))
            .collect()
    }

    /// F1 per labeled count, averaged over seeds.
    pub fn mean_curve(&self, setting: &str, task: &str) -> Vec<(f64, f64)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.setting == setting && r.task == task) {
            let e = acc.entry(r.labeled_count).or_default();
            e.0 += r.f1;
            e.1 += 1;
        }
        acc.into_iter().map(|(x, (s, n))| (x as f64, s / n as f64)).collect()
    }

    pub fn to_csv(&self) -> Result<String, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| SimError::Output(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| SimError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| SimError::Output(e.to_string()))
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("setting,seed,round,task,wall_clock\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{:.6}\n", r.setting, r.seed, r.round, r.task, r.wall_clock));
        }
        out
    }

    /// One SVG per task with each setting's seed-averaged F1 curve.
    pub fn render_svg(&self, task: &str) -> Result<String, SimError> {
        let settings = self.settings();
        let curves: Vec<(String, Vec<(f64, f64)>)> =
            settings.iter().map(|s| (s.clone(), self.mean_curve(s, task))).filter(|(_, c)| !c.is_empty()).collect();
        let xs = curves.iter().flat_map(|(_, c)| c.iter().map(|p| p.0));
        let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let (x_lo, x_hi) = if x_lo.is_finite() && x_hi > x_lo { (x_lo, x_hi) } else { (0.0, x_lo.max(0.0) + 1.0) };
        let mut svg = String::new();
        {
            let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
            let draw = |e: &dyn std::fmt::Display| SimError::Output(format!("plot: {e}"));
            root.fill(&WHITE).map_err(|e| draw(&e))?;
            let mut chart = ChartBuilder::on(&root)
                .caption(format!("{} / {task}", self.scenario), ("sans-serif", 20))
                .margin(12)
                .x_label_area_size(36)
                .y_label_area_size(48)
                .build_cartesian_2d(x_lo..x_hi, 0.0..1.0)
                .map_err(|e| draw(&e))?;
            chart
                .configure_mesh()
                .x_desc("labeled instances")
                .y_desc("F1")
                .draw()
                .map_err(|e| draw(&e))?;
            for (i, (name, points)) in curves.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                chart
                    .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                    .map_err(|e| draw(&e))?
                    .label(name.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerRight)
                .draw()
                .map_err(|e| draw(&e))?;
            root.present().map_err(|e| draw(&e))?;
        }
        Ok(svg)
    }

    /// Writes `rounds.csv`, `timings.csv`, `summary.json`, and
    /// `curve_<task>.svg` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let write = |name: &str, body: &str| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io_err(&path, e))
        };
        write("rounds.csv", &self.to_csv()?)?;
        write("timings.csv", &self.timings_csv())?;
        let summary = serde_json::to_string_pretty(&self.summary).map_err(|e| SimError::Output(e.to_string()))?;
        write("summary.json", &(summary + "\n"))?;
        for task in self.tasks() {
            write(&format!("curve_{task}.svg"), &self.render_svg(&task)?)?;
        }
        Ok(())
    }
}
