//! CSV, JSON and SVG output for experiment results.

use std::path::Path;

use plotters::prelude::*;

use super::experiment::ExperimentResult;
use crate::error::{Error, Result};

#[derive(serde::Serialize)]
struct CsvRow<'a> {
    config_hash: &'a str,
    seed: u64,
    epsilon: f64,
    t: f64,
    metric: &'a str,
    value: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("CSV output: {e}"))
}

fn write_rows<W: std::io::Write>(result: &ExperimentResult, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in &result.rows {
        w.serialize(CsvRow {
            config_hash: &result.config_hash,
            seed: result.seed,
            epsilon: r.epsilon,
            t: r.t,
            metric: &r.metric,
            value: r.value,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per `(ε, t, metric)`, prefixed by config hash and seed.
pub fn to_csv(result: &ExperimentResult) -> String {
    let mut buf = Vec::new();
    write_rows(result, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

pub fn write_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_rows(result, std::fs::File::create(path)?)
}

pub fn write_json(result: &ExperimentResult, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(result)?)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<ExperimentResult> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Log-log plot of `metric` against ε, one line per time.
pub fn plot_metric(result: &ExperimentResult, metric: &str, path: &Path) -> Result<()> {
    let series: Vec<(f64, Vec<(f64, f64)>)> = result
        .times()
        .into_iter()
        .map(|t| (t, result.series(metric, t).into_iter().filter(|(e, v)| *e > 0.0 && *v > 0.0).collect::<Vec<_>>()))
        .filter(|(_, s)| !s.is_empty())
        .collect();
    if series.is_empty() {
        return Err(Error::Plot(format!("no positive values for metric {metric}")));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (_, s) in &series {
        for &(x, y) in s {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    // pad so single points and flat lines still get a visible range
    let (x0, x1) = (x0 / 1.5, x1 * 1.5);
    let (y0, y1) = (y0 / 2.0, y1 * 2.0);
    let plot_err = |e: &dyn std::fmt::Display| Error::Plot(e.to_string());
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{} : {metric}", result.name), ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("epsilon")
        .y_desc(metric)
        .draw()
        .map_err(|e| plot_err(&e))?;
    for (n, (t, s)) in series.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.iter().cloned(), color.stroke_width(2)))
            .map_err(|e| plot_err(&e))?
            .label(format!("t = {t}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        chart
            .draw_series(s.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(|e| plot_err(&e))?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>.json` and, when possible, `<stem>.svg` into `dir`.
pub fn write_all(result: &ExperimentResult, dir: &Path, stem: &str, plot_metric_name: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(result, &dir.join(format!("{stem}.csv")))?;
    write_json(result, &dir.join(format!("{stem}.json")))?;
    if result.rows.iter().any(|r| r.metric == plot_metric_name) {
        plot_metric(result, plot_metric_name, &dir.join(format!("{stem}.svg")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::ResultRow;

    fn sample() -> ExperimentResult {
        let mut rows = Vec::new();
        for &t in &[0.5, 1.0] {
            for &e in &[0.4, 0.2, 0.1] {
                rows.push(ResultRow { epsilon: e, t, metric: "qc_distance_total".into(), value: e * t });
            }
        }
        ExperimentResult { name: "demo".into(), config_hash: "ab".into(), seed: 3, rows, warnings: vec![] }
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let csv = to_csv(&sample());
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(1).unwrap().starts_with("ab,3,0.4,0.5,qc_distance_total,"));
    }

    #[test]
    fn writes_svg_and_json() {
        let dir = tempfile::tempdir().unwrap();
        write_all(&sample(), dir.path(), "run", "qc_distance_total").unwrap();
        let svg = std::fs::read_to_string(dir.path().join("run.svg")).unwrap();
        assert!(svg.contains("<svg"));
        let back = read_json(&dir.path().join("run.json")).unwrap();
        assert_eq!(back, sample());
    }
}
