//! SVG charts drawn from finished tables, so a plot never shows anything the
//! CSV does not.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use super::Table;

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn line_chart(path: &Path, title: &str, x_desc: &str, y_desc: &str, series: &Series) -> Result<(), String> {
    let finite = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite();
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).filter(finite).collect();
    if points.is_empty() {
        return Err("no finite points to draw".into());
    }
    let (x0, x1) = span(points.iter().map(|p| p.0));
    let (y0, y1) = span(points.iter().map(|p| p.1));

    let root = SVGBackend::new(path, (960, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(80)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(err)?;
    chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(err)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied().filter(finite), color.stroke_width(2)))
            .map_err(err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Groups rows by the joined `keys` columns, collecting `(x, y)` pairs.
fn grouped(table: &Table, keys: &[&str], x: impl Fn(usize, &[String]) -> f64, y: &str) -> Result<Series, String> {
    let yi = table.column(y).ok_or_else(|| format!("no column {y}"))?;
    let ki: Vec<usize> = keys
        .iter()
        .map(|k| table.column(k).ok_or_else(|| format!("no column {k}")))
        .collect::<Result<_, _>>()?;
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut order = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        let key = ki.iter().map(|&i| row[i].as_str()).collect::<Vec<_>>().join(" ");
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push((x(r, row), num(&row[yi])));
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let pts = groups.remove(&k).unwrap_or_default();
            (k, pts)
        })
        .collect())
}

fn log10_y(series: Series) -> Series {
    series
        .into_iter()
        .map(|(k, pts)| (k, pts.into_iter().map(|(x, y)| (x, y.log10())).collect()))
        .collect()
}

/// A-load bytes transferred per shape, one line per kernel.
pub(crate) fn run_plot(path: &Path, table: &Table) -> Result<(), String> {
    let cols: Vec<usize> = ["m", "k", "n"].iter().filter_map(|c| table.column(c)).collect();
    let mut shapes: Vec<String> = Vec::new();
    let index: Vec<f64> = table
        .rows
        .iter()
        .map(|row| {
            let key = cols.iter().map(|&i| row[i].as_str()).collect::<Vec<_>>().join("x");
            let pos = shapes.iter().position(|s| *s == key).unwrap_or_else(|| {
                shapes.push(key);
                shapes.len() - 1
            });
            pos as f64
        })
        .collect();
    let series = grouped(table, &["variant"], |r, _| index[r], "A_bytes_transferred")?;
    line_chart(path, "A traffic per kernel", "shape index", "log10(A bytes transferred)", &log10_y(series))
}

/// Objective against iteration for every descent.
pub(crate) fn trace_plot(path: &Path, trace: &Table) -> Result<(), String> {
    let it = trace.column("iteration").ok_or("no iteration column")?;
    let series = grouped(trace, &["m", "k", "n", "branch"], |_, row| num(&row[it]), "objective")?;
    line_chart(path, "descent trace", "iteration", "log10(objective seconds)", &log10_y(series))
}

/// `ratio_r` against `n` per GPU; above 1 is compute bound.
pub(crate) fn ratio_plot(path: &Path, table: &Table) -> Result<(), String> {
    let n = table.column("n").ok_or("no n column")?;
    let series = grouped(table, &["gpu"], |_, row| num(&row[n]), "ratio_r")?;
    line_chart(path, "time_comp / time_mem at t2 = n", "n", "ratio_r", &series)
}

/// Predicted time against `tcf` per row count and kernel.
pub(crate) fn sweep_plot(path: &Path, table: &Table) -> Result<(), String> {
    let tcf = table.column("tcf").ok_or("no tcf column")?;
    let series = grouped(table, &["m", "variant"], |_, row| num(&row[tcf]).log2(), "predicted_time")?;
    line_chart(path, "predicted time by tcf", "log2(tcf)", "log10(predicted seconds)", &log10_y(series))
}
