//! Static SVG plots of a recorded trace.

use std::path::{Path, PathBuf};

use halo_sim::bus::{EventKind, Trace};
use plotters::prelude::*;

type Series = (String, Vec<(f64, f64)>);

const COLORS: [RGBColor; 4] = [BLUE, RED, GREEN, MAGENTA];

/// Publish rate of `topic` in a trailing one-second window, sampled every
/// 100 ms.
fn rate_series(trace: &Trace, topic: &str) -> Vec<(f64, f64)> {
    let times: Vec<f64> = trace.publishes_on(topic).map(|e| e.t_s()).collect();
    let end = trace.events.last().map_or(0.0, |e| e.t_s());
    let mut out = Vec::new();
    let mut t = 1.0;
    while t <= end + 1e-9 {
        let n = times.iter().filter(|x| **x > t - 1.0 && **x <= t).count();
        out.push((t, n as f64));
        t += 0.1;
    }
    out
}

fn field_series(trace: &Trace, kind: EventKind, topic: &str, field: &str) -> Vec<(f64, f64)> {
    trace
        .iter()
        .filter(|e| e.kind == kind && e.topic == topic)
        .filter_map(|e| e.field_f64(field).map(|v| (e.t_s(), v)))
        .collect()
}

fn chart(path: &Path, title: &str, y_label: &str, series: &[Series]) -> Result<(), String> {
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    let root = SVGBackend::new(path, (900, 450)).into_drawing_area();
    let err = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut c = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1.max(x0 + 1e-6), (y0 - pad)..(y1 + pad))
        .map_err(|e| err(&e))?;
    c.configure_mesh()
        .x_desc("time (s)")
        .y_desc(y_label)
        .draw()
        .map_err(|e| err(&e))?;
    for (i, (name, s)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        c.draw_series(LineSeries::new(s.iter().copied(), &color))
            .map_err(|e| err(&e))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    c.configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

/// Writes `rates.svg`, `covariance.svg` and, when the trace has an
/// opponent, `separation.svg` into `dir`.
pub fn render_all(trace: &Trace, dir: &Path) -> Result<Vec<PathBuf>, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut written = Vec::new();

    let rates = dir.join("rates.svg");
    let series: Vec<Series> = ["best_odometry", "ekf/odometry"]
        .into_iter()
        .map(|t| (t.to_string(), rate_series(trace, t)))
        .collect();
    chart(&rates, "odometry rate", "Hz (1 s window)", &series)?;
    written.push(rates);

    let cov = dir.join("covariance.svg");
    let series: Vec<Series> = ["ekf/odometry", "top_cartesian", "bottom_cartesian"]
        .into_iter()
        .map(|t| (t.to_string(), field_series(trace, EventKind::Publish, t, "cov")))
        .collect();
    chart(&cov, "position covariance", "m^2", &series)?;
    written.push(cov);

    let sep = field_series(trace, EventKind::Truth, "", "true_sep");
    if !sep.is_empty() {
        let detections = field_series(trace, EventKind::Publish, "detections", "separation");
        let path = dir.join("separation.svg");
        chart(
            &path,
            "opponent separation",
            "m (negative: ego ahead)",
            &[("truth".into(), sep), ("detections".into(), detections)],
        )?;
        written.push(path);
    }
    Ok(written)
}
