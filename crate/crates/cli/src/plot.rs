//! Eight-panel SVG figure: gas concentration and coverage maps over (x, t),
//! deposited mass profiles, and the two sensor traces.

use std::path::Path;

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::tables::{FieldSeries, FieldTable, TraceTable};
use crate::CliError;

const PANEL: (u32, u32) = (420, 340);

/// kg/m² to ng/cm².
const MASS_SCALE: f64 = 1e8;

type Area<'a> = DrawingArea<SVGBackend<'a>, Shift>;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

/// Pad a degenerate range so single points still get axes.
fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo > 1e-12 * hi.abs().max(1.0) {
        (lo, hi)
    } else {
        let pad = 0.5 * lo.abs().max(1.0) * 1e-3;
        (lo - pad, hi + pad)
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    span(lo, hi)
}

/// Viridis, linearly interpolated between five anchors.
fn viridis(t: f64) -> RGBColor {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    RGBColor(mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn empty_panel(area: &Area, title: &str) -> Result<(), CliError> {
    area.titled(title, ("sans-serif", 16)).map_err(plot_err)?;
    Ok(())
}

fn heatmap(area: &Area, title: &str, series: &FieldSeries) -> Result<(), CliError> {
    if series.times.is_empty() || series.x.is_empty() {
        return empty_panel(area, title);
    }
    let n = series.x.len();
    let dx = if n > 1 { series.x[1] - series.x[0] } else { 1.0 };
    let (x0, x1) = (series.x[0] - 0.5 * dx, series.x[n - 1] + 0.5 * dx);
    let dt = if series.times.len() > 1 {
        series.times[1] - series.times[0]
    } else {
        1.0
    };
    let (t0, t1) = span(series.times[0], *series.times.last().expect("non-empty") + dt);
    let lo = series.values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = series.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { hi - lo } else { 1.0 };

    let mut chart = ChartBuilder::on(area)
        .caption(format!("{title} [{}, {}]", short(lo), short(hi)), ("sans-serif", 14))
        .margin(6)
        .x_label_area_size(28)
        .y_label_area_size(40)
        .build_cartesian_2d(x0..x1, t0..t1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("x (m)")
        .y_desc("t (s)")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(series.times.iter().zip(&series.values).flat_map(|(&t, row)| {
            row.iter().zip(&series.x).map(move |(&v, &x)| {
                Rectangle::new(
                    [(x - 0.5 * dx, t), (x + 0.5 * dx, t + dt)],
                    viridis((v - lo) / scale).filled(),
                )
            })
        }))
        .map_err(plot_err)?;
    Ok(())
}

fn short(v: f64) -> String {
    if !v.is_finite() {
        "-".into()
    } else if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn line_panel(area: &Area, title: &str, y_desc: &str, t: &[f64], y: &[f64], color: RGBColor) -> Result<(), CliError> {
    let (t0, t1) = bounds(t);
    let (y0, y1) = bounds(y);
    let pad = 0.05 * (y1 - y0);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 14))
        .margin(6)
        .x_label_area_size(28)
        .y_label_area_size(48)
        .build_cartesian_2d(t0..t1, (y0 - pad)..(y1 + pad))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t (s)")
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(t.iter().copied().zip(y.iter().copied()), color.stroke_width(2)))
        .map_err(plot_err)?;
    if t.len() == 1 {
        chart
            .draw_series(std::iter::once(Circle::new((t[0], y[0]), 3, color.filled())))
            .map_err(plot_err)?;
    }
    Ok(())
}

/// Deposited mass along the tube at a handful of times, with the QCM
/// position dotted in.
fn mass_profiles(area: &Area, title: &str, series: &FieldSeries, qcm_x: Option<f64>) -> Result<(), CliError> {
    if series.times.is_empty() {
        return empty_panel(area, title);
    }
    let (x0, x1) = bounds(&series.x);
    let scaled: Vec<Vec<f64>> = series
        .values
        .iter()
        .map(|row| row.iter().map(|v| v * MASS_SCALE).collect())
        .collect();
    let all: Vec<f64> = scaled.iter().flatten().copied().chain([0.0]).collect();
    let (y0, y1) = bounds(&all);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 14))
        .margin(6)
        .x_label_area_size(28)
        .y_label_area_size(48)
        .build_cartesian_2d(x0..x1, y0..(y1 + 0.05 * (y1 - y0)))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("x (m)")
        .y_desc("ng/cm²")
        .draw()
        .map_err(plot_err)?;
    let picks = 6.min(scaled.len());
    for k in 0..picks {
        let i = if picks == 1 { 0 } else { k * (scaled.len() - 1) / (picks - 1) };
        let color = viridis(if picks == 1 { 1.0 } else { k as f64 / (picks - 1) as f64 });
        chart
            .draw_series(LineSeries::new(
                series.x.iter().copied().zip(scaled[i].iter().copied()),
                color.stroke_width(2),
            ))
            .map_err(plot_err)?
            .label(format!("t = {} s", series.times[i]))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    if let Some(q) = qcm_x {
        let top = y1 + 0.05 * (y1 - y0);
        let n = 24;
        let dashes = (0..n).step_by(2).map(|k| {
            let a = y0 + (top - y0) * k as f64 / n as f64;
            let b = y0 + (top - y0) * (k + 1) as f64 / n as f64;
            PathElement::new(vec![(q, a), (q, b)], BLACK.stroke_width(1))
        });
        chart.draw_series(dashes).map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .label_font(("sans-serif", 11))
        .draw()
        .map_err(plot_err)?;
    Ok(())
}

/// Pick `n` series of one field kind with the largest variation, in name order.
fn most_active<'a>(fields: &'a FieldTable, kind: &str, n: usize) -> Vec<(&'a str, &'a FieldSeries)> {
    let mut picked: Vec<(&str, &FieldSeries)> = fields
        .iter()
        .filter(|((k, _), _)| k == kind)
        .map(|((_, name), s)| (name.as_str(), s))
        .collect();
    picked.sort_by(|a, b| b.1.range().total_cmp(&a.1.range()).then(a.0.cmp(b.0)));
    picked.truncate(n);
    picked.sort_by(|a, b| a.0.cmp(b.0));
    picked
}

/// Render the figure. Returns warnings (e.g. snapshot panels skipped).
pub fn render(trace: &TraceTable, fields: Option<&FieldTable>, out: &Path) -> Result<Vec<String>, CliError> {
    let mut warnings = Vec::new();
    if trace.is_empty() {
        return Err(CliError::Malformed("trace file has no samples".into()));
    }
    let t = trace.time();
    let (pressure_at, pressure) = trace
        .find("pressure@")
        .ok_or_else(|| CliError::Malformed("trace has no pressure column".into()))?;
    let (qcm_at, qcm) = trace
        .find("qcm@")
        .ok_or_else(|| CliError::Malformed("trace has no qcm column".into()))?;
    let qcm_x: Option<f64> = qcm_at.parse().ok();

    let fields = fields.filter(|f| !f.is_empty());
    let size = match fields {
        Some(_) => (PANEL.0 * 4, PANEL.1 * 2),
        None => {
            warnings.push("no field snapshots: drawing the sensor panels only".to_string());
            (PANEL.0 * 2, PANEL.1)
        }
    };
    let root = SVGBackend::new(out, size).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let pressure_title = format!("(d) pressure at x = {pressure_at} m");
    let qcm_title = format!("(h) QCM at x = {qcm_at} m");
    let blue = RGBColor(31, 119, 180);
    let red = RGBColor(214, 39, 40);

    match fields {
        None => {
            let panels = root.split_evenly((1, 2));
            line_panel(&panels[0], &pressure_title, "Pa", t, pressure, blue)?;
            line_panel(&panels[1], &qcm_title, "ng/cm²", t, qcm, red)?;
        }
        Some(fields) => {
            let panels = root.split_evenly((2, 4));
            let gases = most_active(fields, "concentration", 3);
            for (k, label) in ["a", "b", "c"].iter().enumerate() {
                match gases.get(k) {
                    Some((name, s)) => heatmap(&panels[k], &format!("({label}) c_{name} mol/m³"), s)?,
                    None => empty_panel(&panels[k], &format!("({label}) no gas"))?,
                }
            }
            line_panel(&panels[3], &pressure_title, "Pa", t, pressure, blue)?;
            let surfaces = most_active(fields, "coverage", 2);
            for (k, label) in ["e", "f"].iter().enumerate() {
                match surfaces.get(k) {
                    Some((name, s)) => heatmap(&panels[4 + k], &format!("({label}) θ_{name}"), s)?,
                    None => empty_panel(&panels[4 + k], &format!("({label}) no coverage change"))?,
                }
            }
            match most_active(fields, "solid_mass", 1).first() {
                Some((name, s)) => mass_profiles(&panels[6], &format!("(g) deposited {name}"), s, qcm_x)?,
                None => empty_panel(&panels[6], "(g) no solid")?,
            }
            line_panel(&panels[7], &qcm_title, "ng/cm²", t, qcm, red)?;
        }
    }
    root.present().map_err(plot_err)?;
    Ok(warnings)
}
