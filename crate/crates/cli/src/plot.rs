use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;
use stickerda::metrics::SuitabilityReport;
use stickerda::trainer::MetricRecord;

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn draw_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow!("plotting failed: {e:?}")
}

/// DSM against TSM, one labelled point per task, with the `DSM + TSM = ζ`
/// boundary drawn across the unit square.
pub fn suitability_scatter(reports: &[SuitabilityReport], path: &Path) -> Result<()> {
    let root = SVGBackend::new(path, (640, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("subsidiary task suitability", ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..1.05, 0.0..1.05)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("DSM")
        .y_desc("TSM")
        .draw()
        .map_err(draw_err)?;
    if let Some(zeta) = reports.first().map(|r| r.zeta) {
        let lo = (zeta - 1.0).max(0.0);
        let hi = zeta.min(1.0);
        chart
            .draw_series(LineSeries::new([(lo, zeta - lo), (hi, zeta - hi)], BLACK.stroke_width(1)))
            .map_err(draw_err)?
            .label(format!("DSM + TSM = {zeta}"))
            .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLACK));
    }
    for (i, r) in reports.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series([Circle::new((r.dsm, r.tsm), 5, color.filled())])
            .map_err(draw_err)?;
        chart
            .draw_series([Text::new(r.task.name().to_string(), (r.dsm + 0.015, r.tsm + 0.02), ("sans-serif", 13))])
            .map_err(draw_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Per-epoch series of every `*_epoch` metric in `records`, one line per
/// `(phase, metric)`. When a phase was run more than once only its latest run
/// is drawn.
pub fn convergence(records: &[MetricRecord], path: &Path) -> Result<usize> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric.ends_with("_epoch") && r.value.is_finite()) {
        let key = format!("{}/{}", r.phase, r.metric.trim_end_matches("_epoch"));
        let points = series.entry(key).or_default();
        let x = r.step as f64;
        if points.last().is_some_and(|p| p.0 >= x) {
            points.clear();
        }
        points.push((x, r.value));
    }
    if series.is_empty() {
        return Err(anyhow!("no per-epoch metrics to plot"));
    }
    let max_x = series.values().flatten().map(|p| p.0).fold(1.0, f64::max);
    let values = series.values().flatten().map(|p| p.1);
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = ((hi - lo) * 0.05).max(1e-3);

    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("training convergence", ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(1.0..max_x.max(2.0), (lo - pad)..(hi + pad))
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("epoch")
        .y_desc("loss")
        .draw()
        .map_err(draw_err)?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(series.len())
}
