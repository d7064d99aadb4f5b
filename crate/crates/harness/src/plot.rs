//! SVG figures: grouped bars and line curves.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{AtStage, HarnessResult, Stage};

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn color(i: usize) -> RGBColor {
    PALETTE[i % PALETTE.len()]
}

fn prepare(path: &Path) -> HarnessResult<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).at(Stage::Report)?;
    }
    Ok(())
}

pub fn grouped_bars<const N: usize>(
    path: &Path,
    title: &str,
    groups: &[(String, [f64; N])],
    series: &[&str],
    y_label: &str,
) -> HarnessResult<()> {
    let dynamic: Vec<(String, Vec<f64>)> = groups.iter().map(|(g, v)| (g.clone(), v.to_vec())).collect();
    grouped_bars_dyn(path, title, &dynamic, series, y_label)
}

/// One cluster of bars per group, one bar per series, on a `[0, 1]` axis.
pub fn grouped_bars_dyn(
    path: &Path,
    title: &str,
    groups: &[(String, Vec<f64>)],
    series: &[&str],
    y_label: &str,
) -> HarnessResult<()> {
    prepare(path)?;
    let root = SVGBackend::new(path, (160 + 120 * groups.len().max(1) as u32, 420)).into_drawing_area();
    root.fill(&WHITE).at(Stage::Report)?;
    let n = groups.len().max(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..n, 0.0..1.05f64)
        .at(Stage::Report)?;
    let labels: Vec<String> = groups.iter().map(|(g, _)| g.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(groups.len().max(1))
        .x_label_formatter(&|x| {
            let i = x.floor() as usize;
            if (x - x.floor() - 0.5).abs() < 1e-9 || x.fract() == 0.0 {
                labels.get(i).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .y_desc(y_label)
        .draw()
        .at(Stage::Report)?;
    let width = 0.8 / series.len().max(1) as f64;
    for (si, name) in series.iter().enumerate() {
        let c = color(si);
        chart
            .draw_series(groups.iter().enumerate().map(|(gi, (_, v))| {
                let x0 = gi as f64 + 0.1 + si as f64 * width;
                let y = v.get(si).copied().unwrap_or(0.0).clamp(0.0, 1.05);
                Rectangle::new([(x0, 0.0), (x0 + width, y)], c.filled())
            }))
            .at(Stage::Report)?
            .label(*name)
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], c.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .at(Stage::Report)?;
    root.present().at(Stage::Report)
}

/// One polyline per series over a shared x axis.
pub fn lines(path: &Path, title: &str, series: &[(String, Vec<(f64, f64)>)], x_label: &str) -> HarnessResult<()> {
    prepare(path)?;
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|&(x, _)| x));
    let x_max = xs.fold(0.0f64, f64::max).max(1e-9);
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).at(Stage::Report)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..x_max, 0.0..1.05f64)
        .at(Stage::Report)?;
    chart.configure_mesh().x_desc(x_label).draw().at(Stage::Report)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let c = color(i);
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        chart
            .draw_series(LineSeries::new(pts.clone(), c.stroke_width(2)))
            .at(Stage::Report)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 14, y)], c.stroke_width(2)));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, c.filled())))
            .at(Stage::Report)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .at(Stage::Report)?;
    root.present().at(Stage::Report)
}
