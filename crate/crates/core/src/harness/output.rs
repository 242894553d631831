//! CSV and SVG artifacts for sweep summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use plotters::prelude::*;

use super::{Mode, SweepSummary};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "mode",
    "d",
    "m",
    "k",
    "trials",
    "seed",
    "mean_distance",
    "p25",
    "p75",
    "std_error",
];

/// Write summaries as CSV to any writer.
pub fn write_csv<W: Write>(summaries: &[SweepSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for s in summaries {
        w.write_record([
            s.mode.as_str().to_string(),
            s.d.to_string(),
            s.m.to_string(),
            s.k.to_string(),
            s.trials.to_string(),
            s.seed.to_string(),
            s.mean_distance.to_string(),
            s.p25.to_string(),
            s.p75.to_string(),
            s.std_error.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(summaries: &[SweepSummary], path: &Path) -> Result<()> {
    write_csv(summaries, File::create(path)?)
}

/// Parse a CSV produced by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepSummary>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!(
            "unexpected CSV header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            let int = |i: usize| field(&rec, i)?.parse::<usize>().map_err(|e| bad_field(i, e));
            let real = |i: usize| field(&rec, i)?.parse::<f64>().map_err(|e| bad_field(i, e));
            Ok(SweepSummary {
                mode: Mode::parse(field(&rec, 0)?).map_err(|e| Error::Config(e.to_string()))?,
                d: int(1)?,
                m: int(2)?,
                k: int(3)?,
                trials: int(4)?,
                seed: field(&rec, 5)?.parse::<u64>().map_err(|e| bad_field(5, e))?,
                mean_distance: real(6)?,
                p25: real(7)?,
                p75: real(8)?,
                std_error: real(9)?,
                squared_loss: None,
            })
        })
        .collect()
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| Error::Config(format!("CSV row is missing column {}", CSV_HEADER[i])))
}

fn bad_field(i: usize, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("bad value in column {}: {e}", CSV_HEADER[i]))
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Config(e.to_string())
    }
}

/// One plotted line: x positions, means and interquartile band.
struct Series {
    label: String,
    points: Vec<BandPoint>,
}

/// `(x, mean, p25, p75)`.
type BandPoint = (f64, f64, f64, f64);

/// Group summaries into lines. Depth points are placed at `m + 1` so the
/// shared baseline `(m = 0, k = 1)` sits at 1 on the logarithmic axis for
/// both instruments.
fn series(summaries: &[SweepSummary]) -> Vec<Series> {
    let mut groups: BTreeMap<(usize, &str, usize), Vec<BandPoint>> = BTreeMap::new();
    for s in summaries {
        let (key, x) = match s.mode {
            Mode::Breadth => ((s.d, "breadth", s.m), s.k as f64),
            Mode::Depth | Mode::Joint => ((s.d, s.mode.as_str(), s.k), (s.m + 1) as f64),
        };
        groups.entry(key).or_default().push((x, s.mean_distance, s.p25, s.p75));
    }
    groups
        .into_iter()
        .map(|((d, mode, fixed), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = match mode {
                "breadth" => format!("d={d} breadth (m={fixed})"),
                _ => format!("d={d} {mode} (k={fixed})"),
            };
            Series { label, points }
        })
        .collect()
}

/// Render mean-distance curves with interquartile bands on log-log axes.
pub fn emit_svg(summaries: &[SweepSummary], path: &Path) -> Result<()> {
    if summaries.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let lines = series(summaries);
    let xs = lines.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let x_max = xs.fold(1.0_f64, f64::max) * 1.2;
    let ys = || lines.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.2, p.3]));
    let y_min = ys().filter(|y| *y > 0.0).fold(f64::INFINITY, f64::min);
    let y_max = ys().fold(0.0_f64, f64::max);
    if !(y_min.is_finite() && y_max > 0.0) {
        return Err(Error::invalid("distances must be positive to plot on a log scale"));
    }

    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Expected distance to ideal point", ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(60)
        .build_cartesian_2d((0.9..x_max).log_scale(), (y_min * 0.8..y_max * 1.25).log_scale())
        .map_err(plot_error)?;
    chart
        .configure_mesh()
        .x_desc("questions + 1 (depth), products (breadth)")
        .y_desc("distance")
        .draw()
        .map_err(plot_error)?;

    for (i, s) in lines.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let band: Vec<(f64, f64)> = s
            .points
            .iter()
            .map(|p| (p.0, p.3.max(y_min)))
            .chain(s.points.iter().rev().map(|p| (p.0, p.2.max(y_min))))
            .collect();
        chart
            .draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled())))
            .map_err(plot_error)?;
        chart
            .draw_series(LineSeries::new(
                s.points.iter().map(|p| (p.0, p.1)),
                color.stroke_width(2),
            ))
            .map_err(plot_error)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}

fn plot_error<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> Error {
    match e {
        DrawingAreaErrorKind::BackendError(e) => Error::Io(io::Error::other(e.to_string())),
        other => Error::invalid(other.to_string()),
    }
}
