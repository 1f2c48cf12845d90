use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{MetricsRow, MetricsTable, QueryRecord};
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const QUERIES_FILE: &str = "queries.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.svg";
pub const ALTITUDE_FILE: &str = "altitude.svg";

/// Candidate count shown in the plots: 3 when swept, else the first.
pub fn plot_n(m: &MetricsTable) -> Option<usize> {
    m.row(3)
        .map(|r| r.n)
        .or_else(|| m.rows.first().map(|r| r.n))
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(path)
}

pub fn read_queries_csv(path: &Path) -> Result<Vec<QueryRecord>> {
    read_csv(path)
}

/// Writes metrics.csv, queries.csv, trajectory.svg and altitude.svg.
pub fn export_report(m: &MetricsTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if m.rows.is_empty() {
        return Err(Error::invalid("metrics table is empty"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths: Vec<PathBuf> = [METRICS_FILE, QUERIES_FILE, TRAJECTORY_FILE, ALTITUDE_FILE]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();
    write_csv(&paths[0], &m.rows)?;
    write_csv(&paths[1], &m.queries)?;
    let n = plot_n(m).unwrap_or(1);
    let recs: Vec<&QueryRecord> = m.records(n).collect();
    fs::write(&paths[2], trajectory_svg(&recs, n)).map_err(|e| Error::io(&paths[2], e))?;
    fs::write(&paths[3], altitude_svg(&recs, n)).map_err(|e| Error::io(&paths[3], e))?;
    Ok(paths)
}

const SIZE: f64 = 600.0;
const PAD: f64 = 40.0;

struct Axes {
    x0: f64,
    y0: f64,
    scale_x: f64,
    scale_y: f64,
}

impl Axes {
    fn fit(xs: &[f64], ys: &[f64], equal: bool) -> Self {
        let bounds = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo, (hi - lo).max(1.0))
            } else {
                (0.0, 1.0)
            }
        };
        let (x0, wx) = bounds(xs);
        let (y0, wy) = bounds(ys);
        let span = SIZE - 2.0 * PAD;
        let (scale_x, scale_y) = if equal {
            let s = span / wx.max(wy);
            (s, s)
        } else {
            (span / wx, span / wy)
        };
        Self {
            x0,
            y0,
            scale_x,
            scale_y,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            PAD + (x - self.x0) * self.scale_x,
            SIZE - PAD - (y - self.y0) * self.scale_y,
        )
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
    )
}

/// Ground-truth path, candidate positions (red crosses), refined positions
/// (yellow dots) and a segment joining each pair.
pub fn trajectory_svg(recs: &[&QueryRecord], n: usize) -> String {
    let mut xs: Vec<f64> = recs.iter().map(|r| r.true_x).collect();
    let mut ys: Vec<f64> = recs.iter().map(|r| r.true_y).collect();
    for r in recs.iter().filter(|r| r.is_localized()) {
        xs.extend([r.est_x.unwrap_or(r.true_x), r.cand_x.unwrap_or(r.true_x)]);
        ys.extend([r.est_y.unwrap_or(r.true_y), r.cand_y.unwrap_or(r.true_y)]);
    }
    let ax = Axes::fit(&xs, &ys, true);
    let mut s = header(&format!("trajectory, n = {n}"));
    let pts: Vec<String> = recs
        .iter()
        .map(|r| {
            let (x, y) = ax.px(r.true_x, r.true_y);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        "<polyline class=\"truth\" points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    );
    for r in recs.iter().filter(|r| r.is_localized()) {
        let (Some(ex), Some(ey), Some(cx), Some(cy)) = (r.est_x, r.est_y, r.cand_x, r.cand_y)
        else {
            continue;
        };
        let (ex, ey) = ax.px(ex, ey);
        let (cx, cy) = ax.px(cx, cy);
        let _ = writeln!(
            s,
            "<line class=\"correspondence\" x1=\"{cx:.2}\" y1=\"{cy:.2}\" x2=\"{ex:.2}\" y2=\"{ey:.2}\" stroke=\"gray\" stroke-width=\"0.8\"/>"
        );
        let _ = writeln!(
            s,
            "<path class=\"candidate\" d=\"M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}\" stroke=\"red\" stroke-width=\"1.5\"/>",
            cx - 4.0,
            cy - 4.0,
            cx + 4.0,
            cy + 4.0,
            cx - 4.0,
            cy + 4.0,
            cx + 4.0,
            cy - 4.0
        );
        let _ = writeln!(
            s,
            "<circle class=\"refined\" cx=\"{ex:.2}\" cy=\"{ey:.2}\" r=\"3.5\" fill=\"gold\" stroke=\"black\" stroke-width=\"0.5\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Inferred and ground-truth altitude against distance flown.
pub fn altitude_svg(recs: &[&QueryRecord], n: usize) -> String {
    let xs: Vec<f64> = recs.iter().map(|r| r.distance_m).collect();
    let mut ys: Vec<f64> = recs.iter().map(|r| r.true_z).collect();
    ys.extend(recs.iter().filter_map(|r| r.est_z));
    let ax = Axes::fit(&xs, &ys, false);
    let mut s = header(&format!("altitude vs distance, n = {n}"));
    let pts: Vec<String> = recs
        .iter()
        .map(|r| {
            let (x, y) = ax.px(r.distance_m, r.true_z);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        "<polyline class=\"truth\" points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    );
    for r in recs.iter() {
        if let Some(z) = r.est_z {
            let (x, y) = ax.px(r.distance_m, z);
            let _ = writeln!(
                s,
                "<circle class=\"inferred\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"gold\" stroke=\"black\" stroke-width=\"0.5\"/>"
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
