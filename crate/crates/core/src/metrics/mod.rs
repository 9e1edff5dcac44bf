//! PCKh-based pose AP and keypoint-level CLEAR-MOT scoring.

mod ap;
mod mot;
mod pckh;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use ap::{average_precision, evaluate_ap, ApReport, JointAp};
pub use mot::{evaluate_mot, MotCounts, MotReport};
pub use pckh::{
    head_size, match_poses_frame, reference_head_size, FrameMatch, PairScore, PckhThreshold, HEADLESS_DIAGONAL_FACTOR,
};

use crate::error::{Error, Result};
use crate::model::{EvalGroup, Sequence};

/// Pairs each ground-truth sequence with the prediction of the same name.
/// Both must cover identical frame indices.
pub(crate) fn align<'a>(preds: &'a [Sequence], gts: &'a [Sequence]) -> Result<Vec<(&'a Sequence, &'a Sequence)>> {
    let mut by_name: HashMap<&str, &Sequence> = HashMap::new();
    for p in preds {
        if by_name.insert(p.name.as_str(), p).is_some() {
            return Err(Error::Misaligned(format!("duplicate prediction sequence '{}'", p.name)));
        }
    }
    if preds.len() != gts.len() {
        return Err(Error::Misaligned(format!(
            "{} prediction sequences for {} ground-truth sequences",
            preds.len(),
            gts.len()
        )));
    }
    gts.iter()
        .map(|g| {
            let p = by_name
                .get(g.name.as_str())
                .ok_or_else(|| Error::Misaligned(format!("no predictions for sequence '{}'", g.name)))?;
            let same =
                p.frames.len() == g.frames.len() && p.frames.iter().zip(&g.frames).all(|(a, b)| a.index == b.index);
            if !same {
                return Err(Error::Misaligned(format!(
                    "sequence '{}': prediction and ground-truth frame indices differ",
                    g.name
                )));
            }
            Ok((*p, g))
        })
        .collect()
}

pub(crate) fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.1}"))
}

fn header(extra: &[&str]) -> String {
    let mut cols: Vec<&str> = EvalGroup::ALL.iter().map(|g| g.label()).collect();
    cols.push("Total");
    cols.extend_from_slice(extra);
    cols.join(",")
}

/// One-row CSV table, one decimal place; undefined cells read `nan`.
pub fn ap_csv(report: &ApReport) -> String {
    let mut row: Vec<String> = report.groups.0.iter().map(|v| cell(*v)).collect();
    row.push(cell(report.total));
    format!("{}\n{}\n", header(&[]), row.join(","))
}

/// One-row CSV table of MOTA per group, then MOTP, precision and recall.
pub fn mot_csv(report: &MotReport) -> String {
    let mut row: Vec<String> = report.mota.0.iter().map(|v| cell(*v)).collect();
    row.push(cell(report.total_mota));
    row.push(cell(report.motp));
    row.push(cell(Some(report.precision)));
    row.push(cell(Some(report.recall)));
    format!("{}\n{}\n", header(&["MOTP", "Prec", "Rec"]), row.join(","))
}

/// Sweep table: one row per swept value, prefixed by `axis`.
pub fn rows_csv(axis: &str, extra: &[&str], rows: &[(f64, Vec<Option<f64>>)]) -> String {
    let mut out = format!("{axis},{}\n", header(extra));
    for (v, cells) in rows {
        let cells: Vec<String> = cells.iter().map(|c| cell(*c)).collect();
        let _ = writeln!(out, "{v},{}", cells.join(","));
    }
    out
}
