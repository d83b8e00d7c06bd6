//! Approximate median significance and threshold selection.

use std::io::Write;

use serde::Serialize;

use crate::boosting::BoostedModel;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// AMS = √(2·((s + b + b_reg)·ln(1 + s/(b + b_reg)) − s)).
///
/// With `b_reg = 0` this is the plain formula; the Higgs challenge used
/// `b_reg = 10`.
pub fn ams(s_hat: f64, b_hat: f64, b_reg: f64) -> Result<f64> {
    if !(s_hat >= 0.0) || !(b_hat >= 0.0) || !(b_reg >= 0.0) {
        return Err(Error::Contract(format!(
            "AMS inputs must be non-negative (s={s_hat}, b={b_hat}, b_reg={b_reg})"
        )));
    }
    if s_hat == 0.0 {
        return Ok(0.0);
    }
    let b = b_hat + b_reg;
    if b == 0.0 {
        return Err(Error::Domain(
            "AMS is undefined for a selection with signal but no background; set b_reg > 0".into(),
        ));
    }
    let inner = (s_hat + b) * (s_hat / b).ln_1p() - s_hat;
    Ok((2.0 * inner.max(0.0)).sqrt())
}

/// Nearest-rank percentile threshold; selects margins strictly above it.
pub fn select_region(margins: &[f64], percentile: f64) -> Result<(Vec<bool>, f64)> {
    if margins.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_percentile(percentile)?;
    let threshold = nearest_rank(&sorted(margins), percentile);
    Ok((margins.iter().map(|&m| m > threshold).collect(), threshold))
}

fn check_percentile(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::InvalidConfig(format!("percentile must lie in (0, 100), got {p}")));
    }
    Ok(())
}

fn sorted(margins: &[f64]) -> Vec<f64> {
    let mut v = margins.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// One evaluation at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmsReport {
    pub threshold_percentile: f64,
    pub threshold_value: f64,
    pub selection_count: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub s_hat: f64,
    pub b_hat: f64,
    pub b_reg: f64,
    pub ams: f64,
    pub events_evaluated: usize,
    /// How ŝ and b̂ were accumulated.
    pub weight_convention: String,
}

impl AmsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain numbers and strings")
    }
}

/// Scores a set of margins against a dataset's labels and event weights.
pub fn evaluate_margins(
    margins: &[f64],
    ds: &Dataset,
    percentile: f64,
    b_reg: f64,
    weighted: bool,
) -> Result<AmsReport> {
    if margins.len() != ds.len() {
        return Err(Error::Contract(format!(
            "{} margins for {} events",
            margins.len(),
            ds.len()
        )));
    }
    let (mask, threshold) = select_region(margins, percentile)?;
    report_for(&mask, threshold, percentile, ds, b_reg, weighted)
}

fn report_for(
    mask: &[bool],
    threshold: f64,
    percentile: f64,
    ds: &Dataset,
    b_reg: f64,
    weighted: bool,
) -> Result<AmsReport> {
    let mut s_hat = 0.0;
    let mut b_hat = 0.0;
    let mut tp = 0;
    let mut fp = 0;
    for ((&sel, label), &w) in mask.iter().zip(ds.labels()).zip(ds.event_weights()) {
        if !sel {
            continue;
        }
        let w = if weighted { w } else { 1.0 };
        if label.is_signal() {
            s_hat += w;
            tp += 1;
        } else {
            b_hat += w;
            fp += 1;
        }
    }
    Ok(AmsReport {
        threshold_percentile: percentile,
        threshold_value: threshold,
        selection_count: tp + fp,
        true_positives: tp,
        false_positives: fp,
        s_hat,
        b_hat,
        b_reg,
        ams: ams(s_hat, b_hat, b_reg)?,
        events_evaluated: ds.len(),
        weight_convention: if weighted {
            "sum of event weights as stored in the evaluated partition".into()
        } else {
            "unweighted event counts".into()
        },
    })
}

/// Margins of `model` on `ds`, then the AMS at `percentile`.
pub fn evaluate(
    model: &BoostedModel,
    ds: &Dataset,
    percentile: f64,
    b_reg: f64,
    weighted: bool,
) -> Result<AmsReport> {
    let margins = model.margins(ds)?;
    evaluate_margins(&margins, ds, percentile, b_reg, weighted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub percentile: f64,
    pub threshold: f64,
    pub s_hat: f64,
    pub b_hat: f64,
    pub ams: f64,
}

/// AMS as a function of the cut-off percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "percentile,threshold,s_hat,b_hat,ams")?;
        for p in &self.points {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                p.percentile, p.threshold, p.s_hat, p.b_hat, p.ams
            )?;
        }
        Ok(())
    }

    /// The point with the highest AMS (first on ties).
    pub fn peak(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&SweepPoint>, p| match best {
                Some(b) if b.ams >= p.ams => Some(b),
                _ => Some(p),
            })
    }
}

pub fn sweep_margins(
    margins: &[f64],
    ds: &Dataset,
    percentiles: &[f64],
    b_reg: f64,
    weighted: bool,
) -> Result<SweepCurve> {
    if percentiles.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one percentile".into()));
    }
    if percentiles.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("sweep percentiles must be strictly increasing".into()));
    }
    if margins.len() != ds.len() {
        return Err(Error::Contract(format!(
            "{} margins for {} events",
            margins.len(),
            ds.len()
        )));
    }
    if margins.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let order = sorted(margins);
    let mut points = Vec::with_capacity(percentiles.len());
    for &p in percentiles {
        check_percentile(p)?;
        let threshold = nearest_rank(&order, p);
        let mask: Vec<bool> = margins.iter().map(|&m| m > threshold).collect();
        let r = report_for(&mask, threshold, p, ds, b_reg, weighted)?;
        points.push(SweepPoint {
            percentile: p,
            threshold,
            s_hat: r.s_hat,
            b_hat: r.b_hat,
            ams: r.ams,
        });
    }
    Ok(SweepCurve { points })
}

pub fn sweep(
    model: &BoostedModel,
    ds: &Dataset,
    percentiles: &[f64],
    b_reg: f64,
    weighted: bool,
) -> Result<SweepCurve> {
    let margins = model.margins(ds)?;
    sweep_margins(&margins, ds, percentiles, b_reg, weighted)
}
