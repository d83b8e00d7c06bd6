use rand::seq::SliceRandom;

use super::csv_io::PARTITION_TAGS;
use super::{Dataset, Label};
use crate::error::{Error, Result};
use crate::rng::{label, SeedStream};

const FRACTION_TOLERANCE: f64 = 1e-9;

/// How to cut a dataset into train / validation / test parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
    /// Rescale event weights in each part so its per-class totals match the
    /// parent dataset's.
    pub rescale_event_weights: bool,
}

impl Default for SplitSpec {
    /// The 250k / 100k / 450k proportions of the 800k-event open data release.
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.3125,
            validation_fraction: 0.125,
            test_fraction: 0.5625,
            seed: 0,
            stratified: true,
            rescale_event_weights: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if fr.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must lie in (0, 1), got {fr:?}"
            )));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > FRACTION_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

const PART_NAMES: [&str; 3] = ["train", "validation", "test"];

/// Seeded partition into (train, validation, test).
///
/// Each part keeps the original row order and gets fresh uniform boost weights.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = ds.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let train = (spec.train_fraction * n as f64).round() as usize;
    let val = (spec.validation_fraction * n as f64).round() as usize;
    let totals = [train, val, n.saturating_sub(train + val)];
    if train + val > n {
        return Err(Error::EmptyPartition { part: "test" });
    }
    if let Some(k) = totals.iter().position(|&t| t == 0) {
        return Err(Error::EmptyPartition { part: PART_NAMES[k] });
    }

    let mut rng = SeedStream::new(spec.seed).child(label::SPLIT, 0).rng();
    let mut parts: [Vec<usize>; 3] = Default::default();

    if spec.stratified {
        let (mut sig, mut bkg): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| ds.labels()[i] == Label::Signal);
        if sig.is_empty() || bkg.is_empty() {
            return Err(Error::SingleClass);
        }
        let sig_counts = largest_remainder(sig.len(), &totals, n);
        sig.shuffle(&mut rng);
        bkg.shuffle(&mut rng);
        let (mut s_at, mut b_at) = (0, 0);
        for k in 0..3 {
            let s = sig_counts[k];
            let b = totals[k] - s;
            parts[k].extend_from_slice(&sig[s_at..s_at + s]);
            parts[k].extend_from_slice(&bkg[b_at..b_at + b]);
            s_at += s;
            b_at += b;
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let mut at = 0;
        for k in 0..3 {
            parts[k].extend_from_slice(&all[at..at + totals[k]]);
            at += totals[k];
        }
    }

    let [a, b, c] = parts.map(|mut rows| {
        rows.sort_unstable();
        rows
    });
    Ok((
        make_part(ds, &a, spec.rescale_event_weights)?,
        make_part(ds, &b, spec.rescale_event_weights)?,
        make_part(ds, &c, spec.rescale_event_weights)?,
    ))
}

/// Partition by the tag column captured at load time.
///
/// Tags are matched against [`PARTITION_TAGS`]; rows with any other tag are dropped.
pub fn split_by_tags(ds: &Dataset, rescale_event_weights: bool) -> Result<(Dataset, Dataset, Dataset)> {
    let tags = ds
        .tags()
        .ok_or_else(|| Error::InvalidConfig("dataset was loaded without a split column".into()))?;
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (i, tag) in tags.iter().enumerate() {
        if let Some(k) = PARTITION_TAGS
            .iter()
            .position(|(_, accepted)| accepted.contains(&tag.as_str()))
        {
            parts[k].push(i);
        }
    }
    if let Some(k) = parts.iter().position(Vec::is_empty) {
        return Err(Error::EmptyPartition { part: PART_NAMES[k] });
    }
    let [a, b, c] = parts;
    Ok((
        make_part(ds, &a, rescale_event_weights)?,
        make_part(ds, &b, rescale_event_weights)?,
        make_part(ds, &c, rescale_event_weights)?,
    ))
}

/// Apportions `count` items over parts proportionally to `totals`, each share
/// within one item of its exact quota.
fn largest_remainder(count: usize, totals: &[usize; 3], n: usize) -> [usize; 3] {
    let quotas = totals.map(|t| count as f64 * t as f64 / n as f64);
    let mut out = quotas.map(|q| q.floor() as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = count - out.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if out[k] < totals[k] {
            out[k] += 1;
            left -= 1;
        }
    }
    out
}

fn make_part(ds: &Dataset, rows: &[usize], rescale: bool) -> Result<Dataset> {
    let part = ds.subset(rows)?;
    if !rescale {
        return Ok(part);
    }
    let totals = |d: &Dataset| {
        d.labels()
            .iter()
            .zip(d.event_weights())
            .fold([0.0f64; 2], |mut acc, (l, w)| {
                acc[l.is_signal() as usize] += w;
                acc
            })
    };
    let full = totals(ds);
    let here = totals(&part);
    let scale = [0, 1].map(|c| if here[c] > 0.0 { full[c] / here[c] } else { 1.0 });
    let ev = part
        .labels()
        .iter()
        .zip(part.event_weights())
        .map(|(l, w)| w * scale[l.is_signal() as usize])
        .collect();
    part.with_event_weights(ev)
}
