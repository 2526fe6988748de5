//! Jaccard and Dice scores and the evaluation report.

use crate::error::{Error, Result};
use crate::postprocess::BinaryMask;

/// `|a ∩ b| / |a ∪ b|`; two empty masks score 1.
pub fn jaccard_index(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::InvalidArgument(format!(
            "cannot compare a {}x{} mask with a {}x{} mask",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

pub fn dice_from_jaccard(j: f64) -> f64 {
    2.0 * j / (1.0 + j)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub jaccard: f64,
    pub dice: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn push(&mut self, name: impl Into<String>, jaccard: f64) {
        self.rows.push(ReportRow {
            name: name.into(),
            jaccard,
            dice: dice_from_jaccard(jaccard),
        });
    }

    /// Corpus means `(jaccard, dice)`; zero for an empty report.
    pub fn mean(&self) -> (f64, f64) {
        if self.rows.is_empty() {
            return (0.0, 0.0);
        }
        let n = self.rows.len() as f64;
        (
            self.rows.iter().map(|r| r.jaccard).sum::<f64>() / n,
            self.rows.iter().map(|r| r.dice).sum::<f64>() / n,
        )
    }

    /// `name,jaccard,dice` per image, then `MEAN,<j>,<d>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!("{},{:.6},{:.6}\n", r.name, r.jaccard, r.dice));
        }
        let (j, d) = self.mean();
        out.push_str(&format!("MEAN,{j:.6},{d:.6}\n"));
        out
    }
}
