use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Comparison between two histograms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Cosine,
    Wasserstein,
    Js,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 3] = [SimilarityKind::Cosine, SimilarityKind::Wasserstein, SimilarityKind::Js];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityKind::Cosine => "cosine",
            SimilarityKind::Wasserstein => "wasserstein",
            SimilarityKind::Js => "js",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(SimilarityKind::Cosine),
            "wasserstein" | "ws" | "emd" => Ok(SimilarityKind::Wasserstein),
            "js" | "jensen_shannon" => Ok(SimilarityKind::Js),
            _ => Err(Error::InvalidArgument(format!("unknown similarity `{s}`"))),
        }
    }
}

fn same_len(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::Empty("histogram with no bins"));
    }
    Ok(())
}

pub fn cosine(p: &[f64], q: &[f64]) -> Result<f64> {
    same_len(p, q)?;
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Err(Error::InvalidArgument("cosine similarity of a zero vector".into()));
    }
    Ok(dot / (np * nq))
}

/// 1-Wasserstein distance with bin `i` placed at `i / (B − 1)`.
pub fn wasserstein(p: &[f64], q: &[f64]) -> Result<f64> {
    same_len(p, q)?;
    if p.len() == 1 {
        return Ok(0.0);
    }
    let step = 1.0 / (p.len() - 1) as f64;
    let (mut cp, mut cq, mut total) = (0.0, 0.0, 0.0);
    for i in 0..p.len() - 1 {
        cp += p[i];
        cq += q[i];
        total += (cp - cq).abs() * step;
    }
    Ok(total)
}

/// Jensen-Shannon divergence in bits, within `[0, 1]`.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> Result<f64> {
    same_len(p, q)?;
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).log2())
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((0.5 * kl(p, &m) + 0.5 * kl(q, &m)).clamp(0.0, 1.0))
}

pub fn similarity(p: &[f64], q: &[f64], kind: SimilarityKind) -> Result<f64> {
    match kind {
        SimilarityKind::Cosine => cosine(p, q),
        SimilarityKind::Wasserstein => wasserstein(p, q),
        SimilarityKind::Js => jensen_shannon(p, q),
    }
}
