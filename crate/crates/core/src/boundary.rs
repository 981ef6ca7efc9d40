//! Posterior difference-boundary probabilities and Bayesian FDR selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dagar::{EdgeDissimilarity, ADJACENCY_THRESHOLD};
use crate::error::{Error, Result};
use crate::graph::RegionGraph;
use crate::sampler::PosteriorSamples;

/// Which inequality event a boundary probability refers to. Disease
/// indices are 0-based; the text form is 1-based (`single:1`, `cross:1-2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbeKind {
    /// `φ_id ≠ φ_jd`.
    Single(usize),
    /// `φ_id ≠ φ_jd′` and `φ_id′ ≠ φ_jd`.
    Cross(usize, usize),
    /// `φ_id ≠ φ_jd` and `φ_id′ ≠ φ_jd′`.
    Shared(usize, usize),
    /// Same event as [`ProbeKind::Cross`], reported under its own name.
    Mutual(usize, usize),
}

impl ProbeKind {
    pub fn diseases(&self) -> (usize, usize) {
        match *self {
            ProbeKind::Single(d) => (d, d),
            ProbeKind::Cross(a, b) | ProbeKind::Shared(a, b) | ProbeKind::Mutual(a, b) => (a, b),
        }
    }

    pub fn check(&self, q: usize) -> Result<()> {
        let (a, b) = self.diseases();
        for index in [a, b] {
            if index >= q {
                return Err(Error::DiseaseOutOfRange { index, q });
            }
        }
        Ok(())
    }

    /// Whether the event holds for edge `(i, j)` given one draw's labels.
    pub fn event(&self, labels: &[usize], n: usize, i: usize, j: usize) -> bool {
        let u = |r: usize, d: usize| labels[d * n + r];
        match *self {
            ProbeKind::Single(d) => u(i, d) != u(j, d),
            ProbeKind::Cross(d, e) | ProbeKind::Mutual(d, e) => u(i, d) != u(j, e) && u(i, e) != u(j, d),
            ProbeKind::Shared(d, e) => u(i, d) != u(j, d) && u(i, e) != u(j, e),
        }
    }

    /// Every single, cross and shared probe for `q` diseases.
    pub fn all(q: usize) -> Vec<ProbeKind> {
        let mut out: Vec<ProbeKind> = (0..q).map(ProbeKind::Single).collect();
        for a in 0..q {
            for b in a + 1..q {
                out.push(ProbeKind::Cross(a, b));
                out.push(ProbeKind::Shared(a, b));
            }
        }
        out
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProbeKind::Single(d) => write!(f, "single:{}", d + 1),
            ProbeKind::Cross(a, b) => write!(f, "cross:{}-{}", a + 1, b + 1),
            ProbeKind::Shared(a, b) => write!(f, "shared:{}-{}", a + 1, b + 1),
            ProbeKind::Mutual(a, b) => write!(f, "mutual:{}-{}", a + 1, b + 1),
        }
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse probe `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let index = |t: &str| -> Result<usize> {
            let v: usize = t.trim().parse().map_err(|_| bad())?;
            v.checked_sub(1).ok_or_else(bad)
        };
        if kind == "single" {
            return Ok(ProbeKind::Single(index(rest)?));
        }
        let (a, b) = rest.split_once('-').ok_or_else(bad)?;
        let (a, b) = (index(a)?, index(b)?);
        if a == b {
            return Err(bad());
        }
        match kind {
            "cross" => Ok(ProbeKind::Cross(a, b)),
            "shared" => Ok(ProbeKind::Shared(a, b)),
            "mutual" => Ok(ProbeKind::Mutual(a, b)),
            _ => Err(bad()),
        }
    }
}

/// Posterior boundary probability for every geographic edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProbe {
    pub kind: ProbeKind,
    /// Geographic edges `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub v: Vec<f64>,
}

impl BoundaryProbe {
    /// Total number of geographic edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }
}

/// Fraction of label draws in which the probe event holds, per edge.
pub fn boundary_probs_from_labels(
    labels: &[Vec<usize>],
    n: usize,
    q: usize,
    edges: &[(usize, usize)],
    kind: ProbeKind,
) -> Result<BoundaryProbe> {
    kind.check(q)?;
    if labels.is_empty() {
        return Err(Error::InvalidInput("no retained draws".into()));
    }
    let mut hits = vec![0usize; edges.len()];
    for draw in labels {
        if draw.len() != n * q {
            return Err(Error::Dimension(format!("label draw has {} cells, expected {}", draw.len(), n * q)));
        }
        for (h, &(i, j)) in hits.iter_mut().zip(edges) {
            *h += kind.event(draw, n, i, j) as usize;
        }
    }
    let s = labels.len() as f64;
    Ok(BoundaryProbe { kind, edges: edges.to_vec(), v: hits.into_iter().map(|h| h as f64 / s).collect() })
}

pub fn boundary_probs(samples: &PosteriorSamples, graph: &RegionGraph, kind: ProbeKind) -> Result<BoundaryProbe> {
    boundary_probs_from_labels(&samples.labels, samples.n, samples.q, graph.edges(), kind)
}

/// `Σ (1 - v) 1[v > t] / Σ 1[v > t]`, summed in edge order.
pub fn fdr_estimate(v: &[f64], t: f64) -> Result<f64> {
    let (mut num, mut count) = (0.0, 0usize);
    for &x in v {
        if x > t {
            num += 1.0 - x;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoDiscoveries(t));
    }
    Ok(num / count as f64)
}

/// `Σ v 1[v <= t] / (m - Σ 1[v > t])`, summed in edge order.
pub fn fnr_estimate(v: &[f64], t: f64) -> Result<f64> {
    let (mut num, mut rest) = (0.0, 0usize);
    for &x in v {
        if x <= t {
            num += x;
            rest += 1;
        }
    }
    if rest == 0 {
        return Err(Error::AllSelected(t));
    }
    Ok(num / rest as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    /// `None` when nothing is selected.
    pub fdr_hat: Option<f64>,
    /// `None` when every edge is selected.
    pub fnr_hat: Option<f64>,
    pub n_selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrCurve {
    pub zeta: f64,
    /// One point per candidate threshold, thresholds descending.
    pub points: Vec<CurvePoint>,
    /// Smallest candidate threshold meeting the budget, if any selects edges.
    pub threshold: Option<f64>,
    /// Selected edges (`v > threshold`), indexed like the probe's edges.
    pub selected: Vec<bool>,
}

impl FdrCurve {
    pub fn n_selected(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }
}

/// Candidate thresholds: every distinct value of `v` and 0, descending.
pub fn candidate_thresholds(v: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = v.iter().copied().chain(std::iter::once(0.0)).filter(|x| *x >= 0.0).collect();
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    t
}

/// Selects the largest edge set `{v > t}` whose estimated FDR is at most
/// `zeta`; an empty selection is a valid outcome.
pub fn select_threshold(v: &[f64], zeta: f64) -> Result<FdrCurve> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::OutOfSupport { name: "zeta", value: zeta, support: "(0, 1)".into() });
    }
    let mut points = Vec::new();
    let mut threshold = None;
    for t in candidate_thresholds(v) {
        let n_selected = v.iter().filter(|&&x| x > t).count();
        let fdr_hat = fdr_estimate(v, t).ok();
        let fnr_hat = fnr_estimate(v, t).ok();
        if fdr_hat.is_some_and(|f| f <= zeta) {
            threshold = Some(t);
        }
        points.push(CurvePoint { t, fdr_hat, fnr_hat, n_selected });
    }
    let selected = match threshold {
        Some(t) => v.iter().map(|&x| x > t).collect(),
        None => vec![false; v.len()],
    };
    Ok(FdrCurve { zeta, points, threshold, selected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScore {
    /// `NaN` when there are no true boundaries.
    pub sensitivity: f64,
    /// `NaN` when every edge is a true boundary.
    pub specificity: f64,
    pub detected: Vec<bool>,
}

/// Edge indices ranked by `v` descending, ties by index ascending.
pub fn rank_edges(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Marks the `top` highest-probability edges as detected and scores them
/// against the true boundary flags.
pub fn score_against_truth(v: &[f64], truth: &[bool], top: usize) -> Result<TruthScore> {
    if v.len() != truth.len() {
        return Err(Error::Dimension("probabilities and truth flags differ in length".into()));
    }
    if top > v.len() {
        return Err(Error::InvalidInput(format!("cannot select {top} of {} edges", v.len())));
    }
    let mut detected = vec![false; v.len()];
    for &k in rank_edges(v).iter().take(top) {
        detected[k] = true;
    }
    let count = |pred: &dyn Fn(usize) -> bool| (0..v.len()).filter(|&k| pred(k)).count() as f64;
    let positives = count(&|k| truth[k]);
    let negatives = v.len() as f64 - positives;
    Ok(TruthScore {
        sensitivity: count(&|k| truth[k] && detected[k]) / positives,
        specificity: count(&|k| !truth[k] && !detected[k]) / negatives,
        detected,
    })
}

/// Realized false discovery proportion of a selection; 0 when nothing is
/// selected.
pub fn truth_fdr(selected: &[bool], truth: &[bool]) -> f64 {
    let picked = selected.iter().filter(|&&s| s).count();
    if picked == 0 {
        return 0.0;
    }
    let false_hits = selected.iter().zip(truth).filter(|(&s, &t)| s && !t).count();
    false_hits as f64 / picked as f64
}

/// Posterior probability that each geographic edge is cut from each
/// disease's adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyReport {
    /// Geographic edges `(i, j)`, `i < j`, in parent-link order.
    pub edges: Vec<(usize, usize)>,
    /// `prob[d][k] = P(w_{d,ij} = 0 | y)`.
    pub prob: Vec<Vec<f64>>,
    pub cutoff: f64,
}

impl AdjacencyReport {
    pub fn detected(&self, d: usize) -> Vec<bool> {
        self.prob[d].iter().map(|&p| p > self.cutoff).collect()
    }
}

pub fn adjacency_detection(
    samples: &PosteriorSamples,
    dissimilarity: &[EdgeDissimilarity],
    cutoff: f64,
) -> Result<AdjacencyReport> {
    if dissimilarity.len() != samples.q {
        return Err(Error::Dimension("one dissimilarity table per disease is required".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no retained draws".into()));
    }
    let edges = dissimilarity[0].edges().iter().map(|e| (e.child.min(e.parent), e.child.max(e.parent))).collect();
    let s = samples.len() as f64;
    let prob = dissimilarity
        .iter()
        .enumerate()
        .map(|(d, z)| {
            (0..z.len())
                .map(|k| {
                    let cut = (0..samples.len())
                        .filter(|&draw| z.similarity(k, samples.eta_of(draw, d)) < ADJACENCY_THRESHOLD)
                        .count();
                    cut as f64 / s
                })
                .collect()
        })
        .collect();
    Ok(AdjacencyReport { edges, prob, cutoff })
}
