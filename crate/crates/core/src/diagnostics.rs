//! Model comparison and chain-quality metrics.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::data::{sir, ObservedData};
use crate::error::{Error, Result};
use crate::graph::RegionGraph;
use crate::sampler::PosteriorSamples;
use crate::stats::{log_sum_exp, mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// `-2 (lppd - p_waic)` from a draws-by-cells log-likelihood table, with the
/// variance penalty.
pub fn waic(pointwise: &[Vec<f64>]) -> Result<Waic> {
    let s = pointwise.len();
    if s < 2 {
        return Err(Error::InvalidInput("WAIC needs at least two draws".into()));
    }
    let cells = pointwise[0].len();
    if pointwise.iter().any(|r| r.len() != cells) {
        return Err(Error::Dimension("ragged log-likelihood table".into()));
    }
    let (mut lppd, mut p_waic) = (0.0, 0.0);
    let mut column = vec![0.0; s];
    for c in 0..cells {
        for (slot, row) in column.iter_mut().zip(pointwise) {
            *slot = row[c];
        }
        lppd += log_sum_exp(&column) - (s as f64).ln();
        p_waic += variance(&column);
    }
    let out = Waic { waic: -2.0 * (lppd - p_waic), lppd, p_waic };
    if !out.waic.is_finite() {
        return Err(Error::NonFinite("WAIC".into()));
    }
    Ok(out)
}

/// Pools the draws of several chains and computes WAIC.
pub fn waic_samples(chains: &[PosteriorSamples], data: &ObservedData) -> Result<Waic> {
    let table: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.pointwise_loglik(data)).collect();
    waic(&table)
}

/// Batch means with `⌊√B⌋` draws per batch: returns the batch size and the
/// batch means.
fn batch_means(x: &[f64]) -> (usize, Vec<f64>) {
    let b = (x.len() as f64).sqrt().floor() as usize;
    let a = x.len() / b;
    (b, (0..a).map(|k| mean(&x[k * b..(k + 1) * b])).collect())
}

/// Monte Carlo standard error of the mean by non-overlapping batch means.
pub fn mcse(x: &[f64]) -> Result<f64> {
    if x.len() < 4 {
        return Err(Error::InvalidInput("MCSE needs at least four draws".into()));
    }
    let (b, means) = batch_means(x);
    Ok((b as f64 * variance(&means) / x.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateEss {
    pub ess: f64,
    /// Columns that entered the determinant ratio.
    pub used: Vec<usize>,
    /// Constant columns left out.
    pub excluded: Vec<usize>,
}

fn log_det_spd(m: DMatrix<f64>) -> Option<f64> {
    let chol = m.cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `B (|Λ| / |Σ|)^{1/p}` with `Λ` the sample covariance and `Σ` the
/// batch-means estimate, for a `B x p` draw table.
pub fn multivariate_ess(draws: &[Vec<f64>]) -> Result<MultivariateEss> {
    let b_total = draws.len();
    let width = draws.first().map_or(0, Vec::len);
    let (used, excluded): (Vec<usize>, Vec<usize>) = (0..width).partition(|&j| {
        let col: Vec<f64> = draws.iter().map(|r| r[j]).collect();
        variance(&col) > 0.0
    });
    if !excluded.is_empty() {
        warn!("{} constant columns excluded from the multivariate ESS", excluded.len());
    }
    let p = used.len();
    if p == 0 || b_total <= p {
        return Err(Error::InvalidInput(format!("multivariate ESS needs B > p >= 1 (B = {b_total}, p = {p})")));
    }
    let cols: Vec<Vec<f64>> = used.iter().map(|&j| draws.iter().map(|r| r[j]).collect()).collect();
    let centers: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let lambda = DMatrix::from_fn(p, p, |r, c| {
        (0..b_total).map(|t| (cols[r][t] - centers[r]) * (cols[c][t] - centers[c])).sum::<f64>() / (b_total - 1) as f64
    });
    let batches: Vec<(usize, Vec<f64>)> = cols.iter().map(|c| batch_means(c)).collect();
    let size = batches[0].0 as f64;
    let a = batches[0].1.len();
    if a < 2 {
        return Err(Error::InvalidInput("too few batches".into()));
    }
    let batch_centers: Vec<f64> = batches.iter().map(|(_, m)| mean(m)).collect();
    let sigma = DMatrix::from_fn(p, p, |r, c| {
        let (mr, mc) = (&batches[r].1, &batches[c].1);
        size * (0..a).map(|k| (mr[k] - batch_centers[r]) * (mc[k] - batch_centers[c])).sum::<f64>() / (a - 1) as f64
    });
    let ld_lambda = log_det_spd(lambda).ok_or(Error::NotPositiveDefinite)?;
    let ld_sigma = log_det_spd(sigma).ok_or(Error::NotPositiveDefinite)?;
    Ok(MultivariateEss { ess: b_total as f64 * ((ld_lambda - ld_sigma) / p as f64).exp(), used, excluded })
}

/// Relative precision `ε` attained by a multivariate ESS at confidence
/// `1 - alpha`: `ε² = 2^{2/p} π / (p Γ(p/2))^{2/p} χ²_{1-α,p} / ESS`.
pub fn relative_precision(ess: f64, p: usize, alpha: f64) -> f64 {
    let pf = p as f64;
    let chi = ChiSquared::new(pf).expect("positive degrees of freedom").inverse_cdf(1.0 - alpha);
    let log_c = (2.0 / pf) * 2f64.ln() + std::f64::consts::PI.ln() - (2.0 / pf) * (pf.ln() + ln_gamma(pf / 2.0));
    (log_c.exp() * chi / ess).sqrt()
}

/// Moran's I with binary weights over the unordered pairs given.
pub fn morans_i(field: &[f64], pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("Moran's I needs at least one pair".into()));
    }
    let m = mean(field);
    let denom: f64 = field.iter().map(|x| (x - m) * (x - m)).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance("Moran's I field".into()));
    }
    let num: f64 = pairs.iter().map(|&(i, j)| (field[i] - m) * (field[j] - m)).sum();
    Ok(field.len() as f64 / pairs.len() as f64 * num / denom)
}

/// Pearson correlations between columns.
pub fn pearson_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .enumerate()
        .map(|(d, c)| {
            let m = mean(c);
            let out: Vec<f64> = c.iter().map(|x| x - m).collect();
            if out.iter().all(|x| *x == 0.0) {
                Err(Error::ZeroVariance(format!("column {}", d + 1)))
            } else {
                Ok(out)
            }
        })
        .collect::<Result<_>>()?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let q = centered.len();
    Ok((0..q)
        .map(|r| {
            (0..q)
                .map(|c| {
                    if r == c {
                        1.0
                    } else {
                        dot(&centered[r], &centered[c])
                            / (dot(&centered[r], &centered[r]) * dot(&centered[c], &centered[c])).sqrt()
                    }
                })
                .collect()
        })
        .collect())
}

/// Scalar parameters tracked by the chain-quality metrics, one column per
/// name: `β`, `τ_s`, `ρ`, `η` and the cross-disease parameters.
pub fn scalar_parameters(samples: &PosteriorSamples) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut names = Vec::new();
    let p = samples.beta.first().map_or(0, |b| b.len() / samples.q.max(1));
    for d in 0..samples.q {
        for k in 0..p {
            names.push(format!("beta[{},{}]", d + 1, k + 1));
        }
    }
    names.push("tau_s".into());
    names.extend((0..samples.q).map(|d| format!("rho[{}]", d + 1)));
    for d in 0..samples.q {
        names.extend((0..samples.eta_dims[d]).map(|r| format!("eta[{},{}]", d + 1, r + 1)));
    }
    let cross_len = samples.cross.first().map_or(0, Vec::len);
    names.extend((0..cross_len).map(|k| format!("cross[{}]", k + 1)));
    let rows = (0..samples.len())
        .map(|s| {
            let mut row = samples.beta[s].clone();
            row.push(samples.tau_s[s]);
            row.extend(&samples.rho[s]);
            row.extend(&samples.eta[s]);
            row.extend(&samples.cross[s]);
            row
        })
        .collect();
    (names, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub draws: usize,
    pub mcse: BTreeMap<String, f64>,
    pub ess_multivariate: Option<f64>,
    pub relative_precision: Option<f64>,
    pub ess_parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub waic: Waic,
    pub chains: Vec<ChainDiagnostics>,
    /// Moran's I of each disease's SIR, one value per neighbor order.
    pub morans: Vec<Vec<f64>>,
    pub pearson: Vec<Vec<f64>>,
    /// `[regions, diseases, draws per chain, chains]`.
    pub shape: [usize; 4],
}

/// Full diagnostics for a fitted model. Moran's I uses the distance bins
/// when the map has centroids, first-order neighbors otherwise.
pub fn diagnose(
    chains: &[PosteriorSamples],
    data: &ObservedData,
    graph: &RegionGraph,
    bins: Option<&[f64]>,
) -> Result<DiagnosticsReport> {
    if chains.is_empty() {
        return Err(Error::InvalidInput("no chains to diagnose".into()));
    }
    let waic = waic_samples(chains, data)?;
    let per_chain = chains
        .iter()
        .map(|c| {
            let (names, rows) = scalar_parameters(c);
            let mut table = BTreeMap::new();
            for (j, name) in names.iter().enumerate() {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                if let Ok(se) = mcse(&col) {
                    table.insert(name.clone(), se);
                }
            }
            let ess = multivariate_ess(&rows).map_err(|e| warn!("multivariate ESS unavailable: {e}")).ok();
            ChainDiagnostics {
                draws: c.len(),
                mcse: table,
                ess_multivariate: ess.as_ref().map(|e| e.ess),
                relative_precision: ess.as_ref().map(|e| relative_precision(e.ess, e.used.len(), 0.05)),
                ess_parameters: ess.as_ref().map_or(0, |e| e.used.len()),
            }
        })
        .collect();
    let pair_sets = match (bins, graph.centroids()) {
        (Some(b), Some(_)) => graph.rth_order_neighbors(b)?,
        _ => vec![graph.edges().to_vec()],
    };
    let sirs: Vec<Vec<f64>> = (0..data.q)
        .map(|d| {
            let r = d * data.n..(d + 1) * data.n;
            sir(&data.counts[r.clone()], &data.expected[r])
        })
        .collect();
    let morans = sirs
        .iter()
        .map(|f| pair_sets.iter().map(|p| morans_i(f, p).unwrap_or(f64::NAN)).collect())
        .collect();
    let pearson = if data.q > 1 { pearson_matrix(&sirs).unwrap_or_default() } else { vec![vec![1.0]] };
    Ok(DiagnosticsReport {
        waic,
        chains: per_chain,
        morans,
        pearson,
        shape: [data.n, data.q, chains[0].len(), chains.len()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn waic_examples() {
        let flat = vec![vec![-1.0, -2.0]; 5];
        let w = waic(&flat).unwrap();
        assert_eq!(w.p_waic, 0.0);
        assert!((w.waic - 6.0).abs() < 1e-12);

        let (a, b) = (-0.3f64, -1.7f64);
        let w = waic(&[vec![a], vec![b]]).unwrap();
        assert!((w.lppd - ((a.exp() + b.exp()) / 2.0).ln()).abs() < 1e-14);
        assert!((w.p_waic - (a - b) * (a - b) / 2.0).abs() < 1e-14);
        assert!((w.waic - (-2.0 * w.lppd + 2.0 * w.p_waic)).abs() < 1e-12);
        assert!(waic(&[vec![0.0]]).is_err());
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        let sd = (1.0 - phi * phi).sqrt();
        (0..n)
            .map(|_| {
                x = phi * x + sd * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn ess_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let iid: Vec<Vec<f64>> = (0..10_000).map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let e = multivariate_ess(&iid).unwrap();
        assert!((e.ess / 1e4 - 1.0).abs() < 0.1, "{}", e.ess);

        let chain: Vec<Vec<f64>> = ar1(100_000, 0.9, 8).into_iter().map(|x| vec![x]).collect();
        let e = multivariate_ess(&chain).unwrap();
        let want = 1e5 * 0.1 / 1.9;
        assert!((e.ess / want - 1.0).abs() < 0.2, "{} vs {want}", e.ess);

        let with_constant: Vec<Vec<f64>> = iid.iter().map(|r| vec![r[0], 3.0, r[1]]).collect();
        assert_eq!(multivariate_ess(&with_constant).unwrap().used, vec![0, 2]);
        let e = multivariate_ess(&with_constant).unwrap();
        assert_eq!(e.excluded, vec![1]);
    }

    #[test]
    fn mcse_matches_iid_standard_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..40_000).map(|_| rng.sample(StandardNormal)).collect();
        let se = mcse(&x).unwrap();
        assert!((se / (1.0 / 200.0) - 1.0).abs() < 0.15);
    }

    #[test]
    fn relative_precision_magnitude() {
        let eps = relative_precision(1940.335, 17, 0.05);
        assert!(eps > 0.08 && eps < 0.12, "{eps}");
        // p = 1: ε = 2 z_{0.975} / sqrt(ESS)
        let one = relative_precision(400.0, 1, 0.05);
        assert!((one - 2.0 * 1.959964 / 20.0).abs() < 1e-6, "{one}");
    }

    #[test]
    fn morans_examples() {
        let path: Vec<(usize, usize)> = (0..9).map(|i| (i, i + 1)).collect();
        let field: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let i = morans_i(&field, &path).unwrap();
        let m = 4.5;
        let num: f64 = path.iter().map(|&(a, b)| (a as f64 - m) * (b as f64 - m)).sum();
        let den: f64 = field.iter().map(|x| (x - m) * (x - m)).sum();
        assert!((i - 10.0 / 9.0 * num / den).abs() < 1e-14 && i > 0.0);
        assert!(morans_i(&[2.0; 10], &path).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut values = field.clone();
        let mut total = 0.0;
        for _ in 0..1000 {
            for k in (1..values.len()).rev() {
                values.swap(k, rng.random_range(0..=k));
            }
            total += morans_i(&values, &path).unwrap();
        }
        assert!((total / 1000.0 + 1.0 / 9.0).abs() < 0.02);
    }

    #[test]
    fn pearson_examples() {
        let a = vec![1.0, 2.0, 4.0, 3.0];
        let r = pearson_matrix(&[a.clone(), a.clone(), a.iter().map(|x| 10.0 - 2.0 * x).collect()]).unwrap();
        assert!((r[0][1] - 1.0).abs() < 1e-14);
        assert!((r[0][2] + 1.0).abs() < 1e-14);
        assert!(pearson_matrix(&[a, vec![1.0; 4]]).is_err());
    }

    proptest! {
        #[test]
        fn ess_is_invariant_to_linear_maps(seed in 0u64..1000, t in prop::array::uniform4(-2.0f64..2.0)) {
            let m = DMatrix::from_row_slice(2, 2, &[t[0] + 3.0, t[1], t[2], t[3] + 3.0]);
            prop_assume!(m.determinant().abs() > 0.5);
            let a = ar1(2000, 0.5, seed);
            let b = ar1(2000, 0.2, seed + 1);
            let draws: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![*x, *y]).collect();
            let mapped: Vec<Vec<f64>> = draws
                .iter()
                .map(|r| vec![m[(0, 0)] * r[0] + m[(0, 1)] * r[1], m[(1, 0)] * r[0] + m[(1, 1)] * r[1]])
                .collect();
            let e0 = multivariate_ess(&draws).unwrap().ess;
            let e1 = multivariate_ess(&mapped).unwrap().ess;
            prop_assert!((e0 - e1).abs() / e0 < 1e-6);
        }

        #[test]
        fn morans_is_affine_invariant(
            field in prop::collection::vec(-5.0f64..5.0, 6),
            scale in 0.1f64..10.0,
            shift in -10.0f64..10.0,
        ) {
            let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)];
            prop_assume!(variance(&field) > 1e-3);
            let moved: Vec<f64> = field.iter().map(|x| scale * x + shift).collect();
            let a = morans_i(&field, &pairs).unwrap();
            let b = morans_i(&moved, &pairs).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn waic_penalty_is_non_negative(table in prop::collection::vec(prop::collection::vec(-20.0f64..0.0, 3), 2..12)) {
            let w = waic(&table).unwrap();
            prop_assert!(w.p_waic >= 0.0);
            prop_assert!((w.waic - (-2.0 * w.lppd + 2.0 * w.p_waic)).abs() < 1e-9);
        }
    }
}
