//! The Einstein condition for the adapted connection, checked two ways.
//!
//! The direct route traces the full curvature tensor (`ricci_weyl_at`). The
//! structural route assembles the same Ricci tensor from per-factor data:
//! each factor metric is conformally rescaled by the warp, its Levi-Civita
//! Ricci corrected by the standard conformal-change formula, and the two
//! Faraday contributions are added:
//!
//! ```text
//! Ric^D = Ric(e^{-2f} g1) + Ric(e^{2f} g2) + (2-n)/2 F + (n1-n2)/2 Fhat
//! ```
//!
//! with the factor pieces computed holding the other factor's coordinates
//! frozen. Agreement of the two routes is the crate's strongest internal
//! consistency check. On 2+2 splits with flat factors, the Einstein
//! condition reduces to a single scalar PDE in the warp,
//! e^{2f}(f_11 + f_22) + f_33 + f_44 = 0, evaluated here symbolically and
//! solved on grids in `toda`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{
    faraday_at, gauge_metric_at, invert_metric, lc_christoffels, ConformalProductChart,
    FactorJets, GaugeChoice,
};
use crate::curvature::{ricci_weyl_at, RicciAtPoint};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::tensor::{Arr3, Arr4, TwoFormAtPoint};

/// The symmetric companion of the Faraday form: equal to F on the mixed
/// block, extended symmetrically, zero on both pure blocks.
#[derive(Debug, Clone)]
pub struct SymmetrizedFaraday {
    m: DMatrix<f64>,
}

impl SymmetrizedFaraday {
    pub fn from_faraday(f: &TwoFormAtPoint, n1: usize) -> Self {
        let n = f.dim();
        let fm = f.matrix();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n1 {
            for i in n1..n {
                m[(a, i)] = fm[(a, i)];
                m[(i, a)] = fm[(a, i)];
            }
        }
        SymmetrizedFaraday { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Same conformal weight as the Faraday form itself.
    pub fn weight(&self) -> i32 {
        0
    }
}

pub fn symmetrized_faraday_at(
    chart: &ConformalProductChart,
    x: &[f64],
) -> Result<SymmetrizedFaraday> {
    Ok(SymmetrizedFaraday::from_faraday(
        &faraday_at(chart, x)?,
        chart.n1(),
    ))
}

/// Levi-Civita Ricci of a factor metric from its 2-jet, with the convention
/// Ric_pq = g^{ij} R_{pijq} fixed by the cross-route agreement tests.
fn lc_ricci_from_jets(
    g: &DMatrix<f64>,
    dg: &[DMatrix<f64>],
    d2g: &[Vec<DMatrix<f64>>],
    x: &[f64],
) -> Result<(DMatrix<f64>, Arr3, DMatrix<f64>)> {
    let k = g.nrows();
    let ginv = invert_metric(g, x)?;
    let gamma = lc_christoffels(&ginv, dg);
    let dginv: Vec<DMatrix<f64>> = (0..k).map(|m| -(&ginv * &dg[m] * &ginv)).collect();
    let a3 = |i: usize, j: usize, l: usize| dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)];
    let da4 = |m: usize, i: usize, j: usize, l: usize| {
        d2g[m][i][(j, l)] + d2g[m][j][(i, l)] - d2g[m][l][(i, j)]
    };
    let mut dgamma = Arr4::zeros(k);
    for m in 0..k {
        for kk in 0..k {
            for i in 0..k {
                for j in 0..k {
                    let mut v = 0.0;
                    for l in 0..k {
                        v += dginv[m][(kk, l)] * a3(i, j, l) + ginv[(kk, l)] * da4(m, i, j, l);
                    }
                    dgamma.set(m, kk, i, j, 0.5 * v);
                }
            }
        }
    }
    let mut riem = Arr4::zeros(k); // mixed R^l_{ijk}
    for l in 0..k {
        for i in 0..k {
            for j in 0..k {
                for kk in 0..k {
                    let mut v = dgamma.get(i, l, j, kk) - dgamma.get(j, l, i, kk);
                    for m in 0..k {
                        v += gamma.get(l, i, m) * gamma.get(m, j, kk)
                            - gamma.get(l, j, m) * gamma.get(m, i, kk);
                    }
                    riem.set(l, i, j, kk, v);
                }
            }
        }
    }
    let mut ric = DMatrix::zeros(k, k);
    for p in 0..k {
        for q in 0..k {
            let mut acc = 0.0;
            for i in 0..k {
                for j in 0..k {
                    // R_{pijq} = g_{qm} R^m_{pij}
                    let mut low = 0.0;
                    for m in 0..k {
                        low += g[(q, m)] * riem.get(m, p, i, j);
                    }
                    acc += ginv[(i, j)] * low;
                }
            }
            ric[(p, q)] = acc;
        }
    }
    Ok((ric, gamma, ginv))
}

/// Ricci of e^{2 phi} g from the Ricci of g, for a factor of dimension k:
///
/// ```text
/// Ric(e^{2phi} g) = Ric(g) - (k-2)(Hess phi - dphi (x) dphi)
///                 + ( -tr_g Hess phi - (k-2) |dphi|^2 ) g
/// ```
fn conformal_ricci(
    ric0: &DMatrix<f64>,
    g: &DMatrix<f64>,
    ginv: &DMatrix<f64>,
    gamma: &Arr3,
    dphi: &DVector<f64>,
    d2phi: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = g.nrows();
    let mut hess = d2phi.clone();
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                hess[(a, b)] -= gamma.get(c, a, b) * dphi[c];
            }
        }
    }
    let lap = (ginv * &hess).trace();
    let grad2 = (ginv * dphi).dot(dphi);
    let km2 = k as f64 - 2.0;
    let correction = (&hess - dphi * dphi.transpose()) * km2;
    ric0 - correction + g * (-lap - km2 * grad2)
}

/// The structural Ricci split into its four summands, each embedded as an
/// n x n matrix.
#[derive(Debug, Clone)]
pub struct RicciDecomposition {
    pub ric1: DMatrix<f64>,
    pub ric2: DMatrix<f64>,
    pub faraday_term: DMatrix<f64>,
    pub fhat_term: DMatrix<f64>,
    pub total: DMatrix<f64>,
}

pub fn ricci_decomposition_parts(
    chart: &ConformalProductChart,
    x: &[f64],
) -> Result<RicciDecomposition> {
    let n = chart.dim();
    let n1 = chart.n1();
    let n2 = chart.n2();
    let mut embedded = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (which, slot) in embedded.iter_mut().enumerate() {
        let second = which == 1;
        let FactorJets { g, dg, d2g, f } = chart.factor_data(second, x)?;
        let (ric0, gamma, ginv) = lc_ricci_from_jets(&g, &dg, &d2g, x)?;
        let sign = if second { 1.0 } else { -1.0 };
        let ric = conformal_ricci(&ric0, &g, &ginv, &gamma, &(&f.d * sign), &(&f.d2 * sign));
        let lo = if second { n1 } else { 0 };
        let k = if second { n2 } else { n1 };
        for a in 0..k {
            for b in 0..k {
                slot[(lo + a, lo + b)] = ric[(a, b)];
            }
        }
    }
    let [ric1, ric2] = embedded;
    let far = faraday_at(chart, x)?;
    let faraday_term = far.matrix() * ((2.0 - n as f64) / 2.0);
    let fhat = SymmetrizedFaraday::from_faraday(&far, n1);
    let fhat_term = fhat.matrix() * ((n1 as f64 - n2 as f64) / 2.0);
    let total = &ric1 + &ric2 + &faraday_term + &fhat_term;
    Ok(RicciDecomposition { ric1, ric2, faraday_term, fhat_term, total })
}

/// The Ricci tensor of the adapted connection, assembled from per-factor
/// conformal data rather than the full curvature tensor. Independent of the
/// trace route in `curvature` up to roundoff.
pub fn ricci_decomposition_at(chart: &ConformalProductChart, x: &[f64]) -> Result<RicciAtPoint> {
    Ok(RicciAtPoint::from_matrix(
        ricci_decomposition_parts(chart, x)?.total,
    ))
}

/// Sup-norm of the trace-free symmetric part of Ric^D at a point, measured
/// against the given gauge metric. Zero exactly when the structure is
/// Einstein at that point; invariant under gauge changes.
pub fn einstein_residual_in_gauge(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<f64> {
    let ric = ricci_weyl_at(chart, gauge, x)?;
    let sym = ric.symmetric_part();
    let g = gauge_metric_at(chart, gauge, x)?;
    let trace = (g.inverse() * &sym).trace();
    let n = chart.dim() as f64;
    Ok((sym - g.matrix() * (trace / n)).amax())
}

pub fn einstein_residual_at(chart: &ConformalProductChart, x: &[f64]) -> Result<f64> {
    einstein_residual_in_gauge(chart, &GaugeChoice::default_gauge(), x)
}

/// Einstein factors read off each factor block: phi1 from Ric1 against g1,
/// phi2 from Ric2 against e^{2f} g2. They agree exactly on Einstein charts.
pub fn measured_phi_at(chart: &ConformalProductChart, x: &[f64]) -> Result<(f64, f64)> {
    let parts = ricci_decomposition_parts(chart, x)?;
    let g = gauge_metric_at(chart, &GaugeChoice::default_gauge(), x)?;
    let n1 = chart.n1();
    let n2 = chart.n2();
    let g1 = g.matrix().view((0, 0), (n1, n1)).into_owned();
    let g2w = g.matrix().view((n1, n1), (n2, n2)).into_owned();
    let r1 = parts.ric1.view((0, 0), (n1, n1)).into_owned();
    let r2 = parts.ric2.view((n1, n1), (n2, n2)).into_owned();
    let phi1 = (invert_metric(&g1, x)? * r1).trace() / n1 as f64;
    let phi2 = (invert_metric(&g2w, x)? * r2).trace() / n2 as f64;
    Ok((phi1, phi2))
}

/// Left side of e^{2f}(f_11 + f_22) + f_33 + f_44 at a point, from symbolic
/// second derivatives. Only defined for warps on two 2-dimensional factors.
pub fn toda_residual(f: &ScalarField, p: &[f64]) -> Result<f64> {
    if f.nvars() != 4 {
        return Err(Error::Unsupported(format!(
            "warp PDE needs 4 variables, field has {}",
            f.nvars()
        )));
    }
    let mut second = [0.0; 4];
    for (v, out) in second.iter_mut().enumerate() {
        *out = f.diff(v + 1).diff(v + 1).eval(p)?;
    }
    let fv = f.eval(p)?;
    Ok((2.0 * fv).exp() * (second[0] + second[1]) + second[2] + second[3])
}

/// Point-sample summary of the Einstein condition over a chart.
#[derive(Debug, Clone, Serialize)]
pub struct EinsteinReport {
    pub samples: usize,
    pub residual_max: f64,
    pub residual_min: f64,
    /// Per-sample (phi1, phi2) pairs, in sample order.
    pub phi_values: Vec<(f64, f64)>,
    /// True when the Faraday form vanished (to 1e-12) at every sample.
    pub closed_flag: bool,
}

pub fn einstein_scan(
    chart: &ConformalProductChart,
    points: &[DVector<f64>],
) -> Result<EinsteinReport> {
    if points.is_empty() {
        return Err(Error::Unsupported("empty sample set".into()));
    }
    let rows = points
        .par_iter()
        .map(|p| -> Result<(f64, (f64, f64), f64)> {
            let x = p.as_slice();
            Ok((
                einstein_residual_at(chart, x)?,
                measured_phi_at(chart, x)?,
                faraday_at(chart, x)?.matrix().amax(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let residual_max = rows.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let residual_min = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let closed_flag = rows.iter().all(|r| r.2 <= 1e-12);
    Ok(EinsteinReport {
        samples: points.len(),
        residual_max,
        residual_min,
        phi_values: rows.into_iter().map(|r| r.1).collect(),
        closed_flag,
    })
}

/// Einstein scan restricted to equal factor dimensions at least 3, the
/// regime where non-closed Einstein products are ruled out; the report's
/// `residual_min` exhibits the obstruction on concrete charts.
pub fn no_go_scan(
    chart: &ConformalProductChart,
    points: &[DVector<f64>],
) -> Result<EinsteinReport> {
    if chart.n1() != chart.n2() || chart.n1() < 3 {
        return Err(Error::Unsupported(format!(
            "no-go scan needs equal factor dimensions >= 3, chart is ({}, {})",
            chart.n1(),
            chart.n2()
        )));
    }
    einstein_scan(chart, points)
}
