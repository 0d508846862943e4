//! Curvature of the adapted Weyl connection.
//!
//! Conventions: with Gamma the connection symbols,
//!
//! ```text
//! R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
//!           + Gamma^l_{im} Gamma^m_{jk} - Gamma^m_{ik} Gamma^l_{jm}
//! R_{ijkl}  = g_{lm} R^m_{ijk}
//! ```
//!
//! so `lowered(i, j, k, l)` is g(R(e_i, e_j) e_k, e_l). The first index pair
//! is antisymmetric; the familiar pair-exchange symmetry of Riemannian
//! curvature fails for a Weyl connection by an exact expression in the
//! Faraday form, which is what `symmetry_failure_residual` certifies.

use nalgebra::DMatrix;

use crate::chart::{
    faraday_at, gauge_metric_jet1, invert_metric, weyl_christoffels_jet, ConformalProductChart,
    GaugeChoice,
};
use crate::error::{Error, Result};
use crate::tensor::{Arr4, EndoAtPoint, MetricAtPoint, PointTensor, Slot, TwoFormAtPoint};

/// Full curvature tensor of the Weyl connection at a point, in both the
/// endomorphism-valued and fully lowered forms.
#[derive(Debug, Clone)]
pub struct CurvatureAtPoint {
    n: usize,
    /// R^l_{ijk}, indexed (l, i, j, k).
    mixed: Arr4,
    /// R_{ijkl}, indexed (i, j, k, l).
    lowered: Arr4,
}

impl CurvatureAtPoint {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// g(R(e_i, e_j) e_k, e_l). Conformal weight 2.
    pub fn lowered(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.lowered.get(i, j, k, l)
    }

    /// R^l_{ijk}: the e_l component of R(e_i, e_j) e_k. Weight 0.
    pub fn mixed(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.mixed.get(l, i, j, k)
    }

    /// The endomorphism R(e_i, e_j), as a matrix acting on coordinate
    /// vectors from the left.
    pub fn endo_matrix(&self, i: usize, j: usize) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for l in 0..n {
            for k in 0..n {
                m[(l, k)] = self.mixed.get(l, i, j, k);
            }
        }
        m
    }

    /// The lowered tensor as a weight-2 covariant 4-tensor value.
    pub fn as_point_tensor(&self) -> PointTensor {
        let n = self.n;
        let mut t = PointTensor::zeros(n, vec![Slot::Covariant; 4], 2).expect("arity 4");
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t.set(&[i, j, k, l], self.lowered.get(i, j, k, l));
                    }
                }
            }
        }
        t
    }

    /// Largest violation of antisymmetry in the first index pair; a pure
    /// roundoff diagnostic, the construction is antisymmetric by formula.
    pub fn first_pair_antisymmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst
                            .max((self.lowered.get(i, j, k, l) + self.lowered.get(j, i, k, l)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of the Riemannian pair-exchange symmetry
    /// R_{ijkl} = R_{klij}. Genuinely nonzero for a Weyl connection with
    /// nonvanishing Faraday form.
    pub fn pair_symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst
                            .max((self.lowered.get(i, j, k, l) - self.lowered.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn weyl_curvature_at(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<CurvatureAtPoint> {
    let (gamma, dgamma, jet) = weyl_christoffels_jet(chart, gauge, x)?;
    let n = chart.dim();
    let mut mixed = Arr4::zeros(n);
    for l in 0..n {
        for i in 0..n {
            for j in 0..i {
                for k in 0..n {
                    let mut v = dgamma.get(i, l, j, k) - dgamma.get(j, l, i, k);
                    for m in 0..n {
                        v += gamma.get(l, i, m) * gamma.get(m, j, k)
                            - gamma.get(l, j, m) * gamma.get(m, i, k);
                    }
                    mixed.set(l, i, j, k, v);
                    mixed.set(l, j, i, k, -v);
                }
            }
        }
    }
    let mut lowered = Arr4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = 0.0;
                    for m in 0..n {
                        v += jet.g[(l, m)] * mixed.get(m, i, j, k);
                    }
                    lowered.set(i, j, k, l, v);
                }
            }
        }
    }
    Ok(CurvatureAtPoint { n, mixed, lowered })
}

/// Residual of the exact expression for the failure of pair-exchange
/// symmetry:
///
/// ```text
/// R_{ijkl} - R_{klij} = F_{ik} g_{jl} - F_{il} g_{jk} - F_{jk} g_{il}
///                     + F_{jl} g_{ik} + F_{ij} g_{kl} - F_{kl} g_{ij}
/// ```
///
/// Returns the max-norm difference of the two sides over all index
/// quadruples; it should vanish to roundoff for every chart and gauge.
pub fn symmetry_failure_residual(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<f64> {
    let curv = weyl_curvature_at(chart, gauge, x)?;
    let far = faraday_at(chart, x)?;
    let g = gauge_metric_jet1(chart, gauge, x)?.g;
    let f = far.matrix();
    let n = chart.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = curv.lowered(i, j, k, l) - curv.lowered(k, l, i, j);
                    let rhs = f[(i, k)] * g[(j, l)] - f[(i, l)] * g[(j, k)]
                        - f[(j, k)] * g[(i, l)]
                        + f[(j, l)] * g[(i, k)]
                        + f[(i, j)] * g[(k, l)]
                        - f[(k, l)] * g[(i, j)];
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Frame used for the curvature-trace route to the Ricci tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RicciFrame {
    #[default]
    Cholesky,
    Eigen,
}

/// The (generally non-symmetric) Ricci tensor of the Weyl connection.
#[derive(Debug, Clone)]
pub struct RicciAtPoint {
    m: DMatrix<f64>,
}

impl RicciAtPoint {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        RicciAtPoint { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn symmetric_part(&self) -> DMatrix<f64> {
        (&self.m + self.m.transpose()) * 0.5
    }

    pub fn skew_part(&self) -> DMatrix<f64> {
        (&self.m - self.m.transpose()) * 0.5
    }
}

/// Ricci via the curvature trace in an explicit g-orthonormal frame {e_k}:
///
/// ```text
/// Ric(X, Y) = 1/2 sum_k [ R(X, e_k, e_k, Y) - R(X, e_k, Y, e_k) ]
/// ```
///
/// The frame only enters through sum_k e_k e_k^T, so the result is frame
/// independent; exposing the frame choice gives an internal cross-check.
pub fn ricci_weyl_at_with_frame(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
    frame: RicciFrame,
) -> Result<RicciAtPoint> {
    let curv = weyl_curvature_at(chart, gauge, x)?;
    let g = gauge_metric_jet1(chart, gauge, x)?.g;
    let metric = match MetricAtPoint::new(g, 2) {
        Ok(m) => m,
        Err(Error::NotPositiveDefinite) => {
            return Err(Error::NotPositiveDefiniteAt { point: x.to_vec() })
        }
        Err(e) => return Err(e),
    };
    let e = match frame {
        RicciFrame::Cholesky => metric.orthonormal_frame(),
        RicciFrame::Eigen => metric.eigen_frame(),
    };
    let h = &e * e.transpose();
    let n = chart.dim();
    let mut ric = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += h[(i, j)] * (curv.lowered(p, i, j, q) - curv.lowered(p, i, q, j));
                }
            }
            ric[(p, q)] = 0.5 * acc;
        }
    }
    Ok(RicciAtPoint { m: ric })
}

pub fn ricci_weyl_at(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<RicciAtPoint> {
    ricci_weyl_at_with_frame(chart, gauge, x, RicciFrame::default())
}

/// The curvature acting on a mixed two-form:
///
/// ```text
/// (R(omega))^l_k = 1/2 omega^{ij} R^l_{ijk}
/// ```
///
/// Only forms supported on the mixed block are accepted; for those the
/// action has the closed form [F-sharp, omega-sharp] + <F, omega> Id, which
/// the tests pit against this direct contraction.
pub fn curvature_action_on_form(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
    omega: &TwoFormAtPoint,
) -> Result<EndoAtPoint> {
    let n = chart.dim();
    if omega.dim() != n {
        return Err(Error::DimMismatch(format!(
            "two-form dim {} on a chart of dimension {n}",
            omega.dim()
        )));
    }
    let magnitude = omega.pure_block_magnitude(chart.n1());
    if magnitude > 1e-9 * (1.0 + omega.matrix().amax()) {
        return Err(Error::NotMixedBlock { magnitude });
    }
    let curv = weyl_curvature_at(chart, gauge, x)?;
    let g = gauge_metric_jet1(chart, gauge, x)?.g;
    let ginv = invert_metric(&g, x)?;
    let raised = &ginv * omega.matrix() * &ginv;
    let mut m = DMatrix::zeros(n, n);
    for l in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += raised[(i, j)] * curv.mixed(l, i, j, k);
                }
            }
            m[(l, k)] = 0.5 * acc;
        }
    }
    EndoAtPoint::new(m, omega.weight() - 4)
}
