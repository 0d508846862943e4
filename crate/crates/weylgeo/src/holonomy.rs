//! Restricted holonomy of the adapted connection.
//!
//! Two independent witnesses are built here. The algebraic one spans
//! curvature endomorphisms (optionally transported to a common base point)
//! and closes the span under Lie brackets; a classifier then matches the
//! result against the expected shapes: full `R Id + so(n1) + so(n2)`, the
//! two-dimensional diagonal (complex) subalgebra on 2+2 splits, a
//! sub-conformal algebra with no dilation part, or anything else. The
//! analytic witness is a parallel-transport integrator used to check the
//! same curvature through loop holonomy.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{
    gauge_metric_at, weyl_christoffels_at, ConformalProductChart, GaugeChoice,
};
use crate::curvature::weyl_curvature_at;
use crate::error::{Error, Result};
use crate::tensor::EndoAtPoint;

/// Frobenius inner product; the basis bookkeeping below is all relative to
/// this choice.
fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// An orthonormal basis (trace inner product) of a bracket-closed matrix
/// algebra, together with the rank threshold that produced it.
#[derive(Debug, Clone)]
pub struct LieAlgebraBasis {
    n: usize,
    rank_tol: f64,
    basis: Vec<DMatrix<f64>>,
}

impl LieAlgebraBasis {
    /// Wraps an explicit basis, checking orthonormality. Mostly useful for
    /// feeding hand-built spans to the classifier.
    pub fn new(n: usize, rank_tol: f64, basis: Vec<DMatrix<f64>>) -> Result<Self> {
        for b in &basis {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::DimMismatch(format!(
                    "basis element is {}x{}, ambient dimension {n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        for i in 0..basis.len() {
            for j in 0..=i {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = dot(&basis[i], &basis[j]);
                if (got - want).abs() > 1e-10 {
                    return Err(Error::DimMismatch(format!(
                        "basis not orthonormal: <b{i}, b{j}> = {got}"
                    )));
                }
            }
        }
        Ok(LieAlgebraBasis { n, rank_tol, basis })
    }

    pub fn empty(n: usize, rank_tol: f64) -> Self {
        LieAlgebraBasis { n, rank_tol, basis: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    /// Coefficients of `m` against the basis and the norm of what is left
    /// over after subtracting the projection.
    pub fn project_coeffs(&self, m: &DMatrix<f64>) -> (Vec<f64>, f64) {
        let mut rem = m.clone();
        let mut coeffs = Vec::with_capacity(self.basis.len());
        for b in &self.basis {
            let c = dot(b, &rem);
            rem -= b * c;
            coeffs.push(c);
        }
        // One re-orthogonalization pass; the coefficient corrections are
        // folded back so coeffs stay exact for the returned remainder.
        for (b, c) in self.basis.iter().zip(coeffs.iter_mut()) {
            let c2 = dot(b, &rem);
            rem -= b * c2;
            *c += c2;
        }
        (coeffs, rem.norm())
    }

    /// Whether `m` lies in the span up to `tol` relative to its size.
    pub fn contains(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        let (_, residual) = self.project_coeffs(m);
        residual <= tol * m.norm().max(1.0)
    }

    /// Worst bracket-closure defect over all basis pairs: the span is a Lie
    /// algebra when this is at the rank-threshold scale.
    pub fn closure_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.basis.len() {
            for j in 0..i {
                let br = &self.basis[i] * &self.basis[j] - &self.basis[j] * &self.basis[i];
                let (_, residual) = self.project_coeffs(&br);
                worst = worst.max(residual);
            }
        }
        worst
    }
}

/// Closes the span of `gens` under commutators.
///
/// Worklist algorithm: candidates are orthogonalized against the current
/// basis by modified Gram-Schmidt (re-orthogonalized once) and accepted when
/// the remainder exceeds `rank_tol` times the largest generator norm; each
/// accepted element enqueues its brackets with the whole basis. Terminates
/// when the worklist drains or the span reaches the full matrix algebra.
/// An empty input yields the zero algebra.
pub fn bracket_closure(gens: &[DMatrix<f64>], rank_tol: f64) -> Result<LieAlgebraBasis> {
    if !(rank_tol > 0.0 && rank_tol.is_finite()) {
        return Err(Error::BadStepSize);
    }
    let Some(first) = gens.first() else {
        return Ok(LieAlgebraBasis::empty(0, rank_tol));
    };
    let n = first.nrows();
    let mut scale = 1.0f64;
    for g in gens {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimMismatch(format!(
                "generator is {}x{}, expected {n}x{n}",
                g.nrows(),
                g.ncols()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bracket closure generator".into()));
        }
        scale = scale.max(g.norm());
    }
    let cutoff = rank_tol * scale;
    let cap = n * n;
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    let mut work: Vec<DMatrix<f64>> = gens.to_vec();
    while let Some(cand) = work.pop() {
        let mut rem = cand;
        for b in &basis {
            let c = dot(b, &rem);
            rem -= b * c;
        }
        for b in &basis {
            let c = dot(b, &rem);
            rem -= b * c;
        }
        let norm = rem.norm();
        if norm <= cutoff {
            continue;
        }
        let newb = rem / norm;
        for b in &basis {
            work.push(&newb * b - b * &newb);
        }
        basis.push(newb);
        if basis.len() == cap {
            break; // full matrix algebra, closed by construction
        }
    }
    if basis.is_empty() {
        return Ok(LieAlgebraBasis::empty(n, rank_tol));
    }
    // Final SVD pass: replace the Gram-Schmidt basis with left singular
    // vectors of the stacked span, which evens out accumulated roundoff.
    let d = basis.len();
    let mut stacked = DMatrix::zeros(n * n, d);
    for (k, b) in basis.iter().enumerate() {
        for (idx, v) in b.iter().enumerate() {
            stacked[(idx, k)] = *v;
        }
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let col = u.column(k);
        out.push(DMatrix::from_iterator(n, n, col.iter().copied()));
    }
    LieAlgebraBasis::new(n, rank_tol, out)
}

/// Step-size control for the transport integrator: the RK4 step is this
/// fraction of the total polyline length.
#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    pub step_fraction: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { step_fraction: 1e-3 }
    }
}

fn path_length(path: &[DVector<f64>]) -> f64 {
    path.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Transports `frame` (columns independently) along the polyline with the
/// adapted connection, integrating dA/dt = -Gamma(x(t); dx/dt) A by classic
/// fourth-order Runge-Kutta at a fixed step.
pub fn parallel_transport_with(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    path: &[DVector<f64>],
    frame: &DMatrix<f64>,
    opts: &TransportOptions,
) -> Result<DMatrix<f64>> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    if !(opts.step_fraction > 0.0 && opts.step_fraction.is_finite()) {
        return Err(Error::BadStepSize);
    }
    let n = chart.dim();
    for p in path {
        if p.len() != n {
            return Err(Error::DimMismatch(format!(
                "path point has dimension {}, chart has {n}",
                p.len()
            )));
        }
    }
    if frame.nrows() != n || frame.ncols() != n {
        return Err(Error::DimMismatch(format!(
            "frame is {}x{}, expected {n}x{n}",
            frame.nrows(),
            frame.ncols()
        )));
    }
    let total = path_length(path);
    let mut a = frame.clone();
    if total == 0.0 {
        return Ok(a);
    }
    let h_target = opts.step_fraction * total;
    for w in path.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let seg = q - p;
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        let steps = (len / h_target).ceil().max(1.0) as usize;
        let h = 1.0 / steps as f64;
        // Velocity is constant along the segment, so Gamma contracts with
        // the same direction at every stage.
        let rhs = |s: f64, a: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let x = p + &seg * s;
            let gamma = weyl_christoffels_at(chart, gauge, x.as_slice())?;
            Ok(-(gamma.contract_direction(&seg) * a))
        };
        for k in 0..steps {
            let s = k as f64 * h;
            let k1 = rhs(s, &a)?;
            let k2 = rhs(s + 0.5 * h, &(&a + &k1 * (0.5 * h)))?;
            let k3 = rhs(s + 0.5 * h, &(&a + &k2 * (0.5 * h)))?;
            let k4 = rhs(s + h, &(&a + &k3 * h))?;
            a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parallel transport".into()));
        }
    }
    Ok(a)
}

pub fn parallel_transport(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    path: &[DVector<f64>],
    frame: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    parallel_transport_with(chart, gauge, path, frame, &TransportOptions::default())
}

/// The closed square loop of side `eps` in the (i, j) coordinate plane based
/// at `p`, as a 5-point polyline traversed i-leg first.
pub fn square_loop(p: &[f64], i: usize, j: usize, eps: f64) -> Vec<DVector<f64>> {
    let n = p.len();
    assert!(i < n && j < n && i != j, "loop plane out of range");
    assert!(eps > 0.0, "loop size must be positive");
    let base = DVector::from_column_slice(p);
    let mut ei = DVector::zeros(n);
    ei[i] = eps;
    let mut ej = DVector::zeros(n);
    ej[j] = eps;
    vec![
        base.clone(),
        &base + &ei,
        &base + &ei + &ej,
        &base + &ej,
        base,
    ]
}

/// Curvature endomorphisms R(e_i, e_j) for all coordinate pairs at each
/// sample, conjugated to `base` by parallel transport along the straight
/// segment from the sample. Samples equal to the base are used in place.
pub fn curvature_generators(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    base: &[f64],
    samples: &[DVector<f64>],
) -> Result<Vec<EndoAtPoint>> {
    let n = chart.dim();
    if base.len() != n {
        return Err(Error::DimMismatch(format!(
            "base point has dimension {}, chart has {n}",
            base.len()
        )));
    }
    let base_v = DVector::from_column_slice(base);
    let per_sample = samples
        .par_iter()
        .map(|q| -> Result<Vec<EndoAtPoint>> {
            let curv = weyl_curvature_at(chart, gauge, q.as_slice())?;
            let transport = if (q - &base_v).norm() > 1e-14 {
                // P maps vectors at q to vectors at base; endomorphisms pull
                // back as P R P^{-1}.
                let path = [q.clone(), base_v.clone()];
                let p = parallel_transport(chart, gauge, &path, &DMatrix::identity(n, n))?;
                let p_inv = p
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::NonFinite("transport inverse".into()))?;
                Some((p, p_inv))
            } else {
                None
            };
            let mut out = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in 0..i {
                    let r = curv.endo_matrix(i, j);
                    let m = match &transport {
                        Some((p, p_inv)) => p * &r * p_inv,
                        None => r,
                    };
                    out.push(EndoAtPoint::new(m, 0)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sample.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HolonomyLabel {
    /// Dilations plus both rotation algebras in full: dim 1 + so(n1) + so(n2).
    ReducibleGeneric,
    /// The two-dimensional diagonal algebra on a 2+2 split: dilations plus a
    /// single rotation acting in both factors at once.
    ComplexDiagonal,
    /// No dilation direction: the span sits inside so(n1) + so(n2).
    ClosedReducible,
    Other,
}

impl std::fmt::Display for HolonomyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            HolonomyLabel::ReducibleGeneric => "ReducibleGeneric",
            HolonomyLabel::ComplexDiagonal => "ComplexDiagonal",
            HolonomyLabel::ClosedReducible => "ClosedReducible",
            HolonomyLabel::Other => "Other",
        };
        f.write_str(s)
    }
}

/// Classification outcome: the matched shape, the algebra dimension, how
/// much of the dilation direction the span contains, and a free-form note.
#[derive(Debug, Clone, Serialize)]
pub struct HolonomyClass {
    pub label: HolonomyLabel,
    pub dim: usize,
    pub id_projection: f64,
    pub details: String,
}

const MEMBERSHIP_TOL: f64 = 1e-6;
const ID_PRESENT: f64 = 0.999;

/// Distance from `m` to the model algebra R Id + so(n1) + so(n2), written in
/// an orthonormal frame adapted to the splitting.
fn model_distance(m: &DMatrix<f64>, n1: usize) -> f64 {
    let n = m.nrows();
    let c = m.trace() / n as f64;
    let mut model = DMatrix::from_diagonal_element(n, n, c);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let same_block = (i < n1) == (j < n1);
            if same_block {
                model[(i, j)] += 0.5 * (m[(i, j)] - m[(j, i)]);
            }
        }
    }
    (m - model).norm()
}

/// Matches a bracket-closed algebra, expressed in a splitting-adapted
/// orthonormal frame, against the expected holonomy shapes.
pub fn classify_holonomy(alg: &LieAlgebraBasis, n1: usize, n2: usize) -> HolonomyClass {
    let n = n1 + n2;
    let dim = alg.dim();
    if dim == 0 {
        return HolonomyClass {
            label: HolonomyLabel::ClosedReducible,
            dim: 0,
            id_projection: 0.0,
            details: "zero algebra".into(),
        };
    }
    if alg.ambient_dim() != n {
        return HolonomyClass {
            label: HolonomyLabel::Other,
            dim,
            id_projection: 0.0,
            details: format!(
                "ambient dimension {} does not match split {n1}+{n2}",
                alg.ambient_dim()
            ),
        };
    }
    let id_unit = DMatrix::identity(n, n) / (n as f64).sqrt();
    let id_projection = {
        let (coeffs, _) = alg.project_coeffs(&id_unit);
        coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    };
    for (k, b) in alg.basis().iter().enumerate() {
        let d = model_distance(b, n1);
        if d > MEMBERSHIP_TOL {
            return HolonomyClass {
                label: HolonomyLabel::Other,
                dim,
                id_projection,
                details: format!(
                    "basis element {k} is {d:.3e} away from R Id + so({n1}) + so({n2})"
                ),
            };
        }
    }
    let full = 1 + n1 * (n1 - 1) / 2 + n2 * (n2 - 1) / 2;
    if id_projection < ID_PRESENT {
        return HolonomyClass {
            label: HolonomyLabel::ClosedReducible,
            dim,
            id_projection,
            details: format!("no dilation direction (Id projection {id_projection:.3e})"),
        };
    }
    if dim == full {
        return HolonomyClass {
            label: HolonomyLabel::ReducibleGeneric,
            dim,
            id_projection,
            details: format!("full algebra of dimension {full}"),
        };
    }
    if n1 == 2 && n2 == 2 && dim == 2 {
        // Project the skew parts onto the two block rotations J1, J2. The
        // diagonal case is a single direction with equal weight in both
        // blocks; orientation of either factor is a chart choice, so only
        // magnitudes are compared.
        let mut j1 = DMatrix::zeros(4, 4);
        j1[(0, 1)] = 1.0;
        j1[(1, 0)] = -1.0;
        let mut j2 = DMatrix::zeros(4, 4);
        j2[(2, 3)] = 1.0;
        j2[(3, 2)] = -1.0;
        let sq2 = 2.0f64.sqrt();
        let mut coeff = DMatrix::zeros(2, dim);
        for (k, b) in alg.basis().iter().enumerate() {
            let skew = (b - b.transpose()) * 0.5;
            coeff[(0, k)] = dot(&j1, &skew) / sq2;
            coeff[(1, k)] = dot(&j2, &skew) / sq2;
        }
        let svd = coeff.clone().svd(true, false);
        let s0 = svd.singular_values[0];
        let s1 = svd.singular_values[1];
        let u = svd.u.as_ref().expect("u requested");
        let balanced = (u[(0, 0)].abs() - u[(1, 0)].abs()).abs() <= MEMBERSHIP_TOL;
        if s0 > MEMBERSHIP_TOL && s1 <= MEMBERSHIP_TOL * s0 && balanced {
            return HolonomyClass {
                label: HolonomyLabel::ComplexDiagonal,
                dim,
                id_projection,
                details: format!(
                    "diagonal rotation direction ({:.4}, {:.4})",
                    u[(0, 0)],
                    u[(1, 0)]
                ),
            };
        }
    }
    HolonomyClass {
        label: HolonomyLabel::Other,
        dim,
        id_projection,
        details: format!("inside R Id + so({n1}) + so({n2}) with dimension {dim} of {full}"),
    }
}

/// A closed holonomy algebra together with its classification.
#[derive(Debug, Clone)]
pub struct HolonomyAnalysis {
    pub algebra: LieAlgebraBasis,
    pub classification: HolonomyClass,
}

/// Curvature generators at `base` (plus transported contributions from
/// `samples`) expressed in a g-orthonormal frame adapted to the splitting,
/// the representation the classifier expects.
pub fn framed_curvature_generators(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    base: &[f64],
    samples: &[DVector<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    let g = gauge_metric_at(chart, gauge, base)?;
    // Columns of E are a g-orthonormal frame; the Cholesky factor of a
    // block metric is block lower-triangular, so E respects the splitting.
    let e = g.orthonormal_frame();
    let e_inv = g.cholesky_lower().transpose();
    let mut all = vec![DVector::from_column_slice(base)];
    all.extend_from_slice(samples);
    let gens = curvature_generators(chart, gauge, base, &all)?;
    Ok(gens.iter().map(|endo| &e_inv * endo.matrix() * &e).collect())
}

/// End-to-end pipeline: framed curvature generators (single-point mode when
/// `samples` is empty), bracket closure, classification.
pub fn holonomy_algebra_at(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    base: &[f64],
    samples: &[DVector<f64>],
    rank_tol: f64,
) -> Result<HolonomyAnalysis> {
    let framed = framed_curvature_generators(chart, gauge, base, samples)?;
    let algebra = bracket_closure(&framed, rank_tol)?;
    let classification = classify_holonomy(&algebra, chart.n1(), chart.n2());
    Ok(HolonomyAnalysis { algebra, classification })
}
