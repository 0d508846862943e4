//! Pointwise tensor values with conformal-weight bookkeeping.
//!
//! A tensor of weight w rescales by e^{w u} when the gauge metric rescales
//! by e^{2u}. Raising an index through the conformal structure costs -2,
//! lowering costs +2, and weights add under products. Additive operations
//! insist on equal weights; mixing them is a type error in the geometry, so
//! it is an `Error` here.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-10;

/// A positive-definite symmetric bilinear form at a point.
#[derive(Debug, Clone)]
pub struct MetricAtPoint {
    m: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    weight: i32,
}

impl MetricAtPoint {
    /// Accepts a symmetric positive-definite matrix (tolerating roundoff
    /// asymmetry, which is symmetrized away).
    pub fn new(m: DMatrix<f64>, weight: i32) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimMismatch(format!(
                "metric must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        let asymmetry = (&m - m.transpose()).amax();
        if asymmetry > SYM_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let m = (&m + m.transpose()) * 0.5;
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(MetricAtPoint { m, chol, weight })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), 0).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn cholesky_lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Columns form a g-orthonormal basis: E^T g E = Id. This is L^{-T} for
    /// the Cholesky factor L, so it is triangular and cheap.
    pub fn orthonormal_frame(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.chol
            .l()
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor is invertible")
    }

    /// A second, independent g-orthonormal frame: Q diag(1/sqrt(lambda))
    /// from the symmetric eigendecomposition.
    pub fn eigen_frame(&self) -> DMatrix<f64> {
        let eig = self.m.clone().symmetric_eigen();
        let mut frame = eig.eigenvectors;
        for (j, lam) in eig.eigenvalues.iter().enumerate() {
            let s = 1.0 / lam.sqrt();
            for i in 0..frame.nrows() {
                frame[(i, j)] *= s;
            }
        }
        frame
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.m * y)[(0, 0)]
    }
}

/// An antisymmetric bilinear form at a point.
#[derive(Debug, Clone)]
pub struct TwoFormAtPoint {
    m: DMatrix<f64>,
    weight: i32,
}

impl TwoFormAtPoint {
    /// Builds from the strictly lower triangle of `m`; the upper triangle and
    /// diagonal are overwritten to make the result exactly antisymmetric.
    pub fn from_matrix(m: DMatrix<f64>, weight: i32) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimMismatch(format!(
                "two-form must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                out[(i, j)] = m[(i, j)];
                out[(j, i)] = -m[(i, j)];
            }
        }
        Ok(TwoFormAtPoint { m: out, weight })
    }

    pub fn zero(n: usize, weight: i32) -> Self {
        TwoFormAtPoint {
            m: DMatrix::zeros(n, n),
            weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Sets the (i, j) entry and its antisymmetric partner.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j || v == 0.0, "two-form diagonal must stay zero");
        self.m[(i, j)] = v;
        if i != j {
            self.m[(j, i)] = -v;
        }
    }

    pub fn add(&self, other: &TwoFormAtPoint) -> Result<TwoFormAtPoint> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(format!(
                "two-form dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        if self.weight != other.weight {
            return Err(Error::WeightMismatch {
                left: self.weight,
                right: other.weight,
            });
        }
        Ok(TwoFormAtPoint {
            m: &self.m + &other.m,
            weight: self.weight,
        })
    }

    pub fn scale(&self, s: f64) -> TwoFormAtPoint {
        TwoFormAtPoint {
            m: &self.m * s,
            weight: self.weight,
        }
    }

    /// Raises the second slot: the endomorphism A with g(A(z), t) = omega(z, t).
    /// Costs one conformal weight raise (-2).
    pub fn to_endo(&self, g: &MetricAtPoint) -> Result<EndoAtPoint> {
        if self.dim() != g.dim() {
            return Err(Error::DimMismatch(format!(
                "two-form dim {} vs metric dim {}",
                self.dim(),
                g.dim()
            )));
        }
        Ok(EndoAtPoint {
            m: g.inverse() * self.m.transpose(),
            weight: self.weight - 2,
        })
    }

    /// Largest absolute entry outside the off-diagonal (factor-1 x factor-2)
    /// blocks, where the first factor has dimension `n1`.
    pub fn pure_block_magnitude(&self, n1: usize) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let same_factor = (i < n1) == (j < n1);
                if same_factor {
                    worst = worst.max(self.m[(i, j)].abs());
                }
            }
        }
        worst
    }

    pub fn norm(&self, g: &MetricAtPoint) -> Result<f64> {
        Ok(form_inner(self, self, g)?.max(0.0).sqrt())
    }
}

/// An endomorphism of the tangent space at a point.
#[derive(Debug, Clone)]
pub struct EndoAtPoint {
    m: DMatrix<f64>,
    weight: i32,
}

impl EndoAtPoint {
    pub fn new(m: DMatrix<f64>, weight: i32) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimMismatch(format!(
                "endomorphism must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(EndoAtPoint { m, weight })
    }

    pub fn identity(n: usize, weight: i32) -> Self {
        EndoAtPoint {
            m: DMatrix::identity(n, n),
            weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn add(&self, other: &EndoAtPoint) -> Result<EndoAtPoint> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(format!(
                "endomorphism dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        if self.weight != other.weight {
            return Err(Error::WeightMismatch {
                left: self.weight,
                right: other.weight,
            });
        }
        Ok(EndoAtPoint {
            m: &self.m + &other.m,
            weight: self.weight,
        })
    }

    pub fn scale(&self, s: f64) -> EndoAtPoint {
        EndoAtPoint {
            m: &self.m * s,
            weight: self.weight,
        }
    }

    /// Lowers the contravariant slot (+2): beta(z, t) = g(A(z), t).
    pub fn to_two_form(&self, g: &MetricAtPoint) -> Result<TwoFormAtPoint> {
        if self.dim() != g.dim() {
            return Err(Error::DimMismatch(format!(
                "endomorphism dim {} vs metric dim {}",
                self.dim(),
                g.dim()
            )));
        }
        let b = self.m.transpose() * g.matrix();
        TwoFormAtPoint::from_matrix(b, self.weight + 2)
    }

    /// Is gA antisymmetric, i.e. A skew with respect to g?
    pub fn is_g_skew(&self, g: &MetricAtPoint, tol: f64) -> bool {
        let ga = g.matrix() * &self.m;
        let asym = (&ga + ga.transpose()).amax();
        asym <= tol * ga.amax().max(1.0)
    }
}

/// The endomorphism of x wedge y: z maps to g(x, z) y - g(y, z) x.
/// Carries the metric's weight, since one contraction with g is involved.
pub fn wedge_as_endo(
    x: &DVector<f64>,
    y: &DVector<f64>,
    g: &MetricAtPoint,
) -> Result<EndoAtPoint> {
    let n = g.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::DimMismatch(format!(
            "wedge vectors of length {} and {} vs metric dim {n}",
            x.len(),
            y.len()
        )));
    }
    let gx = g.matrix() * x;
    let gy = g.matrix() * y;
    let m = y * gx.transpose() - x * gy.transpose();
    Ok(EndoAtPoint {
        m,
        weight: g.weight(),
    })
}

/// Commutator [a, b] = ab - ba. Weights add.
pub fn two_form_commutator(a: &EndoAtPoint, b: &EndoAtPoint) -> Result<EndoAtPoint> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(format!(
            "commutator dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(EndoAtPoint {
        m: &a.m * &b.m - &b.m * &a.m,
        weight: a.weight + b.weight,
    })
}

/// Pointwise inner product of two-forms: half the full contraction
/// g^{ik} g^{jl} a_{ij} b_{kl}.
pub fn form_inner(a: &TwoFormAtPoint, b: &TwoFormAtPoint, g: &MetricAtPoint) -> Result<f64> {
    let n = g.dim();
    if a.dim() != n || b.dim() != n {
        return Err(Error::DimMismatch(format!(
            "form dims {} and {} vs metric dim {n}",
            a.dim(),
            b.dim()
        )));
    }
    let ginv = g.inverse();
    let raised = &ginv * &a.m * &ginv;
    Ok(0.5 * raised.component_mul(&b.m).sum())
}

/// Variance of a tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Covariant,
    Contravariant,
}

/// Direction of a musical isomorphism applied to one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// A dense tensor value of arity 1 through 4 at a point, with per-slot
/// variance and a conformal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTensor {
    n: usize,
    slots: Vec<Slot>,
    weight: i32,
    data: Vec<f64>,
}

impl PointTensor {
    pub fn new(n: usize, slots: Vec<Slot>, weight: i32, data: Vec<f64>) -> Result<Self> {
        let arity = slots.len();
        if !(1..=4).contains(&arity) {
            return Err(Error::DimMismatch(format!(
                "tensor arity must be 1..=4, got {arity}"
            )));
        }
        let want = n.pow(arity as u32);
        if data.len() != want {
            return Err(Error::DimMismatch(format!(
                "tensor data length {} does not match dim {n} arity {arity} (want {want})",
                data.len()
            )));
        }
        Ok(PointTensor {
            n,
            slots,
            weight,
            data,
        })
    }

    pub fn zeros(n: usize, slots: Vec<Slot>, weight: i32) -> Result<Self> {
        let len = n.pow(slots.len() as u32);
        Self::new(n, slots, weight, vec![0.0; len])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.arity());
        let mut off = 0;
        for &i in idx {
            debug_assert!(i < self.n);
            off = off * self.n + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn add(&self, other: &PointTensor) -> Result<PointTensor> {
        if self.n != other.n || self.slots != other.slots {
            return Err(Error::DimMismatch(
                "tensor shapes or variances differ".into(),
            ));
        }
        if self.weight != other.weight {
            return Err(Error::WeightMismatch {
                left: self.weight,
                right: other.weight,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        PointTensor::new(self.n, self.slots.clone(), self.weight, data)
    }

    pub fn scale(&self, s: f64) -> PointTensor {
        PointTensor {
            n: self.n,
            slots: self.slots.clone(),
            weight: self.weight,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Outer product; weights add, slots concatenate.
    pub fn outer(&self, other: &PointTensor) -> Result<PointTensor> {
        if self.n != other.n {
            return Err(Error::DimMismatch(format!(
                "outer product dims {} vs {}",
                self.n, other.n
            )));
        }
        let arity = self.arity() + other.arity();
        if arity > 4 {
            return Err(Error::DimMismatch(format!(
                "outer product arity {arity} exceeds 4"
            )));
        }
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots);
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        PointTensor::new(self.n, slots, self.weight + other.weight, data)
    }

    /// Raises or lowers one slot through g. Raising contracts with g^{-1}
    /// and shifts the weight by -2; lowering contracts with g and shifts
    /// by +2.
    pub fn raise_lower(
        &self,
        g: &MetricAtPoint,
        slot: usize,
        dir: Direction,
    ) -> Result<PointTensor> {
        let arity = self.arity();
        if slot >= arity {
            return Err(Error::SlotOutOfRange { slot, arity });
        }
        if g.dim() != self.n {
            return Err(Error::DimMismatch(format!(
                "metric dim {} vs tensor dim {}",
                g.dim(),
                self.n
            )));
        }
        let (matrix, new_slot, dweight) = match dir {
            Direction::Up => {
                if self.slots[slot] == Slot::Contravariant {
                    return Err(Error::SlotDirection {
                        slot,
                        direction: "contravariant",
                    });
                }
                (g.inverse(), Slot::Contravariant, -2)
            }
            Direction::Down => {
                if self.slots[slot] == Slot::Covariant {
                    return Err(Error::SlotDirection {
                        slot,
                        direction: "covariant",
                    });
                }
                (g.matrix().clone(), Slot::Covariant, 2)
            }
        };

        let n = self.n;
        let mut slots = self.slots.clone();
        slots[slot] = new_slot;
        let mut out = vec![0.0; self.data.len()];
        // Strides of a row-major layout: slot k has stride n^(arity-1-k).
        let stride = n.pow((arity - 1 - slot) as u32);
        let block = stride * n;
        for base in 0..self.data.len() / block {
            for rem in 0..stride {
                let anchor = base * block + rem;
                for k in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += matrix[(k, m)] * self.data[anchor + m * stride];
                    }
                    out[anchor + k * stride] = acc;
                }
            }
        }
        PointTensor::new(n, slots, self.weight + dweight, out)
    }
}

/// Dense rank-3 array indexed (k, i, j), all axes of size n.
#[derive(Debug, Clone)]
pub(crate) struct Arr3 {
    n: usize,
    d: Vec<f64>,
}

impl Arr3 {
    pub(crate) fn zeros(n: usize) -> Self {
        Arr3 {
            n,
            d: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub(crate) fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.d[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.d[(k * self.n + i) * self.n + j] = v;
    }

    #[inline]
    pub(crate) fn addto(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.d[(k * self.n + i) * self.n + j] += v;
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }
}

/// Dense rank-4 array indexed (m, k, i, j), all axes of size n.
#[derive(Debug, Clone)]
pub(crate) struct Arr4 {
    n: usize,
    d: Vec<f64>,
}

impl Arr4 {
    pub(crate) fn zeros(n: usize) -> Self {
        Arr4 {
            n,
            d: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub(crate) fn get(&self, m: usize, k: usize, i: usize, j: usize) -> f64 {
        self.d[((m * self.n + k) * self.n + i) * self.n + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, m: usize, k: usize, i: usize, j: usize, v: f64) {
        self.d[((m * self.n + k) * self.n + i) * self.n + j] = v;
    }
}
