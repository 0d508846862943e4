//! Conformal product charts and the adapted Weyl connection.
//!
//! A chart is a box in R^{n1+n2} with coordinates x1..x{n1} on the first
//! factor and x{n1+1}..x{n1+n2} on the second, carrying the gauge metric
//!
//! ```text
//! g = e^{2u} (g1 + e^{2f} g2)
//! ```
//!
//! where g1 depends only on first-factor coordinates, g2 only on
//! second-factor coordinates, f is the warp field, and u is a gauge choice
//! (zero by default). The Weyl connection D is the unique torsion-free
//! connection with Dg = -2 theta (x) g preserving both tangent
//! distributions; its Lee form in this gauge is theta = -d1 f - du, where
//! d1 is the first-factor part of the differential.
//!
//! All jets are assembled numerically from exact 2-jets of the ingredient
//! fields, so charts whose warp lives on a grid go through the same code
//! path as symbolic ones.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::interp::CubicGridField;
use crate::tensor::{Arr3, Arr4, MetricAtPoint, TwoFormAtPoint};

/// Value, gradient, and symmetric Hessian of a scalar quantity at a point.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub v: f64,
    pub d: DVector<f64>,
    pub d2: DMatrix<f64>,
}

impl Jet2 {
    pub fn constant(c: f64, n: usize) -> Self {
        Jet2 {
            v: c,
            d: DVector::zeros(n),
            d2: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            d: &self.d + &o.d,
            d2: &self.d2 + &o.d2,
        }
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        Jet2 {
            v: self.v * s,
            d: &self.d * s,
            d2: &self.d2 * s,
        }
    }

    /// Leibniz product.
    pub fn mul(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d: &self.d * o.v + &o.d * self.v,
            d2: &self.d2 * o.v
                + &o.d2 * self.v
                + &self.d * o.d.transpose()
                + &o.d * self.d.transpose(),
        }
    }

    /// Jet of e^{value}.
    pub fn exp(&self) -> Jet2 {
        let w = self.v.exp();
        Jet2 {
            v: w,
            d: &self.d * w,
            d2: (&self.d2 + &self.d * self.d.transpose()) * w,
        }
    }
}

/// Value and gradient only; the cheap jet for first-order work like
/// parallel transport, where second derivatives are never needed.
#[derive(Debug, Clone)]
pub struct Jet1 {
    pub v: f64,
    pub d: DVector<f64>,
}

impl Jet1 {
    pub fn constant(c: f64, n: usize) -> Self {
        Jet1 {
            v: c,
            d: DVector::zeros(n),
        }
    }

    pub fn add(&self, o: &Jet1) -> Jet1 {
        Jet1 {
            v: self.v + o.v,
            d: &self.d + &o.d,
        }
    }

    pub fn scale(&self, s: f64) -> Jet1 {
        Jet1 {
            v: self.v * s,
            d: &self.d * s,
        }
    }

    pub fn mul(&self, o: &Jet1) -> Jet1 {
        Jet1 {
            v: self.v * o.v,
            d: &self.d * o.v + &o.d * self.v,
        }
    }

    pub fn exp(&self) -> Jet1 {
        let w = self.v.exp();
        Jet1 {
            v: w,
            d: &self.d * w,
        }
    }
}

/// Exact symbolic 2-jet of a scalar field: the field plus cached derivative
/// expressions, evaluated on demand.
#[derive(Debug, Clone)]
struct Jet2Field {
    v: ScalarField,
    d: Vec<ScalarField>,
    /// d2[i][j - i] = the (i, j) second partial, j >= i (0-based).
    d2: Vec<Vec<ScalarField>>,
}

impl Jet2Field {
    fn new(f: &ScalarField) -> Self {
        let n = f.nvars();
        let d: Vec<ScalarField> = (1..=n).map(|i| f.diff(i)).collect();
        let d2 = (0..n)
            .map(|i| (i..n).map(|j| d[i].diff(j + 1)).collect())
            .collect();
        Jet2Field {
            v: f.clone(),
            d,
            d2,
        }
    }

    fn nvars(&self) -> usize {
        self.v.nvars()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.v.eval(x)
    }

    fn jet1(&self, x: &[f64]) -> Result<Jet1> {
        let n = self.nvars();
        let v = self.v.eval(x)?;
        let mut d = DVector::zeros(n);
        for i in 0..n {
            d[i] = self.d[i].eval(x)?;
        }
        Ok(Jet1 { v, d })
    }

    fn jet2(&self, x: &[f64]) -> Result<Jet2> {
        let n = self.nvars();
        let Jet1 { v, d } = self.jet1(x)?;
        let mut d2 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let val = self.d2[i][j - i].eval(x)?;
                d2[(i, j)] = val;
                d2[(j, i)] = val;
            }
        }
        Ok(Jet2 { v, d, d2 })
    }
}

/// The warp field f: either a closed-form expression or interpolated grid
/// values. Both provide exact 2-jets of what they actually represent.
#[derive(Debug, Clone)]
pub struct WarpField {
    kind: WarpKind,
}

#[derive(Debug, Clone)]
enum WarpKind {
    Symbolic(Jet2Field),
    Grid(CubicGridField),
}

impl WarpField {
    pub fn symbolic(f: ScalarField) -> Self {
        WarpField {
            kind: WarpKind::Symbolic(Jet2Field::new(&f)),
        }
    }

    pub fn parse(src: &str, nvars: usize) -> Result<Self> {
        Ok(Self::symbolic(ScalarField::parse(src, nvars)?))
    }

    pub fn from_grid(grid: CubicGridField) -> Self {
        WarpField {
            kind: WarpKind::Grid(grid),
        }
    }

    pub fn nvars(&self) -> usize {
        match &self.kind {
            WarpKind::Symbolic(j) => j.nvars(),
            WarpKind::Grid(_) => 4,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            WarpKind::Symbolic(j) => j.value(x),
            WarpKind::Grid(g) => g.value(x),
        }
    }

    pub fn jet2(&self, x: &[f64]) -> Result<Jet2> {
        match &self.kind {
            WarpKind::Symbolic(j) => j.jet2(x),
            WarpKind::Grid(g) => {
                let (v, grad, hess) = g.jet2(x)?;
                let d = DVector::from_column_slice(&grad);
                let mut d2 = DMatrix::zeros(4, 4);
                for a in 0..4 {
                    for b in 0..4 {
                        d2[(a, b)] = hess[a][b];
                    }
                }
                Ok(Jet2 { v, d, d2 })
            }
        }
    }

    pub(crate) fn jet1(&self, x: &[f64]) -> Result<Jet1> {
        match &self.kind {
            WarpKind::Symbolic(j) => j.jet1(x),
            WarpKind::Grid(g) => {
                let (v, grad, _) = g.jet2(x)?;
                Ok(Jet1 {
                    v,
                    d: DVector::from_column_slice(&grad),
                })
            }
        }
    }

    /// The expression, when the warp is symbolic.
    pub fn expr(&self) -> Option<&ScalarField> {
        match &self.kind {
            WarpKind::Symbolic(j) => Some(&j.v),
            WarpKind::Grid(_) => None,
        }
    }

    /// Syntactic dependence for symbolic warps; grid warps are treated as
    /// depending on every coordinate.
    pub fn depends_on(&self, var: usize) -> bool {
        match &self.kind {
            WarpKind::Symbolic(j) => j.v.depends_on(var),
            WarpKind::Grid(_) => true,
        }
    }
}

/// Choice of gauge: the conformal factor e^{2u} applied to the whole metric.
/// The default gauge is u = 0.
#[derive(Debug, Clone, Default)]
pub struct GaugeChoice {
    u: Option<Jet2Field>,
}

impl GaugeChoice {
    pub fn default_gauge() -> Self {
        GaugeChoice::default()
    }

    pub fn new(u: ScalarField) -> Self {
        GaugeChoice {
            u: Some(Jet2Field::new(&u)),
        }
    }

    pub fn field(&self) -> Option<&ScalarField> {
        self.u.as_ref().map(|j| &j.v)
    }

    pub fn is_default(&self) -> bool {
        self.u.is_none()
    }

    fn check_nvars(&self, n: usize) -> Result<()> {
        if let Some(j) = &self.u {
            if j.nvars() != n {
                return Err(Error::DimMismatch(format!(
                    "gauge field over {} variables on a chart of dimension {n}",
                    j.nvars()
                )));
            }
        }
        Ok(())
    }

    fn jet2(&self, x: &[f64], n: usize) -> Result<Jet2> {
        self.check_nvars(n)?;
        match &self.u {
            None => Ok(Jet2::constant(0.0, n)),
            Some(j) => j.jet2(x),
        }
    }

    fn jet1(&self, x: &[f64], n: usize) -> Result<Jet1> {
        self.check_nvars(n)?;
        match &self.u {
            None => Ok(Jet1::constant(0.0, n)),
            Some(j) => j.jet1(x),
        }
    }
}

/// A conformal product chart.
#[derive(Debug, Clone)]
pub struct ConformalProductChart {
    n1: usize,
    n2: usize,
    g1: Vec<Vec<ScalarField>>,
    g2: Vec<Vec<ScalarField>>,
    g1_jets: Vec<Vec<Jet2Field>>,
    g2_jets: Vec<Vec<Jet2Field>>,
    f: WarpField,
}

impl ConformalProductChart {
    pub fn new(
        n1: usize,
        n2: usize,
        g1: Vec<Vec<ScalarField>>,
        g2: Vec<Vec<ScalarField>>,
        f: WarpField,
    ) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidChart(
                "both factors need positive dimension".into(),
            ));
        }
        let n = n1 + n2;
        if f.nvars() != n {
            return Err(Error::DimMismatch(format!(
                "warp field over {} variables on a chart of dimension {n}",
                f.nvars()
            )));
        }
        validate_block("g1", &g1, n1, n, 1..=n1)?;
        validate_block("g2", &g2, n2, n, (n1 + 1)..=n)?;
        let g1_jets = block_jets(&g1);
        let g2_jets = block_jets(&g2);
        Ok(ConformalProductChart {
            n1,
            n2,
            g1,
            g2,
            g1_jets,
            g2_jets,
            f,
        })
    }

    /// Both factor blocks Euclidean.
    pub fn flat(n1: usize, n2: usize, f: WarpField) -> Result<Self> {
        let n = n1 + n2;
        let ident = |k: usize| -> Vec<Vec<ScalarField>> {
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| ScalarField::constant(if i == j { 1.0 } else { 0.0 }, n))
                        .collect()
                })
                .collect()
        };
        Self::new(n1, n2, ident(n1), ident(n2), f)
    }

    /// Flat factors with a symbolic warp, the common test-rig chart.
    pub fn flat_symbolic(n1: usize, n2: usize, f_src: &str) -> Result<Self> {
        let f = WarpField::parse(f_src, n1 + n2)?;
        Self::flat(n1, n2, f)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn warp(&self) -> &WarpField {
        &self.f
    }

    pub fn factor_block(&self, second: bool) -> &Vec<Vec<ScalarField>> {
        if second {
            &self.g2
        } else {
            &self.g1
        }
    }

    /// Loads a chart plus optional gauge from JSON:
    ///
    /// ```json
    /// {
    ///   "n1": 2, "n2": 2,
    ///   "g1": "flat",
    ///   "g2": [["1+x3^2", "0"], ["0", "1"]],
    ///   "f": "x1*x3",
    ///   "gauge": "0.1*x1"
    /// }
    /// ```
    ///
    /// A block is either the string `"flat"` or a full matrix of
    /// expressions. `gauge` is optional and defaults to u = 0.
    pub fn from_json_str(s: &str) -> Result<(Self, GaugeChoice)> {
        let doc: ChartDoc = serde_json::from_str(s)?;
        let n = doc
            .n1
            .checked_add(doc.n2)
            .ok_or_else(|| Error::InvalidChart("factor dimensions overflow".into()))?;
        if doc.n1 == 0 || doc.n2 == 0 {
            return Err(Error::InvalidChart(
                "both factors need positive dimension".into(),
            ));
        }
        let g1 = doc.g1.into_fields("g1", doc.n1, n)?;
        let g2 = doc.g2.into_fields("g2", doc.n2, n)?;
        let f = WarpField::parse(&doc.f, n)?;
        let chart = Self::new(doc.n1, doc.n2, g1, g2, f)?;
        let gauge = match doc.gauge {
            None => GaugeChoice::default_gauge(),
            Some(src) => GaugeChoice::new(ScalarField::parse(&src, n)?),
        };
        Ok((chart, gauge))
    }

    pub fn from_json_file(path: &Path) -> Result<(Self, GaugeChoice)> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Factor-block 2-jets in factor-local index ranges, together with the
    /// warp jet, for the frozen-factor curvature computations.
    pub(crate) fn factor_data(&self, second: bool, x: &[f64]) -> Result<FactorJets> {
        let (jets, lo, nf) = if second {
            (&self.g2_jets, self.n1, self.n2)
        } else {
            (&self.g1_jets, 0, self.n1)
        };
        let mut g = DMatrix::zeros(nf, nf);
        let mut dg = vec![DMatrix::zeros(nf, nf); nf];
        let mut d2g = vec![vec![DMatrix::zeros(nf, nf); nf]; nf];
        for r in 0..nf {
            for c in 0..nf {
                let jet = jets[r][c].jet2(x)?;
                g[(r, c)] = jet.v;
                for a in 0..nf {
                    dg[a][(r, c)] = jet.d[lo + a];
                    for b in 0..nf {
                        d2g[a][b][(r, c)] = jet.d2[(lo + a, lo + b)];
                    }
                }
            }
        }
        let fj_full = self.f.jet2(x)?;
        let mut fd = DVector::zeros(nf);
        let mut fd2 = DMatrix::zeros(nf, nf);
        for a in 0..nf {
            fd[a] = fj_full.d[lo + a];
            for b in 0..nf {
                fd2[(a, b)] = fj_full.d2[(lo + a, lo + b)];
            }
        }
        Ok(FactorJets {
            g,
            dg,
            d2g,
            f: Jet2 {
                v: fj_full.v,
                d: fd,
                d2: fd2,
            },
        })
    }
}

/// Factor-local metric jets plus the warp restricted to that factor.
pub(crate) struct FactorJets {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub d2g: Vec<Vec<DMatrix<f64>>>,
    pub f: Jet2,
}

fn block_jets(block: &[Vec<ScalarField>]) -> Vec<Vec<Jet2Field>> {
    block
        .iter()
        .map(|row| row.iter().map(Jet2Field::new).collect())
        .collect()
}

fn validate_block(
    name: &str,
    block: &[Vec<ScalarField>],
    k: usize,
    n: usize,
    allowed: std::ops::RangeInclusive<usize>,
) -> Result<()> {
    if block.len() != k || block.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidChart(format!(
            "block `{name}` must be {k}x{k}"
        )));
    }
    for (i, row) in block.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            if entry.nvars() != n {
                return Err(Error::DimMismatch(format!(
                    "block `{name}` entry ({i},{j}) is over {} variables, chart has {n}",
                    entry.nvars()
                )));
            }
            for var in 1..=n {
                if !allowed.contains(&var) && entry.depends_on(var) {
                    return Err(Error::FactorDependence {
                        field: format!("{name}[{i}][{j}]"),
                        allowed: format!("x{}..x{}", allowed.start(), allowed.end()),
                        var,
                    });
                }
            }
            if j > i && block[j][i] != *entry {
                return Err(Error::BlockNotSymmetric {
                    field: name.to_string(),
                    i,
                    j,
                });
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartDoc {
    n1: usize,
    n2: usize,
    g1: BlockDoc,
    g2: BlockDoc,
    f: String,
    #[serde(default)]
    gauge: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BlockDoc {
    Name(String),
    Rows(Vec<Vec<String>>),
}

impl BlockDoc {
    fn into_fields(self, name: &str, k: usize, n: usize) -> Result<Vec<Vec<ScalarField>>> {
        match self {
            BlockDoc::Name(s) if s == "flat" => Ok((0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| ScalarField::constant(if i == j { 1.0 } else { 0.0 }, n))
                        .collect()
                })
                .collect()),
            BlockDoc::Name(s) => Err(Error::InvalidChart(format!(
                "block `{name}`: unknown shorthand `{s}` (only \"flat\")"
            ))),
            BlockDoc::Rows(rows) => rows
                .into_iter()
                .map(|row| row.iter().map(|src| ScalarField::parse(src, n)).collect())
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Metric, Lee form, connection
// ---------------------------------------------------------------------------

/// Gauge metric and its first derivatives at a point.
pub(crate) struct MetricJet1 {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
}

/// Gauge metric with first and second derivatives at a point.
pub(crate) struct MetricJet2 {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    /// d2g[l][m], symmetric in (l, m).
    pub d2g: Vec<Vec<DMatrix<f64>>>,
}

fn component_jets(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<Vec<Vec<Jet2>>> {
    let n = chart.dim();
    if x.len() != n {
        return Err(Error::DimMismatch(format!(
            "point of dimension {} on a chart of dimension {n}",
            x.len()
        )));
    }
    let fj = chart.f.jet2(x)?;
    let uj = gauge.jet2(x, n)?;
    let conf1 = uj.scale(2.0).exp();
    let conf2 = uj.add(&fj).scale(2.0).exp();

    let mut comp: Vec<Vec<Option<Jet2>>> = (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
    for a in 0..chart.n1 {
        for b in 0..chart.n1 {
            let jet = chart.g1_jets[a][b].jet2(x)?;
            comp[a][b] = Some(conf1.mul(&jet));
        }
    }
    for i in 0..chart.n2 {
        for j in 0..chart.n2 {
            let jet = chart.g2_jets[i][j].jet2(x)?;
            comp[chart.n1 + i][chart.n1 + j] = Some(conf2.mul(&jet));
        }
    }
    let zero = Jet2::constant(0.0, n);
    Ok(comp
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| c.unwrap_or_else(|| zero.clone()))
                .collect()
        })
        .collect())
}

pub(crate) fn gauge_metric_jet2(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<MetricJet2> {
    let n = chart.dim();
    let comp = component_jets(chart, gauge, x)?;
    let mut g = DMatrix::zeros(n, n);
    let mut dg = vec![DMatrix::zeros(n, n); n];
    let mut d2g = vec![vec![DMatrix::zeros(n, n); n]; n];
    for r in 0..n {
        for c in 0..n {
            let jet = &comp[r][c];
            g[(r, c)] = jet.v;
            for m in 0..n {
                dg[m][(r, c)] = jet.d[m];
                for l in 0..n {
                    d2g[l][m][(r, c)] = jet.d2[(l, m)];
                }
            }
        }
    }
    Ok(MetricJet2 { g, dg, d2g })
}

/// First-order metric jet along the cheap path: no second-derivative
/// expressions are evaluated. Parallel transport lives on this.
pub(crate) fn gauge_metric_jet1(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<MetricJet1> {
    let n = chart.dim();
    if x.len() != n {
        return Err(Error::DimMismatch(format!(
            "point of dimension {} on a chart of dimension {n}",
            x.len()
        )));
    }
    let fj = chart.f.jet1(x)?;
    let uj = gauge.jet1(x, n)?;
    let conf1 = uj.scale(2.0).exp();
    let conf2 = uj.add(&fj).scale(2.0).exp();

    let mut g = DMatrix::zeros(n, n);
    let mut dg = vec![DMatrix::zeros(n, n); n];
    let mut put = |r: usize, c: usize, jet: &Jet1| {
        g[(r, c)] = jet.v;
        for m in 0..n {
            dg[m][(r, c)] = jet.d[m];
        }
    };
    for a in 0..chart.n1 {
        for b in 0..chart.n1 {
            let jet = conf1.mul(&chart.g1_jets[a][b].jet1(x)?);
            put(a, b, &jet);
        }
    }
    for i in 0..chart.n2 {
        for j in 0..chart.n2 {
            let jet = conf2.mul(&chart.g2_jets[i][j].jet1(x)?);
            put(chart.n1 + i, chart.n1 + j, &jet);
        }
    }
    Ok(MetricJet1 { g, dg })
}

/// The gauge metric as a quadratic form at a point. Weight 2: it scales by
/// e^{2u} under change of gauge.
pub fn gauge_metric_at(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<MetricAtPoint> {
    let MetricJet1 { g, .. } = gauge_metric_jet1(chart, gauge, x)?;
    match MetricAtPoint::new(g, 2) {
        Ok(m) => Ok(m),
        Err(Error::NotPositiveDefinite) => Err(Error::NotPositiveDefiniteAt {
            point: x.to_vec(),
        }),
        Err(e) => Err(e),
    }
}

/// The Lee form of the adapted Weyl connection in the given gauge.
#[derive(Debug, Clone)]
pub struct LeeFormAtPoint {
    components: DVector<f64>,
}

impl LeeFormAtPoint {
    pub fn components(&self) -> &DVector<f64> {
        &self.components
    }

    /// One-forms are weight 0 in this bookkeeping; the raised vector
    /// theta-sharp picks up weight -2 through `PointTensor::raise_lower`.
    pub fn weight(&self) -> i32 {
        0
    }
}

/// theta = -d1 f - du: first-factor warp gradient plus the gauge gradient.
pub fn adapted_lee_form_at(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<LeeFormAtPoint> {
    Ok(LeeFormAtPoint {
        components: lee_form_components(chart, gauge, x)?,
    })
}

/// theta without its derivatives, along the cheap first-order path.
pub(crate) fn lee_form_components(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<DVector<f64>> {
    let n = chart.dim();
    if x.len() != n {
        return Err(Error::DimMismatch(format!(
            "point of dimension {} on a chart of dimension {n}",
            x.len()
        )));
    }
    let fj = chart.f.jet1(x)?;
    let uj = gauge.jet1(x, n)?;
    let mut theta = DVector::zeros(n);
    for k in 0..n {
        let from_f = if k < chart.n1 { fj.d[k] } else { 0.0 };
        theta[k] = -from_f - uj.d[k];
    }
    Ok(theta)
}

/// theta and its derivative matrix dtheta[(m, k)] = d_m theta_k.
pub(crate) fn lee_form_jet(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = chart.dim();
    if x.len() != n {
        return Err(Error::DimMismatch(format!(
            "point of dimension {} on a chart of dimension {n}",
            x.len()
        )));
    }
    let fj = chart.f.jet2(x)?;
    let uj = gauge.jet2(x, n)?;
    let mut theta = DVector::zeros(n);
    let mut dtheta = DMatrix::zeros(n, n);
    for k in 0..n {
        let from_f = if k < chart.n1 { fj.d[k] } else { 0.0 };
        theta[k] = -from_f - uj.d[k];
        for m in 0..n {
            let from_f2 = if k < chart.n1 { fj.d2[(m, k)] } else { 0.0 };
            dtheta[(m, k)] = -from_f2 - uj.d2[(m, k)];
        }
    }
    Ok((theta, dtheta))
}

/// Christoffel symbols of the Weyl connection at a point.
#[derive(Debug, Clone)]
pub struct WeylChristoffels {
    vals: Arr3,
}

impl WeylChristoffels {
    pub fn dim(&self) -> usize {
        self.vals.dim()
    }

    /// Gamma^k_{ij}.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.vals.get(k, i, j)
    }

    /// Matrix M^k_j = v^i Gamma^k_{ij}, the connection contracted with a
    /// direction: the generator of parallel transport along v.
    pub fn contract_direction(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += v[i] * self.vals.get(k, i, j);
                }
                m[(k, j)] = acc;
            }
        }
        m
    }
}

/// Levi-Civita symbols from a metric 1-jet.
pub(crate) fn lc_christoffels(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Arr3 {
    let n = ginv.nrows();
    let mut out = Arr3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..=i {
                let mut acc = 0.0;
                for l in 0..n {
                    let a = dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)];
                    acc += ginv[(k, l)] * a;
                }
                let v = 0.5 * acc;
                out.set(k, i, j, v);
                out.set(k, j, i, v);
            }
        }
    }
    out
}

/// Adds the Lee-form terms that turn Levi-Civita symbols into the Weyl
/// connection: theta_i delta^k_j + theta_j delta^k_i - g_{ij} theta^k.
pub(crate) fn weyl_from_lc(
    mut lc: Arr3,
    theta: &DVector<f64>,
    g: &DMatrix<f64>,
    ginv: &DMatrix<f64>,
) -> Arr3 {
    let n = lc.dim();
    let theta_up = ginv * theta;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = -g[(i, j)] * theta_up[k];
                if k == j {
                    v += theta[i];
                }
                if k == i {
                    v += theta[j];
                }
                lc.addto(k, i, j, v);
            }
        }
    }
    lc
}

pub fn weyl_christoffels_at(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<WeylChristoffels> {
    let MetricJet1 { g, dg } = gauge_metric_jet1(chart, gauge, x)?;
    let ginv = invert_metric(&g, x)?;
    let theta = lee_form_components(chart, gauge, x)?;
    let lc = lc_christoffels(&ginv, &dg);
    Ok(WeylChristoffels {
        vals: weyl_from_lc(lc, &theta, &g, &ginv),
    })
}

/// Weyl symbols and their coordinate derivatives:
/// returns (Gamma, dGamma) with dGamma(m, k, i, j) = d_m Gamma^k_{ij}.
pub(crate) fn weyl_christoffels_jet(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<(Arr3, Arr4, MetricJet2)> {
    let jet = gauge_metric_jet2(chart, gauge, x)?;
    let (theta, dtheta) = lee_form_jet(chart, gauge, x)?;
    let n = chart.dim();
    let ginv = invert_metric(&jet.g, x)?;

    // dginv[m] = -ginv dg[m] ginv
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|m| -(&ginv * &jet.dg[m] * &ginv)).collect();

    let lc = lc_christoffels(&ginv, &jet.dg);
    let gamma = weyl_from_lc(lc, &theta, &jet.g, &ginv);

    let theta_up = &ginv * &theta;
    // dtheta_up[(m, k)] = d_m theta^k
    let mut dtheta_up = DMatrix::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += dginv[m][(k, l)] * theta[l] + ginv[(k, l)] * dtheta[(m, l)];
            }
            dtheta_up[(m, k)] = acc;
        }
    }

    let mut dgamma = Arr4::zeros(n);
    for m in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..=i {
                    let mut acc = 0.0;
                    for l in 0..n {
                        let a = jet.dg[i][(j, l)] + jet.dg[j][(i, l)] - jet.dg[l][(i, j)];
                        let da = jet.d2g[m][i][(j, l)] + jet.d2g[m][j][(i, l)]
                            - jet.d2g[m][l][(i, j)];
                        acc += dginv[m][(k, l)] * a + ginv[(k, l)] * da;
                    }
                    let mut v = 0.5 * acc;
                    // Weyl terms.
                    if k == j {
                        v += dtheta[(m, i)];
                    }
                    if k == i {
                        v += dtheta[(m, j)];
                    }
                    v -= jet.dg[m][(i, j)] * theta_up[k] + jet.g[(i, j)] * dtheta_up[(m, k)];
                    dgamma.set(m, k, i, j, v);
                    if i != j {
                        dgamma.set(m, k, j, i, v);
                    }
                }
            }
        }
    }
    Ok((gamma, dgamma, jet))
}

pub(crate) fn invert_metric(g: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(g.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefiniteAt { point: x.to_vec() })
}

/// The Faraday two-form F = d theta. Pure-factor blocks vanish; the mixed
/// block is the mixed Hessian of the warp: F_{ai} = d_a d_i f for a in the
/// first factor, i in the second. Gauge-independent.
pub fn faraday_at(chart: &ConformalProductChart, x: &[f64]) -> Result<TwoFormAtPoint> {
    let n = chart.dim();
    if x.len() != n {
        return Err(Error::DimMismatch(format!(
            "point of dimension {} on a chart of dimension {n}",
            x.len()
        )));
    }
    let fj = chart.f.jet2(x)?;
    let mut m = DMatrix::zeros(n, n);
    for i in chart.n1..n {
        for a in 0..chart.n1 {
            // Strictly-lower-triangle entry (i, a), i > a: F_{ia} = -f_{ai}.
            m[(i, a)] = -fj.d2[(a, i)];
        }
    }
    TwoFormAtPoint::from_matrix(m, 0)
}

/// Residual of the connection's defining property against the gauge metric,
/// D g = -2 theta (x) g: the max over (m, i, j) of
///
/// ```text
/// | d_m g_{ij} - Gamma^l_{mi} g_{lj} - Gamma^l_{mj} g_{il} + 2 theta_m g_{ij} |
/// ```
///
/// Vanishes to roundoff for every chart, gauge, and point.
pub fn metric_compatibility_residual(
    chart: &ConformalProductChart,
    gauge: &GaugeChoice,
    x: &[f64],
) -> Result<f64> {
    let jet = gauge_metric_jet1(chart, gauge, x)?;
    let theta = lee_form_components(chart, gauge, x)?;
    let gamma = weyl_christoffels_at(chart, gauge, x)?;
    let n = chart.dim();
    let mut worst = 0.0f64;
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut r = jet.dg[m][(i, j)] + 2.0 * theta[m] * jet.g[(i, j)];
                for l in 0..n {
                    r -= gamma.get(l, m, i) * jet.g[(l, j)] + gamma.get(l, m, j) * jet.g[(i, l)];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toda::TodaGrid;

    fn pt(coords: &[f64]) -> Vec<f64> {
        coords.to_vec()
    }

    fn curved_23() -> ConformalProductChart {
        // Curved factor blocks with a mixed warp; exercises every term.
        let n = 5;
        let parse = |s: &str| ScalarField::parse(s, n).unwrap();
        let g1 = vec![
            vec![parse("1 + 0.25*x2^2"), parse("0.1*x1*x2")],
            vec![parse("0.1*x1*x2"), parse("1 + 0.25*x1^2")],
        ];
        let g2 = vec![
            vec![parse("1 + 0.2*x4^2"), parse("0.05*x3*x4"), parse("0")],
            vec![parse("0.05*x3*x4"), parse("1 + 0.1*x3^2"), parse("0.02*x5")],
            vec![parse("0"), parse("0.02*x5"), parse("1 + 0.15*x5^2")],
        ];
        let f = WarpField::parse("x1*x3 + 0.2*sin(x2)*x5", n).unwrap();
        ConformalProductChart::new(2, 3, g1, g2, f).unwrap()
    }

    fn nontrivial_gauge(n: usize) -> GaugeChoice {
        let src = match n {
            4 => "0.2*x1 + 0.3*x4",
            5 => "0.2*x1 + 0.3*x4 - 0.1*x5",
            _ => unreachable!(),
        };
        GaugeChoice::new(ScalarField::parse(src, n).unwrap())
    }

    #[test]
    fn lee_form_matches_hand_computation() {
        // (1,1) chart, f = x1*x2: theta = (-x2, 0) in the default gauge.
        let chart = ConformalProductChart::flat_symbolic(1, 1, "x1*x2").unwrap();
        let gauge = GaugeChoice::default_gauge();
        let theta = adapted_lee_form_at(&chart, &gauge, &pt(&[0.7, 1.3])).unwrap();
        assert!((theta.components()[0] - (-1.3)).abs() < 1e-15);
        assert!(theta.components()[1].abs() < 1e-15);
    }

    #[test]
    fn lee_form_obeys_the_gauge_transformation_law() {
        let chart = curved_23();
        let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
        let base = adapted_lee_form_at(&chart, &GaugeChoice::default_gauge(), &x).unwrap();
        let u = ScalarField::parse("0.2*x1 + 0.3*x4 - 0.1*x5", 5).unwrap();
        let gauged = adapted_lee_form_at(&chart, &GaugeChoice::new(u.clone()), &x).unwrap();
        for k in 0..5 {
            let du_k = u.diff(k + 1).eval(&x).unwrap();
            let want = base.components()[k] - du_k;
            assert!((gauged.components()[k] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn metric_assembles_the_three_blocks() {
        let chart = ConformalProductChart::flat_symbolic(2, 2, "x1*x3").unwrap();
        let x = pt(&[0.5, 0.0, 0.8, 0.0]);
        let g = gauge_metric_at(&chart, &GaugeChoice::default_gauge(), &x).unwrap();
        let e2f = (2.0f64 * 0.5 * 0.8).exp();
        let m = g.matrix();
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((m[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((m[(2, 2)] - e2f).abs() < 1e-12);
        assert!((m[(3, 3)] - e2f).abs() < 1e-12);
        assert!(m[(0, 2)].abs() < 1e-15);
        assert_eq!(g.weight(), 2);
    }

    #[test]
    fn metric_jets_match_finite_differences() {
        let chart = curved_23();
        let gauge = nontrivial_gauge(5);
        let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
        let jet = gauge_metric_jet2(&chart, &gauge, &x).unwrap();
        let h = 1e-5;
        for m in 0..5 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[m] += h;
            lo[m] -= h;
            let ghi = gauge_metric_jet1(&chart, &gauge, &hi).unwrap().g;
            let glo = gauge_metric_jet1(&chart, &gauge, &lo).unwrap().g;
            let fd = (ghi - glo) / (2.0 * h);
            assert!(
                (&fd - &jet.dg[m]).amax() < 1e-8,
                "dg[{m}] mismatch: {:.3e}",
                (&fd - &jet.dg[m]).amax()
            );
            // Second derivatives against first-derivative differences.
            let dghi = gauge_metric_jet1(&chart, &gauge, &hi).unwrap().dg;
            let dglo = gauge_metric_jet1(&chart, &gauge, &lo).unwrap().dg;
            for l in 0..5 {
                let fd2 = (&dghi[l] - &dglo[l]) / (2.0 * h);
                assert!(
                    (&fd2 - &jet.d2g[m][l]).amax() < 1e-7,
                    "d2g[{m}][{l}] mismatch"
                );
            }
        }
    }

    #[test]
    fn connection_is_torsion_free_and_metric_compatible() {
        // Dg = -2 theta (x) g, i.e.
        // d_m g_{ij} - Gamma^l_{mi} g_{lj} - Gamma^l_{mj} g_{il} = -2 theta_m g_{ij}.
        let chart = curved_23();
        for gauge in [GaugeChoice::default_gauge(), nontrivial_gauge(5)] {
            let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
            let jet = gauge_metric_jet2(&chart, &gauge, &x).unwrap();
            let gamma = weyl_christoffels_at(&chart, &gauge, &x).unwrap();
            let (theta, _) = lee_form_jet(&chart, &gauge, &x).unwrap();
            for k in 0..5 {
                for i in 0..5 {
                    for j in 0..5 {
                        assert!(
                            (gamma.get(k, i, j) - gamma.get(k, j, i)).abs() < 1e-12,
                            "torsion at ({k},{i},{j})"
                        );
                    }
                }
            }
            for m in 0..5 {
                for i in 0..5 {
                    for j in 0..5 {
                        let mut cov = jet.dg[m][(i, j)];
                        for l in 0..5 {
                            cov -= gamma.get(l, m, i) * jet.g[(l, j)]
                                + gamma.get(l, m, j) * jet.g[(i, l)];
                        }
                        let want = -2.0 * theta[m] * jet.g[(i, j)];
                        assert!(
                            (cov - want).abs() < 1e-11,
                            "compatibility at ({m},{i},{j}): {cov} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn compatibility_residual_is_roundoff_small() {
        let chart = curved_23();
        for gauge in [GaugeChoice::default_gauge(), nontrivial_gauge(5)] {
            let r =
                metric_compatibility_residual(&chart, &gauge, &[0.4, -0.3, 0.8, 0.2, -0.6])
                    .unwrap();
            assert!(r < 1e-11, "residual {r:.3e}");
        }
    }

    #[test]
    fn connection_preserves_both_distributions() {
        let chart = curved_23();
        let gauge = nontrivial_gauge(5);
        let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
        let gamma = weyl_christoffels_at(&chart, &gauge, &x).unwrap();
        let n1 = 2;
        for m in 0..5 {
            for a in 0..n1 {
                for i in n1..5 {
                    assert!(
                        gamma.get(i, m, a).abs() < 1e-12,
                        "first factor leaks: Gamma^{i}_{m}{a}"
                    );
                    assert!(
                        gamma.get(a, m, i).abs() < 1e-12,
                        "second factor leaks: Gamma^{a}_{m}{i}"
                    );
                }
            }
        }
    }

    #[test]
    fn connection_is_gauge_independent() {
        let chart = curved_23();
        let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
        let a = weyl_christoffels_at(&chart, &GaugeChoice::default_gauge(), &x).unwrap();
        let b = weyl_christoffels_at(&chart, &nontrivial_gauge(5), &x).unwrap();
        for k in 0..5 {
            for i in 0..5 {
                for j in 0..5 {
                    assert!(
                        (a.get(k, i, j) - b.get(k, i, j)).abs() < 1e-12,
                        "gauge dependence at ({k},{i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn christoffel_derivatives_match_finite_differences() {
        let chart = curved_23();
        let gauge = nontrivial_gauge(5);
        let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
        let (_, dgamma, _) = weyl_christoffels_jet(&chart, &gauge, &x).unwrap();
        let h = 1e-5;
        for m in 0..5 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[m] += h;
            lo[m] -= h;
            let ga = weyl_christoffels_at(&chart, &gauge, &hi).unwrap();
            let gb = weyl_christoffels_at(&chart, &gauge, &lo).unwrap();
            for k in 0..5 {
                for i in 0..5 {
                    for j in 0..5 {
                        let fd = (ga.get(k, i, j) - gb.get(k, i, j)) / (2.0 * h);
                        let an = dgamma.get(m, k, i, j);
                        assert!(
                            (fd - an).abs() < 1e-7 * (1.0 + an.abs()),
                            "dGamma({m},{k},{i},{j}): fd {fd} vs {an}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hand_computed_weyl_symbols_on_the_plane() {
        // (1,1) chart, f = x1*x2, default gauge: the only nonzero symbols
        // are Gamma^1_{11} = -x2 and Gamma^2_{22} = x1.
        let chart = ConformalProductChart::flat_symbolic(1, 1, "x1*x2").unwrap();
        let gauge = GaugeChoice::default_gauge();
        let (x1, x2) = (0.7, -1.1);
        let gamma = weyl_christoffels_at(&chart, &gauge, &pt(&[x1, x2])).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let want = match (k, i, j) {
                        (0, 0, 0) => -x2,
                        (1, 1, 1) => x1,
                        _ => 0.0,
                    };
                    assert!(
                        (gamma.get(k, i, j) - want).abs() < 1e-13,
                        "Gamma^{k}_{i}{j}"
                    );
                }
            }
        }
    }

    #[test]
    fn faraday_is_the_mixed_warp_hessian_and_is_gauge_free() {
        let chart = curved_23();
        let x = pt(&[0.4, -0.3, 0.8, 0.2, -0.6]);
        let f = faraday_at(&chart, &x).unwrap();
        assert_eq!(f.weight(), 0);
        // d_a d_i (x1*x3 + 0.2 sin(x2) x5)
        let f13 = 1.0;
        let f25 = 0.2 * (-0.3f64).cos();
        assert!((f.get(0, 2) - f13).abs() < 1e-14);
        assert!((f.get(1, 4) - f25).abs() < 1e-14);
        assert!((f.get(2, 0) + f13).abs() < 1e-14);
        assert!(f.pure_block_magnitude(2) == 0.0);
        // dtheta for a gauged Lee form still has the same antisymmetric part.
        let (_, dth) = lee_form_jet(&chart, &nontrivial_gauge(5), &x).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let exterior = dth[(i, j)] - dth[(j, i)];
                assert!(
                    (exterior - f.get(i, j)).abs() < 1e-12,
                    "dtheta vs faraday at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn grid_backed_warp_matches_its_symbolic_twin() {
        // Bilinear warps are reproduced exactly by the interpolant, so the
        // whole pipeline must agree with the symbolic chart to roundoff.
        let n = 9;
        let h = 1.0 / (n - 1) as f64;
        let mut grid = TodaGrid::new([n; 4], [h; 4], [0.0; 4]).unwrap();
        grid.fill_from(&ScalarField::parse("0.4*x1*x3 + 0.2*x2*x4", 4).unwrap())
            .unwrap();
        let gridded = ConformalProductChart::flat(
            2,
            2,
            WarpField::from_grid(CubicGridField::new(grid)),
        )
        .unwrap();
        let symbolic =
            ConformalProductChart::flat_symbolic(2, 2, "0.4*x1*x3 + 0.2*x2*x4").unwrap();
        let gauge = GaugeChoice::default_gauge();
        for x in [[0.31, 0.62, 0.55, 0.4], [0.5, 0.5, 0.5, 0.5]] {
            let ga = weyl_christoffels_at(&gridded, &gauge, &x).unwrap();
            let gb = weyl_christoffels_at(&symbolic, &gauge, &x).unwrap();
            for k in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        assert!(
                            (ga.get(k, i, j) - gb.get(k, i, j)).abs() < 1e-10,
                            "grid vs symbolic Gamma^{k}_{i}{j} at {x:?}"
                        );
                    }
                }
            }
            let fa = faraday_at(&gridded, &x).unwrap();
            let fb = faraday_at(&symbolic, &x).unwrap();
            assert!((fa.matrix() - fb.matrix()).amax() < 1e-10);
        }
    }

    #[test]
    fn json_charts_load_with_flat_shorthand_and_gauge() {
        let doc = r#"{
            "n1": 2, "n2": 2,
            "g1": "flat",
            "g2": [["1+x3^2", "0"], ["0", "1"]],
            "f": "x1*x3",
            "gauge": "0.1*x1"
        }"#;
        let (chart, gauge) = ConformalProductChart::from_json_str(doc).unwrap();
        assert_eq!((chart.n1(), chart.n2()), (2, 2));
        assert!(!gauge.is_default());
        let x = [0.3, 0.1, 0.5, -0.2];
        let g = gauge_metric_at(&chart, &gauge, &x).unwrap();
        // g2 entry (0,0): e^{2u} e^{2f} (1 + x3^2)
        let want = (0.2f64 * 0.3).exp() * (2.0f64 * 0.15).exp() * 1.25;
        assert!((g.matrix()[(2, 2)] - want).abs() < 1e-12);
    }

    #[test]
    fn json_chart_validation_errors_are_specific() {
        let nonsym = r#"{"n1":1,"n2":1,"g1":[["1"]],"g2":[["1"]],"f":"x1*x2"}"#;
        assert!(ConformalProductChart::from_json_str(nonsym).is_ok());

        let bad_block = r#"{"n1":2,"n2":1,"g1":[["1","x1"],["0","1"]],"g2":[["1"]],"f":"x1*x3"}"#;
        assert!(matches!(
            ConformalProductChart::from_json_str(bad_block),
            Err(Error::BlockNotSymmetric { i: 0, j: 1, .. })
        ));

        let leaky = r#"{"n1":1,"n2":1,"g1":[["1+x2^2"]],"g2":[["1"]],"f":"x1*x2"}"#;
        assert!(matches!(
            ConformalProductChart::from_json_str(leaky),
            Err(Error::FactorDependence { var: 2, .. })
        ));

        let unknown = r#"{"n1":1,"n2":1,"g1":"euclidean","g2":"flat","f":"x1*x2"}"#;
        assert!(matches!(
            ConformalProductChart::from_json_str(unknown),
            Err(Error::InvalidChart(_))
        ));

        let malformed = r#"{"n1":1,"n2":1,"g1":"flat""#;
        assert!(matches!(
            ConformalProductChart::from_json_str(malformed),
            Err(Error::Json(_))
        ));

        let bad_expr = r#"{"n1":1,"n2":1,"g1":"flat","g2":"flat","f":"x1**x2"}"#;
        assert!(matches!(
            ConformalProductChart::from_json_str(bad_expr),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn degenerate_metric_points_are_reported() {
        // g1 entry vanishes at x1 = 1.
        let doc = r#"{"n1":1,"n2":1,"g1":[["1-x1^2"]],"g2":"flat","f":"x1*x2"}"#;
        let (chart, gauge) = ConformalProductChart::from_json_str(doc).unwrap();
        assert!(matches!(
            gauge_metric_at(&chart, &gauge, &[1.0, 0.5]),
            Err(Error::NotPositiveDefiniteAt { .. })
        ));
        assert!(gauge_metric_at(&chart, &gauge, &[0.5, 0.5]).is_ok());
    }
}
