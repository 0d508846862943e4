//! Tensor-product cubic Hermite interpolation of grid values, with exact
//! derivatives of the interpolant through second order.
//!
//! Slopes at the nodes come from second-order difference stencils (central
//! in the interior, one-sided at the edges), which makes the interpolant C1
//! across cell faces and exact on polynomials of per-axis degree <= 2. The
//! second derivative of a piecewise cubic jumps at cell faces; queries on a
//! face use the cell to the right (left for the last node), so jets are
//! well-defined everywhere on the closed box.

use crate::error::{Error, Result};
use crate::toda::TodaGrid;

/// Up to three (index, coefficient) pairs of a nodal slope stencil.
type Stencil = ([(usize, f64); 3], usize);

#[derive(Debug, Clone)]
pub struct CubicGridField {
    grid: TodaGrid,
}

/// Per-axis interpolation weights over a window of at most 4 nodes
/// starting at `base`: weights for the value, d/dx, and d2/dx2.
struct AxisWeights {
    base: usize,
    len: usize,
    w: [f64; 4],
    w1: [f64; 4],
    w2: [f64; 4],
}

fn slope_stencil(m: usize, count: usize, h: f64) -> Stencil {
    let inv2h = 1.0 / (2.0 * h);
    if m > 0 && m + 1 < count {
        ([(m - 1, -inv2h), (m + 1, inv2h), (0, 0.0)], 2)
    } else if m == 0 {
        if count >= 3 {
            ([(0, -3.0 * inv2h), (1, 4.0 * inv2h), (2, -inv2h)], 3)
        } else {
            ([(0, -1.0 / h), (1, 1.0 / h), (0, 0.0)], 2)
        }
    } else if count >= 3 {
        (
            [
                (m, 3.0 * inv2h),
                (m - 1, -4.0 * inv2h),
                (m - 2, inv2h),
            ],
            3,
        )
    } else {
        ([(m, 1.0 / h), (m - 1, -1.0 / h), (0, 0.0)], 2)
    }
}

fn axis_weights(x: f64, origin: f64, h: f64, count: usize) -> Result<AxisWeights> {
    let span = (count - 1) as f64 * h;
    let hi = origin + span;
    let eps = 1e-9 * (1.0 + span.abs() + origin.abs().max(hi.abs()));
    if !(x >= origin - eps && x <= hi + eps) {
        return Err(Error::OutOfDomain { point: vec![x] });
    }
    let raw = (x - origin) / h;
    let cell = (raw.floor() as isize).clamp(0, count as isize - 2) as usize;
    let t = raw - cell as f64;

    // Hermite basis and its first two t-derivatives.
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let g00 = 6.0 * t2 - 6.0 * t;
    let g10 = 3.0 * t2 - 4.0 * t + 1.0;
    let g01 = -6.0 * t2 + 6.0 * t;
    let g11 = 3.0 * t2 - 2.0 * t;
    let q00 = 12.0 * t - 6.0;
    let q10 = 6.0 * t - 4.0;
    let q01 = -12.0 * t + 6.0;
    let q11 = 6.0 * t - 2.0;

    let len = count.min(4);
    let base = (cell as isize - 1).clamp(0, (count - len) as isize) as usize;
    let mut out = AxisWeights {
        base,
        len,
        w: [0.0; 4],
        w1: [0.0; 4],
        w2: [0.0; 4],
    };

    let mut add = |idx: usize, v: f64, d1: f64, d2: f64| {
        let k = idx - base;
        debug_assert!(k < len);
        out.w[k] += v;
        out.w1[k] += d1;
        out.w2[k] += d2;
    };

    let (inv_h, inv_h2) = (1.0 / h, 1.0 / (h * h));
    add(cell, h00, g00 * inv_h, q00 * inv_h2);
    add(cell + 1, h01, g01 * inv_h, q01 * inv_h2);
    for (node, basis, dbasis, ddbasis) in [(cell, h10, g10, q10), (cell + 1, h11, g11, q11)] {
        let (entries, k) = slope_stencil(node, count, h);
        for &(idx, coef) in &entries[..k] {
            // The slope enters multiplied by h, the basis derivatives by 1/h.
            add(idx, h * basis * coef, dbasis * coef, ddbasis * coef * inv_h);
        }
    }
    Ok(out)
}

impl CubicGridField {
    pub fn new(grid: TodaGrid) -> Self {
        CubicGridField { grid }
    }

    pub fn grid(&self) -> &TodaGrid {
        &self.grid
    }

    fn weights(&self, x: &[f64]) -> Result<[AxisWeights; 4]> {
        if x.len() != 4 {
            return Err(Error::DimMismatch(format!(
                "grid field takes 4 coordinates, got {}",
                x.len()
            )));
        }
        let shape = self.grid.shape();
        let spacing = self.grid.spacing();
        let origin = self.grid.origin();
        let mk = |a: usize| axis_weights(x[a], origin[a], spacing[a], shape[a]);
        let ws = [mk(0)?, mk(1)?, mk(2)?, mk(3)?];
        // A per-axis domain failure only knows its own coordinate; rewrap
        // with the full point for a useful message.
        Ok(ws)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet2(x)?.0)
    }

    /// Value, gradient, and (symmetric) Hessian of the interpolant.
    pub fn jet2(&self, x: &[f64]) -> Result<(f64, [f64; 4], [[f64; 4]; 4])> {
        let ws = match self.weights(x) {
            Ok(ws) => ws,
            Err(Error::OutOfDomain { .. }) => {
                return Err(Error::OutOfDomain { point: x.to_vec() })
            }
            Err(e) => return Err(e),
        };
        let mut val = 0.0;
        let mut grad = [0.0; 4];
        let mut hess = [[0.0; 4]; 4];
        for k0 in 0..ws[0].len {
            for k1 in 0..ws[1].len {
                for k2 in 0..ws[2].len {
                    for k3 in 0..ws[3].len {
                        let f = self.grid.get([
                            ws[0].base + k0,
                            ws[1].base + k1,
                            ws[2].base + k2,
                            ws[3].base + k3,
                        ]);
                        if f == 0.0 {
                            continue;
                        }
                        let k = [k0, k1, k2, k3];
                        let w = [ws[0].w[k0], ws[1].w[k1], ws[2].w[k2], ws[3].w[k3]];
                        val += f * w[0] * w[1] * w[2] * w[3];
                        for a in 0..4 {
                            let mut p = f * ws[a].w1[k[a]];
                            for b in 0..4 {
                                if b != a {
                                    p *= w[b];
                                }
                            }
                            grad[a] += p;
                            for bb in a..4 {
                                let mut q = if bb == a {
                                    f * ws[a].w2[k[a]]
                                } else {
                                    f * ws[a].w1[k[a]] * ws[bb].w1[k[bb]]
                                };
                                for c in 0..4 {
                                    if c != a && c != bb {
                                        q *= w[c];
                                    }
                                }
                                hess[a][bb] += q;
                            }
                        }
                    }
                }
            }
        }
        for a in 0..4 {
            for b in 0..a {
                hess[a][b] = hess[b][a];
            }
        }
        Ok((val, grad, hess))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarField;

    fn grid_from(expr: &str, n: usize) -> CubicGridField {
        let h = 1.0 / (n - 1) as f64;
        let mut grid = TodaGrid::new([n; 4], [h; 4], [0.0; 4]).unwrap();
        grid.fill_from(&ScalarField::parse(expr, 4).unwrap()).unwrap();
        CubicGridField::new(grid)
    }

    fn check_jet(
        field: &CubicGridField,
        f: &ScalarField,
        x: &[f64; 4],
        tol: f64,
    ) {
        let (v, grad, hess) = field.jet2(x).unwrap();
        let want = f.eval(x).unwrap();
        assert!((v - want).abs() < tol, "value at {x:?}: {v} vs {want}");
        for a in 0..4 {
            let da = f.diff(a + 1);
            let wg = da.eval(x).unwrap();
            assert!(
                (grad[a] - wg).abs() < tol,
                "grad[{a}] at {x:?}: {} vs {wg}",
                grad[a]
            );
            for b in 0..4 {
                let wh = da.diff(b + 1).eval(x).unwrap();
                assert!(
                    (hess[a][b] - wh).abs() < tol,
                    "hess[{a}][{b}] at {x:?}: {} vs {wh}",
                    hess[a][b]
                );
            }
        }
    }

    #[test]
    fn interpolates_nodal_values_exactly() {
        let field = grid_from("sin(x1)*x3 + x2^2 - x4", 5);
        let g = field.grid().clone();
        for idx in [[0, 0, 0, 0], [2, 1, 3, 4], [4, 4, 4, 4], [1, 2, 0, 3]] {
            let p = g.node_point(idx);
            let v = field.value(&p).unwrap();
            assert!((v - g.get(idx)).abs() < 1e-13);
        }
    }

    #[test]
    fn reproduces_bilinear_data_with_exact_jets() {
        let f = ScalarField::parse("0.3*x1*x3 - 0.7*x2*x4 + 0.2*x1", 4).unwrap();
        let field = grid_from("0.3*x1*x3 - 0.7*x2*x4 + 0.2*x1", 5);
        for x in [
            [0.5, 0.5, 0.5, 0.5],
            [0.13, 0.41, 0.77, 0.95],
            [0.0, 1.0, 0.33, 0.6],
        ] {
            check_jet(&field, &f, &x, 1e-12);
        }
    }

    #[test]
    fn reproduces_per_axis_quadratics_with_exact_jets() {
        let src = "(x1-0.3)^2 + 2*x3^2 - x2 + x2*x4 + x1*x2 - 0.5*x4^2";
        let f = ScalarField::parse(src, 4).unwrap();
        let field = grid_from(src, 6);
        for x in [
            [0.5, 0.5, 0.5, 0.5],
            [0.05, 0.92, 0.5, 0.18], // inside edge cells: one-sided slopes
            [1.0, 0.0, 1.0, 0.44],   // corner values
        ] {
            check_jet(&field, &f, &x, 1e-11);
        }
    }

    #[test]
    fn approximates_smooth_fields_to_stencil_order() {
        let src = "sin(x1)*cos(x3) + exp(0.5*x2)*x4";
        let f = ScalarField::parse(src, 4).unwrap();
        let coarse = grid_from(src, 6);
        let fine = grid_from(src, 11);
        let x = [0.47, 0.53, 0.61, 0.39];
        let err = |field: &CubicGridField| (field.value(&x).unwrap() - f.eval(&x).unwrap()).abs();
        let (ec, ef) = (err(&coarse), err(&fine));
        assert!(ec < 1e-3, "coarse error {ec}");
        // Halving h should cut the error by roughly 2^3 for the value; be
        // generous and only demand a factor of 4 to keep the test stable.
        assert!(ef < ec / 4.0, "no decay: coarse {ec}, fine {ef}");
    }

    #[test]
    fn is_c1_across_cell_faces() {
        let field = grid_from("exp(x1)*sin(x2) + x3^2*x4", 5);
        // The face x1 = 0.25 separates cells 0 and 1.
        let below = [0.25 - 1e-9, 0.4, 0.6, 0.7];
        let above = [0.25 + 1e-9, 0.4, 0.6, 0.7];
        let (vb, gb, _) = field.jet2(&below).unwrap();
        let (va, ga, _) = field.jet2(&above).unwrap();
        assert!((vb - va).abs() < 1e-7);
        for a in 0..4 {
            assert!((gb[a] - ga[a]).abs() < 1e-6, "grad[{a}] jumps");
        }
    }

    #[test]
    fn rejects_points_outside_the_box() {
        let field = grid_from("x1", 4);
        assert!(matches!(
            field.value(&[1.5, 0.5, 0.5, 0.5]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            field.value(&[0.5, -0.2, 0.5, 0.5]),
            Err(Error::OutOfDomain { .. })
        ));
        // Boundary itself is inside.
        assert!(field.value(&[1.0, 0.0, 1.0, 0.5]).is_ok());
    }
}
