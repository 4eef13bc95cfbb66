//! Bilinear (Q1) finite elements on the grid cells, linear (P1) in one
//! dimension, with 2-point Gauss quadrature per axis and nodal coefficients
//! interpolated to the quadrature points.

use super::CsrMatrix;
use crate::field::{lambda_min_field, ScalarField};
use crate::problems::EllipticProblem;
use crate::{Real, Result};

/// Stiffness system on the interior nodes.
#[derive(Clone, Debug)]
pub struct Assembled<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// Grid node of each unknown.
    pub nodes: Vec<usize>,
}

impl<T: Real> Assembled<T> {
    /// Scatters an interior solution vector into a nodal field with zero boundary values.
    pub fn embed(&self, problem: &EllipticProblem<T>, x: &[T]) -> ScalarField<T> {
        let mut u = ScalarField::zeros(*problem.grid());
        for (&n, &v) in self.nodes.iter().zip(x) {
            u.values_mut()[n] = v;
        }
        u
    }
}

fn gauss2<T: Real>() -> [T; 2] {
    let d = T::lit(0.5) / T::lit(3.0).sqrt();
    [T::lit(0.5) - d, T::lit(0.5) + d]
}

pub fn assemble_elliptic<T: Real>(problem: &EllipticProblem<T>) -> Result<Assembled<T>> {
    lambda_min_field(&problem.a)?;
    let grid = *problem.grid();
    let m = grid.nodes_per_axis();
    let mut unknown = vec![usize::MAX; grid.len()];
    let mut nodes = Vec::new();
    for (n, slot) in unknown.iter_mut().enumerate() {
        if !grid.is_boundary(n) {
            *slot = nodes.len();
            nodes.push(n);
        }
    }
    let mut rhs = vec![T::zero(); nodes.len()];
    let mut triplets = Vec::new();
    let g = gauss2::<T>();
    let h = grid.spacing(0);
    let half = T::lit(0.5);
    let b_sq = problem.b_sq.values();
    let f = problem.f.values();

    if grid.spatial_dim() == 1 {
        let a = problem.a.a11().values();
        for i in 0..m - 1 {
            let cell = [i, i + 1];
            let mut k = [[T::zero(); 2]; 2];
            let mut r = [T::zero(); 2];
            for &xi in &g {
                let phi = [T::one() - xi, xi];
                let dphi = [-T::one() / h, T::one() / h];
                let w = half * h;
                let at = |v: &[T]| phi[0] * v[cell[0]] + phi[1] * v[cell[1]];
                let (aq, bq, fq) = (at(a), at(b_sq), at(f));
                for p in 0..2 {
                    r[p] += w * fq * phi[p];
                    for q in 0..2 {
                        k[p][q] += w * (aq * dphi[p] * dphi[q] + bq * phi[p] * phi[q]);
                    }
                }
            }
            scatter(&cell, &k, &r, &unknown, &mut triplets, &mut rhs);
        }
    } else {
        let (a11, a12, a22) = (
            problem.a.a11().values(),
            problem.a.a12().expect("2D tensor").values(),
            problem.a.a22().expect("2D tensor").values(),
        );
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                let cell = [grid.flat([i, j]), grid.flat([i + 1, j]), grid.flat([i, j + 1]), grid.flat([i + 1, j + 1])];
                let mut k = [[T::zero(); 4]; 4];
                let mut r = [T::zero(); 4];
                for &xi in &g {
                    for &eta in &g {
                        let (ox, oy) = (T::one() - xi, T::one() - eta);
                        let phi = [ox * oy, xi * oy, ox * eta, xi * eta];
                        let dx = [-oy / h, oy / h, -eta / h, eta / h];
                        let dy = [-ox / h, -xi / h, ox / h, xi / h];
                        let w = half * half * h * h;
                        let at = |v: &[T]| (0..4).fold(T::zero(), |s, c| s + phi[c] * v[cell[c]]);
                        let (q11, q12, q22, bq, fq) = (at(a11), at(a12), at(a22), at(b_sq), at(f));
                        for p in 0..4 {
                            r[p] += w * fq * phi[p];
                            for q in 0..4 {
                                let flux = dx[p] * (q11 * dx[q] + q12 * dy[q]) + dy[p] * (q12 * dx[q] + q22 * dy[q]);
                                k[p][q] += w * (flux + bq * phi[p] * phi[q]);
                            }
                        }
                    }
                }
                scatter(&cell, &k, &r, &unknown, &mut triplets, &mut rhs);
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(nodes.len(), &triplets, true)?;
    Ok(Assembled { matrix, rhs, nodes })
}

fn scatter<T: Real, const K: usize>(
    cell: &[usize; K],
    k: &[[T; K]; K],
    r: &[T; K],
    unknown: &[usize],
    triplets: &mut Vec<(usize, usize, T)>,
    rhs: &mut [T],
) {
    for p in 0..K {
        let up = unknown[cell[p]];
        if up == usize::MAX {
            continue;
        }
        rhs[up] += r[p];
        for q in 0..K {
            let uq = unknown[cell[q]];
            if uq != usize::MAX {
                triplets.push((up, uq, if p <= q { k[p][q] } else { k[q][p] }));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{SpdTensorField, TensorGrid};
    use crate::problems::{manufactured_poisson, Family};

    #[test]
    fn one_d_laplacian_stencil() {
        let g = TensorGrid::<f64>::interval(3).unwrap();
        let p = manufactured_poisson(g).unwrap();
        let s = assemble_elliptic(&p).unwrap();
        let h = 1.0 / 8.0;
        assert_eq!(s.matrix.dim(), 7);
        for r in 1..6 {
            let row: Vec<(usize, f64)> = s.matrix.row(r).collect();
            assert_eq!(row.len(), 3);
            assert!((row[0].1 + 1.0 / h).abs() < 1e-12);
            assert!((row[1].1 - 2.0 / h).abs() < 1e-12);
            assert!((row[2].1 + 1.0 / h).abs() < 1e-12);
        }
    }

    #[test]
    fn assembly_is_exactly_symmetric() {
        let g = TensorGrid::<f64>::square(4).unwrap();
        let p = crate::problems::gen_elliptic_2d(Family::SmoothB, crate::problems::SampleKey::new(1, 1), g).unwrap();
        let s = assemble_elliptic(&p).unwrap();
        assert_eq!(s.matrix.max_asymmetry(), 0.0);
    }

    #[test]
    fn reaction_adds_mass_with_row_sum_c_h_squared() {
        let g = TensorGrid::<f64>::square(4).unwrap();
        let c = 3.0;
        let base = EllipticProblem::new(
            SpdTensorField::identity(g),
            ScalarField::zeros(g),
            ScalarField::zeros(g),
            None,
            Family::Poisson,
            None,
        )
        .unwrap();
        let with_b = EllipticProblem { b_sq: ScalarField::constant(g, c), ..base.clone() };
        let k0 = assemble_elliptic(&base).unwrap();
        let k1 = assemble_elliptic(&with_b).unwrap();
        let h = 1.0 / 16.0;
        let m = g.nodes_per_axis();
        for (r, &node) in k0.nodes.iter().enumerate() {
            let [i, j] = g.unflat(node);
            if i < 2 || j < 2 || i > m - 3 || j > m - 3 {
                continue;
            }
            let sum: f64 = k1.matrix.row(r).map(|(_, v)| v).sum::<f64>() - k0.matrix.row(r).map(|(_, v)| v).sum::<f64>();
            assert!((sum - c * h * h).abs() < 1e-14, "row {r}: {sum}");
        }
    }
}
