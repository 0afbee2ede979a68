//! Brute-force reference assemblies used to verify the matrix-free code.
//!
//! Everything here evaluates the weak forms pointwise with fresh quadrature
//! and never touches the tensor-product blocks, so agreement with the
//! matrix-free operators is an independent check. Dense; small meshes only.

use crate::basis::{NodalBasis1D, QuadratureRule};
use crate::dense::{DenseMatrix, LuFactors};
use crate::error::Result;
use crate::localops::IpParams;
use crate::mesh::Mesh;

/// Tensor multi-index of local dof `i` (axis 0 fastest).
fn multi_index(i: usize, n1: usize, dim: usize) -> [usize; 3] {
    let mut idx = [0; 3];
    let mut rest = i;
    for x in idx.iter_mut().take(dim) {
        *x = rest % n1;
        rest /= n1;
    }
    idx
}

/// Value and gradient of every basis function of a cell at reference point `xi`.
fn eval_cell(basis: &NodalBasis1D, dim: usize, h: f64, xi: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let n1 = basis.len();
    let nc = n1.pow(dim as u32);
    let vals: Vec<Vec<f64>> = xi.iter().map(|&x| basis.eval_all(x)).collect();
    let ders: Vec<Vec<f64>> = xi.iter().map(|&x| basis.eval_derivative_all(x)).collect();
    let mut v = Vec::with_capacity(nc);
    let mut g = Vec::with_capacity(nc);
    for i in 0..nc {
        let idx = multi_index(i, n1, dim);
        let mut value = 1.0;
        let mut grad = [1.0; 3];
        for a in 0..dim {
            value *= vals[a][idx[a]];
            for (b, gb) in grad.iter_mut().enumerate().take(dim) {
                *gb *= if a == b { ders[a][idx[a]] / h } else { vals[a][idx[a]] };
            }
        }
        v.push(value);
        g.push(grad);
    }
    (v, g)
}

/// Tensor quadrature points/weights over `k` axes of the unit cube.
fn tensor_rule(rule: &QuadratureRule, k: usize) -> Vec<(Vec<f64>, f64)> {
    let q = rule.len();
    (0..q.pow(k as u32))
        .map(|mut t| {
            let mut pt = Vec::with_capacity(k);
            let mut w = 1.0;
            for _ in 0..k {
                pt.push(rule.points[t % q]);
                w *= rule.weights[t % q];
                t /= q;
            }
            (pt, w)
        })
        .collect()
}

/// Global interior penalty matrix, `A[i][j] = a(phi_j, phi_i)`, dofs in
/// SFC-major order (matching [`crate::fields::CellField`]).
pub fn assemble_ip_matrix(mesh: &Mesh, basis: &NodalBasis1D, params: IpParams) -> DenseMatrix {
    let dim = mesh.dim();
    let h = mesh.h();
    let nc = basis.len().pow(dim as u32);
    let n = nc * mesh.num_cells();
    let rule = QuadratureRule::gauss_legendre(basis.degree() + 3);
    let gamma_bar = params.gamma_bar(basis.degree(), h);
    let mut a = DenseMatrix::zeros(n, n);
    let add = |a: &mut DenseMatrix, i: usize, j: usize, v: f64| {
        let old = a.get(i, j);
        a.set(i, j, old + v);
    };

    let vol_w = h.powi(dim as i32);
    for cell in 0..mesh.num_cells() {
        let base = mesh.sfc_position(cell) * nc;
        for (pt, w) in tensor_rule(&rule, dim) {
            let (_, g) = eval_cell(basis, dim, h, &pt);
            for i in 0..nc {
                for j in 0..nc {
                    let dot: f64 = (0..dim).map(|d| g[i][d] * g[j][d]).sum();
                    add(&mut a, base + i, base + j, w * vol_w * dot);
                }
            }
        }
    }

    let surf_w = h.powi(dim as i32 - 1);
    for facet in mesh.facets() {
        let axis = facet.axis;
        let boundary = facet.is_boundary();
        // (cell, reference coordinate of the facet in that cell, jump sign)
        let mut sides = Vec::with_capacity(2);
        if boundary {
            let xi = if facet.normal_sign > 0 { 1.0 } else { 0.0 };
            sides.push((facet.minus, xi, 1.0));
        } else {
            sides.push((facet.minus, 1.0, 1.0));
            sides.push((facet.plus.expect("interior facet"), 0.0, -1.0));
        }
        let nu = facet.normal_sign as f64;
        let (avg, gamma) = if boundary {
            (1.0, gamma_bar)
        } else {
            (0.5, 0.5 * gamma_bar)
        };
        for (pt, w) in tensor_rule(&rule, dim - 1) {
            // jump and average-normal-derivative of every adjacent basis function
            let mut entries: Vec<(usize, f64, f64)> = Vec::new();
            for &(cell, xi_a, sign) in &sides {
                let mut xi = Vec::with_capacity(dim);
                let mut it = pt.iter();
                for d in 0..dim {
                    xi.push(if d == axis { xi_a } else { *it.next().unwrap() });
                }
                let (v, g) = eval_cell(basis, dim, h, &xi);
                let base = mesh.sfc_position(cell) * nc;
                for i in 0..nc {
                    entries.push((base + i, sign * v[i], avg * nu * g[i][axis]));
                }
            }
            let ww = w * surf_w;
            for &(ti, tj, tdn) in &entries {
                for &(ui, uj, udn) in &entries {
                    let val = -tj * udn + params.theta * uj * tdn + gamma * uj * tj;
                    add(&mut a, ti, ui, ww * val);
                }
            }
        }
    }
    a
}

/// Continuous bilinear (multilinear) stiffness over all vertices with
/// Dirichlet rows and columns replaced by the identity.
pub fn assemble_cg_matrix(mesh: &Mesh) -> DenseMatrix {
    let dim = mesh.dim();
    let h = mesh.h();
    let nv = mesh.num_vertices();
    let rule = QuadratureRule::gauss_legendre(3);
    let mut a = DenseMatrix::zeros(nv, nv);
    let shape_grad = |k: usize, xi: &[f64]| -> [f64; 3] {
        let mut g = [1.0; 3];
        for (b, gb) in g.iter_mut().enumerate().take(dim) {
            for (a, &x) in xi.iter().enumerate() {
                let upper = (k >> a) & 1 == 1;
                *gb *= if a == b {
                    if upper {
                        1.0 / h
                    } else {
                        -1.0 / h
                    }
                } else if upper {
                    x
                } else {
                    1.0 - x
                };
            }
        }
        g
    };
    for cell in 0..mesh.num_cells() {
        let verts = mesh.cell_vertices(cell);
        for (pt, w) in tensor_rule(&rule, dim) {
            let grads: Vec<[f64; 3]> = (0..verts.len()).map(|k| shape_grad(k, &pt)).collect();
            for (i, &vi) in verts.iter().enumerate() {
                for (j, &vj) in verts.iter().enumerate() {
                    let dot: f64 = (0..dim).map(|d| grads[i][d] * grads[j][d]).sum();
                    let old = a.get(vi, vj);
                    a.set(vi, vj, old + w * h.powi(dim as i32) * dot);
                }
            }
        }
    }
    for v in 0..nv {
        if mesh.is_boundary_vertex(v) {
            for k in 0..nv {
                a.set(v, k, 0.0);
                a.set(k, v, 0.0);
            }
            a.set(v, v, 1.0);
        }
    }
    a
}

/// Dense direct solve.
pub fn solve_dense(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let lu = LuFactors::new(a)?;
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;

    #[test]
    fn ip_matrix_annihilates_constants_away_from_boundary() {
        let mesh = Mesh::new(2, 1).unwrap();
        let basis = NodalBasis1D::new(BasisKind::GaussLegendre, 2).unwrap();
        let a = assemble_ip_matrix(&mesh, &basis, IpParams::default());
        let ones = vec![1.0; a.cols()];
        let r = a.mul_vec(&ones);
        let center = mesh.sfc_position(mesh.cell_id(&[1, 1]));
        for i in 0..9 {
            assert!(r[center * 9 + i].abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_variant_is_symmetric() {
        let mesh = Mesh::new(2, 1).unwrap();
        let basis = NodalBasis1D::new(BasisKind::GaussLobatto, 1).unwrap();
        let params = IpParams {
            theta: -1.0,
            penalty_const: 2.0,
        };
        let a = assemble_ip_matrix(&mesh, &basis, params);
        assert!(a.max_abs_diff(&a.transpose()) < 1e-12);
    }

    #[test]
    fn cg_matrix_has_five_point_stencil_in_2d() {
        let mesh = Mesh::new(2, 1).unwrap();
        let a = assemble_cg_matrix(&mesh);
        let v = mesh.vertex_id(&[1, 1]);
        assert!((a.get(v, v) - 8.0 / 3.0).abs() < 1e-13);
        let row: f64 = (0..a.cols()).map(|j| a.get(v, j)).sum();
        // interior vertex next to the boundary: masked couplings are dropped
        assert!(row > 0.0);
    }
}
