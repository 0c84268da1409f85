//! Quadrature over the structured mesh.
//!
//! Everything integrates the piecewise-bilinear interpolant, with cells
//! clipped against boxes or segments. Two-point Gauss per axis is exact for
//! bilinear integrands on a clipped rectangle, so these weights are the exact
//! integrals of the nodal basis: derivatives of the box integrals with respect
//! to a box edge equal the matching line-integral weights, which keeps
//! adjoint gradients consistent with the objective to machine precision.

use crate::geometry::{Mesh, Rect};

const GAUSS_OFF: f64 = 0.288_675_134_594_812_88; // 1 / (2 sqrt(3))

/// Two-point Gauss rule on [a, b]: (point, weight) pairs.
#[inline]
pub fn gauss2(a: f64, b: f64) -> [(f64, f64); 2] {
    let mid = 0.5 * (a + b);
    let half = b - a;
    let off = half * GAUSS_OFF;
    [(mid - off, 0.5 * half), (mid + off, 0.5 * half)]
}

/// Bilinear shape values at local coordinates (xi, eta) in [0,1]^2, ordered
/// like [`Mesh::cell_nodes`].
#[inline]
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Physical-coordinate shape gradients; rows follow [`shape`].
#[inline]
pub fn shape_grad(xi: f64, eta: f64, hx: f64, hy: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta) / hx, -(1.0 - xi) / hy],
        [(1.0 - eta) / hx, -xi / hy],
        [eta / hx, xi / hy],
        [-eta / hx, (1.0 - xi) / hy],
    ]
}

/// Sparse node weights: `sum_k w_k f[node_k]` evaluates a functional of the
/// interpolant of `f`.
pub type NodeWeights = Vec<(usize, f64)>;

pub fn contract(weights: &NodeWeights, field: &[f64]) -> f64 {
    weights.iter().map(|&(n, w)| w * field[n]).sum()
}

/// Exact integrals of each nodal basis function over `rect`, skipping dropped
/// cells. `sum w_k f[k] = integral of interp(f) over rect`.
pub fn rect_node_weights(mesh: &Mesh, rect: &Rect) -> NodeWeights {
    let mut weights: NodeWeights = Vec::new();
    let (ncx, ncy) = mesh.n_cells();
    let lo = mesh.domain.lower;
    let ci0 = (((rect.lower[0] - lo[0]) / mesh.hx).floor().max(0.0)) as usize;
    let cj0 = (((rect.lower[1] - lo[1]) / mesh.hy).floor().max(0.0)) as usize;
    let ci1 = ((((rect.upper[0] - lo[0]) / mesh.hx).ceil()) as i64).min(ncx as i64) as usize;
    let cj1 = ((((rect.upper[1] - lo[1]) / mesh.hy).ceil()) as i64).min(ncy as i64) as usize;
    for cj in cj0..cj1.min(ncy) {
        for ci in ci0..ci1.min(ncx) {
            if !mesh.cell_active(ci, cj) {
                continue;
            }
            let o = mesh.cell_origin(ci, cj);
            let cell = Rect::new(o, [o[0] + mesh.hx, o[1] + mesh.hy]);
            let Some(clip) = cell.intersect(rect) else {
                continue;
            };
            let nodes = mesh.cell_nodes(ci, cj);
            for (gx, wx) in gauss2(clip.lower[0], clip.upper[0]) {
                for (gy, wy) in gauss2(clip.lower[1], clip.upper[1]) {
                    let xi = (gx - o[0]) / mesh.hx;
                    let eta = (gy - o[1]) / mesh.hy;
                    let n = shape(xi, eta);
                    for a in 0..4 {
                        weights.push((nodes[a], wx * wy * n[a]));
                    }
                }
            }
        }
    }
    weights
}

/// Picks the cell column for a vertical line at `x`: the cell to the right of
/// a grid line, falling back left when that cell is dropped in row `cj`.
fn vline_cell(mesh: &Mesh, x: f64, cj: usize) -> Option<usize> {
    let (ncx, _) = mesh.n_cells();
    let raw = ((x - mesh.domain.lower[0]) / mesh.hx).floor() as i64;
    let ci = raw.clamp(0, ncx as i64 - 1) as usize;
    if mesh.cell_active(ci, cj) {
        return Some(ci);
    }
    if ci > 0 && mesh.cell_active(ci - 1, cj) {
        let left_edge = mesh.domain.lower[0] + ci as f64 * mesh.hx;
        if (x - left_edge).abs() < 1e-12 * mesh.hx.max(1.0) {
            return Some(ci - 1);
        }
    }
    None
}

fn hline_cell(mesh: &Mesh, y: f64, ci: usize) -> Option<usize> {
    let (_, ncy) = mesh.n_cells();
    let raw = ((y - mesh.domain.lower[1]) / mesh.hy).floor() as i64;
    let cj = raw.clamp(0, ncy as i64 - 1) as usize;
    if mesh.cell_active(ci, cj) {
        return Some(cj);
    }
    if cj > 0 && mesh.cell_active(ci, cj - 1) {
        let bottom = mesh.domain.lower[1] + cj as f64 * mesh.hy;
        if (y - bottom).abs() < 1e-12 * mesh.hy.max(1.0) {
            return Some(cj - 1);
        }
    }
    None
}

/// Weights for `integral_{y0}^{y1} f(x, y) dy` along a vertical segment.
/// `derivative` integrates `df/dx1` of the interpolant instead.
pub fn vline_node_weights(
    mesh: &Mesh,
    x: f64,
    y0: f64,
    y1: f64,
    derivative: bool,
) -> NodeWeights {
    let mut weights: NodeWeights = Vec::new();
    if y1 <= y0 {
        return weights;
    }
    let (_, ncy) = mesh.n_cells();
    let lo = mesh.domain.lower;
    let cj0 = (((y0 - lo[1]) / mesh.hy).floor().max(0.0)) as usize;
    let cj1 = ((((y1 - lo[1]) / mesh.hy).ceil()) as i64).min(ncy as i64) as usize;
    for cj in cj0..cj1.min(ncy) {
        let ylo = (lo[1] + cj as f64 * mesh.hy).max(y0);
        let yhi = (lo[1] + (cj + 1) as f64 * mesh.hy).min(y1);
        if yhi <= ylo {
            continue;
        }
        let Some(ci) = vline_cell(mesh, x, cj) else {
            continue;
        };
        let o = mesh.cell_origin(ci, cj);
        let nodes = mesh.cell_nodes(ci, cj);
        let xi = (x - o[0]) / mesh.hx;
        for (gy, wy) in gauss2(ylo, yhi) {
            let eta = (gy - o[1]) / mesh.hy;
            if derivative {
                let g = shape_grad(xi, eta, mesh.hx, mesh.hy);
                for a in 0..4 {
                    weights.push((nodes[a], wy * g[a][0]));
                }
            } else {
                let n = shape(xi, eta);
                for a in 0..4 {
                    weights.push((nodes[a], wy * n[a]));
                }
            }
        }
    }
    weights
}

/// Weights for `integral_{x0}^{x1} f(x, y) dx` along a horizontal segment.
/// `derivative` integrates `df/dx2` of the interpolant instead.
pub fn hline_node_weights(
    mesh: &Mesh,
    y: f64,
    x0: f64,
    x1: f64,
    derivative: bool,
) -> NodeWeights {
    let mut weights: NodeWeights = Vec::new();
    if x1 <= x0 {
        return weights;
    }
    let (ncx, _) = mesh.n_cells();
    let lo = mesh.domain.lower;
    let ci0 = (((x0 - lo[0]) / mesh.hx).floor().max(0.0)) as usize;
    let ci1 = ((((x1 - lo[0]) / mesh.hx).ceil()) as i64).min(ncx as i64) as usize;
    for ci in ci0..ci1.min(ncx) {
        let xlo = (lo[0] + ci as f64 * mesh.hx).max(x0);
        let xhi = (lo[0] + (ci + 1) as f64 * mesh.hx).min(x1);
        if xhi <= xlo {
            continue;
        }
        let Some(cj) = hline_cell(mesh, y, ci) else {
            continue;
        };
        let o = mesh.cell_origin(ci, cj);
        let nodes = mesh.cell_nodes(ci, cj);
        let eta = (y - o[1]) / mesh.hy;
        for (gx, wx) in gauss2(xlo, xhi) {
            let xi = (gx - o[0]) / mesh.hx;
            if derivative {
                let g = shape_grad(xi, eta, mesh.hx, mesh.hy);
                for a in 0..4 {
                    weights.push((nodes[a], wx * g[a][1]));
                }
            } else {
                let n = shape(xi, eta);
                for a in 0..4 {
                    weights.push((nodes[a], wx * n[a]));
                }
            }
        }
    }
    weights
}

/// Bilinear-interpolation weights at a point.
pub fn point_node_weights(mesh: &Mesh, p: [f64; 2]) -> NodeWeights {
    let (ci, cj) = mesh.locate_cell(p);
    let o = mesh.cell_origin(ci, cj);
    let xi = ((p[0] - o[0]) / mesh.hx).clamp(0.0, 1.0);
    let eta = ((p[1] - o[1]) / mesh.hy).clamp(0.0, 1.0);
    let n = shape(xi, eta);
    mesh.cell_nodes(ci, cj)
        .iter()
        .zip(n)
        .map(|(&node, w)| (node, w))
        .collect()
}

/// Bilinear interpolation of a nodal field at a point.
pub fn interp(mesh: &Mesh, field: &[f64], p: [f64; 2]) -> f64 {
    contract(&point_node_weights(mesh, p), field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, Domain};

    fn linear_field(mesh: &Mesh, a: f64, b: f64, c: f64) -> Vec<f64> {
        (0..mesh.n_nodes())
            .map(|i| {
                let p = mesh.node_pos(i);
                a + b * p[0] + c * p[1]
            })
            .collect()
    }

    #[test]
    fn shape_functions_partition_unity() {
        for &(xi, eta) in &[(0.0, 0.0), (1.0, 0.3), (0.42, 0.87), (1.0, 1.0)] {
            let n = shape(xi, eta);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let g = shape_grad(xi, eta, 0.1, 0.25);
            for d in 0..2 {
                let s: f64 = g.iter().map(|r| r[d]).sum();
                assert!(s.abs() < 1e-13, "grad sum {s} at ({xi},{eta})");
            }
        }
    }

    #[test]
    fn rect_weights_integrate_linear_fields_exactly() {
        let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
        let f = linear_field(&mesh, 0.3, 1.7, -0.9);
        let rect = Rect::new([0.13, 0.27], [0.68, 0.55]);
        let w = rect_node_weights(&mesh, &rect);
        // integral of (0.3 + 1.7 x - 0.9 y) over the box, analytically.
        let (x0, x1, y0, y1) = (0.13, 0.68, 0.27, 0.55);
        let exact = 0.3 * (x1 - x0) * (y1 - y0)
            + 1.7 * 0.5 * (x1 * x1 - x0 * x0) * (y1 - y0)
            - 0.9 * 0.5 * (y1 * y1 - y0 * y0) * (x1 - x0);
        assert!((contract(&w, &f) - exact).abs() < 1e-13);
    }

    #[test]
    fn rect_weights_are_edge_derivatives_of_box_integral() {
        // d/d(upper1) of the box integral equals the vertical line integral.
        let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
        let f: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| {
                let p = mesh.node_pos(i);
                (2.1 * p[0]).sin() + 0.7 * p[1] * p[0]
            })
            .collect();
        let (x0, y0, y1) = (0.21, 0.33, 0.74);
        let x1 = 0.585;
        let eps = 1e-6;
        let ip = contract(
            &rect_node_weights(&mesh, &Rect::new([x0, y0], [x1 + eps, y1])),
            &f,
        );
        let im = contract(
            &rect_node_weights(&mesh, &Rect::new([x0, y0], [x1 - eps, y1])),
            &f,
        );
        let fd = (ip - im) / (2.0 * eps);
        let line = contract(&vline_node_weights(&mesh, x1, y0, y1, false), &f);
        assert!((fd - line).abs() < 1e-7, "fd={fd} line={line}");
    }

    #[test]
    fn line_derivative_weights_match_value_weights_fd() {
        let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
        let f: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| {
                let p = mesh.node_pos(i);
                p[0] * p[0] + 3.0 * p[0] * p[1]
            })
            .collect();
        let (x, y0, y1) = (0.437, 0.21, 0.66);
        let eps = 1e-7;
        let vp = contract(&vline_node_weights(&mesh, x + eps, y0, y1, false), &f);
        let vm = contract(&vline_node_weights(&mesh, x - eps, y0, y1, false), &f);
        let fd = (vp - vm) / (2.0 * eps);
        let dx = contract(&vline_node_weights(&mesh, x, y0, y1, true), &f);
        assert!((fd - dx).abs() < 1e-6, "fd={fd} dx={dx}");
    }

    #[test]
    fn interp_reproduces_nodal_values_and_linears() {
        let mesh = build_mesh(&Domain::unit_square(), 7, 9).unwrap();
        let f = linear_field(&mesh, 1.0, -2.0, 0.5);
        let idx = mesh.node_index(3, 4);
        assert_eq!(interp(&mesh, &f, mesh.node_pos(idx)), f[idx]);
        // Bilinear interpolation is exact on linear fields anywhere.
        let p = [0.234, 0.711];
        assert!((interp(&mesh, &f, p) - (1.0 - 2.0 * p[0] + 0.5 * p[1])).abs() < 1e-13);
    }

    #[test]
    fn weights_skip_dropped_cells() {
        let domain = Domain::new(
            [0.0, 0.0],
            [1.0, 1.0],
            vec![Rect::new([0.4, 0.4], [0.6, 0.6])],
            1.0,
        )
        .unwrap();
        let mesh = build_mesh(&domain, 11, 11).unwrap();
        let ones = vec![1.0; mesh.n_nodes()];
        // A box equal to the obstacle: every overlapped cell is dropped.
        let w = rect_node_weights(&mesh, &Rect::new([0.4, 0.4], [0.6, 0.6]));
        assert_eq!(contract(&w, &ones), 0.0);
        // A box straddling the obstacle integrates only the kept part.
        let w = rect_node_weights(&mesh, &Rect::new([0.3, 0.45], [0.5, 0.55]));
        let kept = contract(&w, &ones);
        assert!((kept - 0.1 * 0.1).abs() < 1e-13, "kept={kept}");
    }
}
