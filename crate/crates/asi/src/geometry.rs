//! Domain description, structured meshing, and convex decomposition.
//!
//! The workspace is an axis-aligned rectangle with axis-aligned rectangular
//! obstacles removed. Meshes are structured bilinear-quad grids; nodes strictly
//! inside an obstacle are deactivated and every element touching a deactivated
//! node is dropped, which carves a conforming hole with zero-value walls.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Rect {
    pub fn new(lower: [f64; 2], upper: [f64; 2]) -> Self {
        Self { lower, upper }
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn area(&self) -> f64 {
        self.width(0) * self.width(1)
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.lower[0] + self.upper[0]),
            0.5 * (self.lower[1] + self.upper[1]),
        ]
    }

    /// Point membership including the boundary.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| self.lower[d] <= p[d] && p[d] <= self.upper[d])
    }

    /// Point membership excluding the boundary.
    pub fn contains_strict(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| self.lower[d] < p[d] && p[d] < self.upper[d])
    }

    /// True when the open interiors overlap (shared edges do not count).
    pub fn overlaps_interior(&self, other: &Rect) -> bool {
        (0..2).all(|d| self.lower[d].max(other.lower[d]) < self.upper[d].min(other.upper[d]))
    }

    /// True when `other` is contained in `self` (boundaries allowed).
    pub fn contains_rect(&self, other: &Rect) -> bool {
        (0..2).all(|d| self.lower[d] <= other.lower[d] && other.upper[d] <= self.upper[d])
    }

    /// Intersection with another rectangle, if it has positive area.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let lower = [
            self.lower[0].max(other.lower[0]),
            self.lower[1].max(other.lower[1]),
        ];
        let upper = [
            self.upper[0].min(other.upper[0]),
            self.upper[1].min(other.upper[1]),
        ];
        if lower[0] < upper[0] && lower[1] < upper[1] {
            Some(Rect { lower, upper })
        } else {
            None
        }
    }
}

/// Rectangular workspace with rectangular obstacles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Domain {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    /// Length scale used for Peclet numbers and normalized localization error.
    pub characteristic_length: f64,
}

impl Domain {
    pub fn new(
        lower: [f64; 2],
        upper: [f64; 2],
        obstacles: Vec<Rect>,
        characteristic_length: f64,
    ) -> Result<Self> {
        let d = Self { lower, upper, obstacles, characteristic_length };
        d.validate()?;
        Ok(d)
    }

    /// Unit square with no obstacles.
    pub fn unit_square() -> Self {
        Self {
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
            obstacles: Vec::new(),
            characteristic_length: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in 0..2 {
            if !(self.lower[d] < self.upper[d]) {
                return Err(Error::Geometry(format!(
                    "degenerate bounds on axis {d}: [{}, {}]",
                    self.lower[d], self.upper[d]
                )));
            }
        }
        if !(self.characteristic_length > 0.0) {
            return Err(Error::Geometry(
                "characteristic length must be positive".into(),
            ));
        }
        let bbox = self.bounding_rect();
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.lower[0] < o.upper[0] && o.lower[1] < o.upper[1]) {
                return Err(Error::Geometry(format!("obstacle {k} has no area")));
            }
            if !bbox.contains_rect(o) {
                return Err(Error::Geometry(format!(
                    "obstacle {k} extends outside the workspace bounds"
                )));
            }
        }
        Ok(())
    }

    pub fn bounding_rect(&self) -> Rect {
        Rect { lower: self.lower, upper: self.upper }
    }

    /// True when `p` belongs to the workspace (obstacle interiors excluded).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.bounding_rect().contains(p) && !self.obstacles.iter().any(|o| o.contains_strict(p))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let d: Domain = serde_json::from_str(&text)?;
        d.validate()?;
        Ok(d)
    }
}

/// Structured bilinear-quad mesh over a [`Domain`].
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// Per node: false when the node sits strictly inside an obstacle.
    pub active: Vec<bool>,
    /// Per node: true on the outer rim, on an obstacle closure, or next to a
    /// deactivated node. Boundary nodes carry the zero essential condition.
    pub boundary: Vec<bool>,
}

/// Builds a structured `nx` x `ny` node grid over the domain.
pub fn build_mesh(domain: &Domain, nx: usize, ny: usize) -> Result<Mesh> {
    domain.validate()?;
    if nx < 3 || ny < 3 {
        return Err(Error::Geometry(format!(
            "mesh needs at least 3 nodes per axis, got {nx} x {ny}"
        )));
    }
    let hx = (domain.upper[0] - domain.lower[0]) / (nx - 1) as f64;
    let hy = (domain.upper[1] - domain.lower[1]) / (ny - 1) as f64;
    let n = nx * ny;
    let mut active = vec![true; n];
    for j in 0..ny {
        for i in 0..nx {
            let p = [
                domain.lower[0] + i as f64 * hx,
                domain.lower[1] + j as f64 * hy,
            ];
            if domain.obstacles.iter().any(|o| o.contains_strict(p)) {
                active[j * nx + i] = false;
            }
        }
    }
    let mut mesh = Mesh { domain: domain.clone(), nx, ny, hx, hy, active, boundary: vec![false; n] };
    let mut boundary = vec![false; n];
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            if !mesh.active[idx] {
                continue;
            }
            let rim = i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
            let p = mesh.node_pos(idx);
            let on_obstacle = mesh.domain.obstacles.iter().any(|o| o.contains(p));
            let near_hole = mesh.neighbors8(i, j).any(|nb| !mesh.active[nb]);
            boundary[idx] = rim || on_obstacle || near_hole;
        }
    }
    mesh.boundary = boundary;
    if (0..mesh.n_nodes()).all(|i| !mesh.is_free(i)) {
        return Err(Error::Geometry(
            "mesh has no free interior nodes; refine the grid or shrink obstacles".into(),
        ));
    }
    Ok(mesh)
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node_ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn node_pos(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(idx);
        [
            self.domain.lower[0] + i as f64 * self.hx,
            self.domain.lower[1] + j as f64 * self.hy,
        ]
    }

    /// Free nodes carry unknowns: active and not on the essential boundary.
    #[inline]
    pub fn is_free(&self, idx: usize) -> bool {
        self.active[idx] && !self.boundary[idx]
    }

    fn neighbors8<'a>(&'a self, i: usize, j: usize) -> impl Iterator<Item = usize> + 'a {
        let (nx, ny) = (self.nx, self.ny);
        (-1i64..=1)
            .flat_map(move |dj| (-1i64..=1).map(move |di| (di, dj)))
            .filter(|&(di, dj)| di != 0 || dj != 0)
            .filter_map(move |(di, dj)| {
                let ii = i as i64 + di;
                let jj = j as i64 + dj;
                if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny {
                    Some(jj as usize * nx + ii as usize)
                } else {
                    None
                }
            })
    }

    /// Number of cells along each axis.
    pub fn n_cells(&self) -> (usize, usize) {
        (self.nx - 1, self.ny - 1)
    }

    /// A cell is kept when all four corner nodes are active.
    pub fn cell_active(&self, ci: usize, cj: usize) -> bool {
        let c = self.cell_nodes(ci, cj);
        c.iter().all(|&n| self.active[n])
    }

    /// Corner nodes of cell (ci, cj), counterclockwise from the lower-left.
    #[inline]
    pub fn cell_nodes(&self, ci: usize, cj: usize) -> [usize; 4] {
        let n00 = self.node_index(ci, cj);
        [n00, n00 + 1, n00 + 1 + self.nx, n00 + self.nx]
    }

    /// Lower-left corner coordinates of cell (ci, cj).
    #[inline]
    pub fn cell_origin(&self, ci: usize, cj: usize) -> [f64; 2] {
        [
            self.domain.lower[0] + ci as f64 * self.hx,
            self.domain.lower[1] + cj as f64 * self.hy,
        ]
    }

    /// Cell containing `x`, clamped so boundary points map to the last cell.
    pub fn locate_cell(&self, x: [f64; 2]) -> (usize, usize) {
        let ci = (((x[0] - self.domain.lower[0]) / self.hx).floor() as i64)
            .clamp(0, self.nx as i64 - 2) as usize;
        let cj = (((x[1] - self.domain.lower[1]) / self.hy).floor() as i64)
            .clamp(0, self.ny as i64 - 2) as usize;
        (ci, cj)
    }

    /// Index of the nearest node to `x`.
    pub fn nearest_node(&self, x: [f64; 2]) -> usize {
        let i = (((x[0] - self.domain.lower[0]) / self.hx).round() as i64)
            .clamp(0, self.nx as i64 - 1) as usize;
        let j = (((x[1] - self.domain.lower[1]) / self.hy).round() as i64)
            .clamp(0, self.ny as i64 - 1) as usize;
        self.node_index(i, j)
    }

    /// {0,1} node weights marking the measurement region: a node is flagged
    /// when it lies within `radius` of any point. Points must lie in the
    /// workspace.
    pub fn indicator(&self, points: &[[f64; 2]], radius: f64) -> Result<Vec<f64>> {
        if !(radius > 0.0) {
            return Err(Error::Geometry("indicator radius must be positive".into()));
        }
        for (k, p) in points.iter().enumerate() {
            if !self.domain.contains(*p) {
                return Err(Error::Geometry(format!(
                    "measurement point {k} at ({}, {}) lies outside the workspace",
                    p[0], p[1]
                )));
            }
        }
        let mut chi = vec![0.0; self.n_nodes()];
        let r2 = radius * radius;
        for p in points {
            // Only nodes inside the bounding square of the ball can qualify.
            let i0 = (((p[0] - radius - self.domain.lower[0]) / self.hx).floor() as i64).max(0)
                as usize;
            let i1 = (((p[0] + radius - self.domain.lower[0]) / self.hx).ceil() as i64)
                .min(self.nx as i64 - 1) as usize;
            let j0 = (((p[1] - radius - self.domain.lower[1]) / self.hy).floor() as i64).max(0)
                as usize;
            let j1 = (((p[1] + radius - self.domain.lower[1]) / self.hy).ceil() as i64)
                .min(self.ny as i64 - 1) as usize;
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let idx = self.node_index(i, j);
                    if !self.active[idx] {
                        continue;
                    }
                    let q = self.node_pos(idx);
                    let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                    if d2 <= r2 {
                        chi[idx] = 1.0;
                    }
                }
            }
        }
        Ok(chi)
    }

    /// Writes `node_id,x1,x2,active,boundary` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "node_id,x1,x2,active,boundary")?;
        for idx in 0..self.n_nodes() {
            let p = self.node_pos(idx);
            writeln!(
                out,
                "{},{},{},{},{}",
                idx, p[0], p[1], self.active[idx] as u8, self.boundary[idx] as u8
            )?;
        }
        Ok(())
    }
}

/// Overlapping cover of the workspace by maximal empty rectangles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexCover {
    pub subdomains: Vec<Rect>,
}

impl ConvexCover {
    /// Largest-area subdomain containing `p`; ties break to the earliest
    /// subdomain (the cover is sorted by descending area).
    pub fn largest_containing(&self, p: [f64; 2]) -> Option<&Rect> {
        self.subdomains.iter().find(|r| r.contains(p))
    }
}

/// Decomposes the workspace into every maximal empty rectangle whose edges
/// extend obstacle edges or domain bounds. Subdomains may overlap and jointly
/// cover the workspace minus obstacle interiors.
pub fn decompose_convex(domain: &Domain) -> Result<ConvexCover> {
    domain.validate()?;
    let mut xs = vec![domain.lower[0], domain.upper[0]];
    let mut ys = vec![domain.lower[1], domain.upper[1]];
    for o in &domain.obstacles {
        xs.push(o.lower[0]);
        xs.push(o.upper[0]);
        ys.push(o.lower[1]);
        ys.push(o.upper[1]);
    }
    dedup_sorted(&mut xs);
    dedup_sorted(&mut ys);

    let mut empties: Vec<Rect> = Vec::new();
    for a in 0..xs.len() {
        for b in (a + 1)..xs.len() {
            for c in 0..ys.len() {
                for d in (c + 1)..ys.len() {
                    let r = Rect::new([xs[a], ys[c]], [xs[b], ys[d]]);
                    if !domain.obstacles.iter().any(|o| o.overlaps_interior(&r)) {
                        empties.push(r);
                    }
                }
            }
        }
    }
    let mut maximal: Vec<Rect> = Vec::new();
    for r in &empties {
        let dominated = empties
            .iter()
            .any(|s| s != r && s.contains_rect(r));
        if !dominated && !maximal.iter().any(|m| m == r) {
            maximal.push(*r);
        }
    }
    maximal.sort_by(|p, q| {
        q.area()
            .partial_cmp(&p.area())
            .unwrap()
            .then(p.lower[0].partial_cmp(&q.lower[0]).unwrap())
            .then(p.lower[1].partial_cmp(&q.lower[1]).unwrap())
    });
    if maximal.is_empty() {
        return Err(Error::Geometry(
            "decomposition produced no subdomains; obstacles fill the workspace".into(),
        ));
    }
    Ok(ConvexCover { subdomains: maximal })
}

fn dedup_sorted(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn domain_with_center_obstacle() -> Domain {
        Domain::new(
            [0.0, 0.0],
            [1.0, 1.0],
            vec![Rect::new([0.4, 0.4], [0.6, 0.6])],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(Domain::new([0.0, 0.0], [0.0, 1.0], vec![], 1.0).is_err());
        assert!(Domain::new([0.0, 0.0], [1.0, 1.0], vec![], 0.0).is_err());
        assert!(Domain::new(
            [0.0, 0.0],
            [1.0, 1.0],
            vec![Rect::new([0.5, 0.5], [0.5, 0.9])],
            1.0
        )
        .is_err());
    }

    #[test]
    fn node_inside_obstacle_deactivated() {
        let mesh = build_mesh(&domain_with_center_obstacle(), 11, 11).unwrap();
        // (0.5, 0.5) is strictly inside the obstacle.
        let idx = mesh.nearest_node([0.5, 0.5]);
        assert!(!mesh.active[idx]);
        // Nodes on the obstacle edge stay active and are flagged boundary.
        let edge = mesh.nearest_node([0.4, 0.5]);
        assert!(mesh.active[edge]);
        assert!(mesh.boundary[edge]);
    }

    #[test]
    fn every_boundary_node_is_active() {
        let mesh = build_mesh(&domain_with_center_obstacle(), 13, 9).unwrap();
        for idx in 0..mesh.n_nodes() {
            if mesh.boundary[idx] {
                assert!(mesh.active[idx]);
            }
        }
    }

    #[test]
    fn outer_rim_flagged_boundary() {
        let mesh = build_mesh(&Domain::unit_square(), 5, 5).unwrap();
        for idx in 0..mesh.n_nodes() {
            let (i, j) = mesh.node_ij(idx);
            let rim = i == 0 || i == 4 || j == 0 || j == 4;
            assert_eq!(mesh.boundary[idx], rim);
        }
    }

    #[test]
    fn indicator_flags_single_node() {
        let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
        let p = mesh.node_pos(mesh.node_index(3, 7));
        let chi = mesh.indicator(&[p], 0.04).unwrap();
        let flagged: Vec<usize> = (0..chi.len()).filter(|&i| chi[i] == 1.0).collect();
        assert_eq!(flagged, vec![mesh.node_index(3, 7)]);
    }

    #[test]
    fn indicator_is_a_set_union() {
        let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
        let p = [0.52, 0.31];
        let single = mesh.indicator(&[p], 0.04).unwrap();
        let doubled = mesh.indicator(&[p, p], 0.04).unwrap();
        assert_eq!(single, doubled);
    }

    #[test]
    fn indicator_rejects_outside_points() {
        let mesh = build_mesh(&domain_with_center_obstacle(), 11, 11).unwrap();
        assert!(mesh.indicator(&[[1.2, 0.5]], 0.04).is_err());
        // Strictly inside the obstacle is outside the workspace.
        assert!(mesh.indicator(&[[0.5, 0.5]], 0.04).is_err());
        // On the obstacle edge is allowed.
        assert!(mesh.indicator(&[[0.4, 0.5]], 0.04).is_ok());
    }

    #[test]
    fn obstacle_free_cover_is_whole_domain() {
        let cover = decompose_convex(&Domain::unit_square()).unwrap();
        assert_eq!(cover.subdomains.len(), 1);
        assert_eq!(cover.subdomains[0], Rect::new([0.0, 0.0], [1.0, 1.0]));
    }

    #[test]
    fn centered_obstacle_gives_four_slabs() {
        let cover = decompose_convex(&domain_with_center_obstacle()).unwrap();
        assert_eq!(cover.subdomains.len(), 4);
        let expect = [
            Rect::new([0.0, 0.0], [0.4, 1.0]),
            Rect::new([0.6, 0.0], [1.0, 1.0]),
            Rect::new([0.0, 0.0], [1.0, 0.4]),
            Rect::new([0.0, 0.6], [1.0, 1.0]),
        ];
        for e in &expect {
            assert!(cover.subdomains.contains(e), "missing {e:?}");
        }
    }

    #[test]
    fn l_shape_gives_two_rectangles() {
        let domain = Domain::new(
            [0.0, 0.0],
            [1.0, 1.0],
            vec![Rect::new([0.5, 0.5], [1.0, 1.0])],
            1.0,
        )
        .unwrap();
        let cover = decompose_convex(&domain).unwrap();
        assert_eq!(cover.subdomains.len(), 2);
        assert!(cover
            .subdomains
            .contains(&Rect::new([0.0, 0.0], [0.5, 1.0])));
        assert!(cover
            .subdomains
            .contains(&Rect::new([0.0, 0.0], [1.0, 0.5])));
    }

    /// Brute-force oracle: enumerate maximal empty rectangles over a lattice
    /// that includes every obstacle edge, then prune non-maximal ones.
    fn oracle_cover(domain: &Domain, grid: usize) -> Vec<Rect> {
        let mut xs: Vec<f64> = (0..=grid)
            .map(|i| domain.lower[0] + (domain.upper[0] - domain.lower[0]) * i as f64 / grid as f64)
            .collect();
        let mut ys: Vec<f64> = (0..=grid)
            .map(|i| domain.lower[1] + (domain.upper[1] - domain.lower[1]) * i as f64 / grid as f64)
            .collect();
        for o in &domain.obstacles {
            xs.extend([o.lower[0], o.upper[0]]);
            ys.extend([o.lower[1], o.upper[1]]);
        }
        dedup_sorted(&mut xs);
        dedup_sorted(&mut ys);
        let mut empties = Vec::new();
        for a in 0..xs.len() {
            for b in (a + 1)..xs.len() {
                for c in 0..ys.len() {
                    for d in (c + 1)..ys.len() {
                        let r = Rect::new([xs[a], ys[c]], [xs[b], ys[d]]);
                        if !domain.obstacles.iter().any(|o| o.overlaps_interior(&r)) {
                            empties.push(r);
                        }
                    }
                }
            }
        }
        let mut maximal = Vec::new();
        for r in &empties {
            if !empties.iter().any(|s| s != r && s.contains_rect(r)) {
                maximal.push(*r);
            }
        }
        maximal
    }

    #[test]
    fn cover_matches_brute_force_oracle() {
        let domains = [
            domain_with_center_obstacle(),
            Domain::new(
                [0.0, 0.0],
                [2.0, 1.0],
                vec![
                    Rect::new([0.5, 0.25], [0.75, 0.75]),
                    Rect::new([1.25, 0.0], [1.5, 0.5]),
                ],
                2.0,
            )
            .unwrap(),
        ];
        for domain in &domains {
            let cover = decompose_convex(domain).unwrap();
            let oracle = oracle_cover(domain, 8);
            assert_eq!(cover.subdomains.len(), oracle.len());
            for r in &oracle {
                assert!(
                    cover.subdomains.iter().any(|s| s == r),
                    "oracle rect {r:?} missing from cover"
                );
            }
        }
    }

    #[test]
    fn cover_reaches_every_free_node() {
        let domains = [
            domain_with_center_obstacle(),
            Domain::new(
                [0.0, 0.0],
                [2.0, 1.0],
                vec![
                    Rect::new([0.31, 0.22], [0.77, 0.58]),
                    Rect::new([1.23, 0.41], [1.52, 0.93]),
                ],
                2.0,
            )
            .unwrap(),
        ];
        for domain in &domains {
            let mesh = build_mesh(domain, 21, 17).unwrap();
            let cover = decompose_convex(domain).unwrap();
            for idx in 0..mesh.n_nodes() {
                if mesh.is_free(idx) {
                    let p = mesh.node_pos(idx);
                    assert!(
                        cover.largest_containing(p).is_some(),
                        "free node at ({}, {}) not covered",
                        p[0],
                        p[1]
                    );
                }
            }
        }
    }

    #[test]
    fn subdomains_avoid_obstacles() {
        let domain = domain_with_center_obstacle();
        let cover = decompose_convex(&domain).unwrap();
        for r in &cover.subdomains {
            for o in &domain.obstacles {
                assert!(!r.overlaps_interior(o));
            }
            assert!(domain.bounding_rect().contains_rect(r));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn indicator_values_are_binary(px in 0.05f64..0.95, py in 0.05f64..0.95, r in 0.01f64..0.2) {
            let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
            let chi = mesh.indicator(&[[px, py]], r).unwrap();
            prop_assert!(chi.iter().all(|&v| v == 0.0 || v == 1.0));
        }

        #[test]
        fn indicator_order_invariant(ax in 0.1f64..0.9, ay in 0.1f64..0.9, bx in 0.1f64..0.9, by in 0.1f64..0.9) {
            let mesh = build_mesh(&Domain::unit_square(), 11, 11).unwrap();
            let fwd = mesh.indicator(&[[ax, ay], [bx, by]], 0.07).unwrap();
            let rev = mesh.indicator(&[[bx, by], [ax, ay]], 0.07).unwrap();
            prop_assert_eq!(fwd, rev);
        }
    }
}
