//! Rectangular domains, regular overlapping decompositions and the
//! partition of unity used to glue subdomain solutions together.
//!
//! Subdomains are indexed row-major: `s = j * nx + i`, where `i` counts
//! tiles along x and `j` along y. Each tile of the `nx × ny` grid is
//! extended by `δ/2` across every edge that lies inside the domain, with
//! `δ = overlap_fraction · max(tile_w, tile_h)`, so neighbouring
//! subdomains share a strip of width `δ`.
//!
//! The partition-of-unity weight of a subdomain is a product of two
//! piecewise-linear ramps (one per axis), normalised over all subdomains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Top => "top",
        }
    }
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let finite = [x_lo, x_hi, y_lo, y_hi].iter().all(|v| v.is_finite());
        if !finite || x_lo >= x_hi || y_lo >= y_hi {
            return Err(Error::Geometry(format!(
                "degenerate rectangle [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]"
            )));
        }
        Ok(Rect {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        })
    }

    pub fn unit() -> Self {
        Rect {
            x_lo: 0.0,
            x_hi: 1.0,
            y_lo: 0.0,
            y_hi: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_lo && p[0] <= self.x_hi && p[1] >= self.y_lo && p[1] <= self.y_hi
    }

    pub fn contains_strictly(&self, p: Point) -> bool {
        p[0] > self.x_lo && p[0] < self.x_hi && p[1] > self.y_lo && p[1] < self.y_hi
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_lo >= self.x_lo
            && other.x_hi <= self.x_hi
            && other.y_lo >= self.y_lo
            && other.y_hi <= self.y_hi
    }

    /// Endpoints of an edge, ordered by increasing free coordinate.
    pub fn edge_segment(&self, edge: Edge) -> (Point, Point) {
        match edge {
            Edge::Left => ([self.x_lo, self.y_lo], [self.x_lo, self.y_hi]),
            Edge::Right => ([self.x_hi, self.y_lo], [self.x_hi, self.y_hi]),
            Edge::Bottom => ([self.x_lo, self.y_lo], [self.x_hi, self.y_lo]),
            Edge::Top => ([self.x_lo, self.y_hi], [self.x_hi, self.y_hi]),
        }
    }

    pub fn edge_length(&self, edge: Edge) -> f64 {
        match edge {
            Edge::Left | Edge::Right => self.height(),
            Edge::Bottom | Edge::Top => self.width(),
        }
    }

    /// Whether `p` lies on the boundary of the rectangle, within `tol`.
    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        let inside = p[0] >= self.x_lo - tol
            && p[0] <= self.x_hi + tol
            && p[1] >= self.y_lo - tol
            && p[1] <= self.y_hi + tol;
        inside
            && ((p[0] - self.x_lo).abs() <= tol
                || (p[0] - self.x_hi).abs() <= tol
                || (p[1] - self.y_lo).abs() <= tol
                || (p[1] - self.y_hi).abs() <= tol)
    }
}

/// Which edges of a subdomain lie strictly inside the global domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlags {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl EdgeFlags {
    pub fn is_interior(&self, edge: Edge) -> bool {
        match edge {
            Edge::Left => self.left,
            Edge::Right => self.right,
            Edge::Bottom => self.bottom,
            Edge::Top => self.top,
        }
    }

    pub fn any(&self) -> bool {
        self.left || self.right || self.bottom || self.top
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub overlap_fraction: f64,
    /// Total width `δ` of the strip shared by two adjacent subdomains.
    pub overlap_width: f64,
    pub tiles: Vec<Rect>,
    pub subdomains: Vec<Rect>,
    pub interior_edge_flags: Vec<EdgeFlags>,
}

pub fn make_regular_decomposition(
    domain: Rect,
    nx: usize,
    ny: usize,
    overlap_fraction: f64,
) -> Result<Decomposition> {
    let domain = Rect::new(domain.x_lo, domain.x_hi, domain.y_lo, domain.y_hi)?;
    if nx == 0 || ny == 0 {
        return Err(Error::Geometry(format!(
            "subdomain counts must be positive, got {nx} x {ny}"
        )));
    }
    if !(overlap_fraction > 0.0 && overlap_fraction < 1.0) {
        return Err(Error::Geometry(format!(
            "overlap_fraction must lie in (0, 1), got {overlap_fraction}"
        )));
    }
    let tile_w = domain.width() / nx as f64;
    let tile_h = domain.height() / ny as f64;
    let delta = overlap_fraction * tile_w.max(tile_h);
    if delta >= tile_w.min(tile_h) {
        return Err(Error::Geometry(format!(
            "overlap width {delta} reaches across a whole tile ({tile_w} x {tile_h})"
        )));
    }
    let half = 0.5 * delta;

    // Tile boundaries are computed from the integer grid so that the last
    // tile ends exactly on the domain edge.
    let xs: Vec<f64> = (0..=nx)
        .map(|i| {
            if i == nx {
                domain.x_hi
            } else {
                domain.x_lo + i as f64 * tile_w
            }
        })
        .collect();
    let ys: Vec<f64> = (0..=ny)
        .map(|j| {
            if j == ny {
                domain.y_hi
            } else {
                domain.y_lo + j as f64 * tile_h
            }
        })
        .collect();

    let mut tiles = Vec::with_capacity(nx * ny);
    let mut subdomains = Vec::with_capacity(nx * ny);
    let mut flags = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let f = EdgeFlags {
                left: i > 0,
                right: i + 1 < nx,
                bottom: j > 0,
                top: j + 1 < ny,
            };
            let tile = Rect {
                x_lo: xs[i],
                x_hi: xs[i + 1],
                y_lo: ys[j],
                y_hi: ys[j + 1],
            };
            let ext = |interior: bool| if interior { half } else { 0.0 };
            subdomains.push(Rect {
                x_lo: tile.x_lo - ext(f.left),
                x_hi: tile.x_hi + ext(f.right),
                y_lo: tile.y_lo - ext(f.bottom),
                y_hi: tile.y_hi + ext(f.top),
            });
            tiles.push(tile);
            flags.push(f);
        }
    }

    Ok(Decomposition {
        domain,
        nx,
        ny,
        overlap_fraction,
        overlap_width: delta,
        tiles,
        subdomains,
        interior_edge_flags: flags,
    })
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// `(i, j)` tile coordinates of subdomain `s`.
    pub fn grid_index(&self, s: usize) -> (usize, usize) {
        (s % self.nx, s / self.nx)
    }

    pub fn interior_edges(&self, s: usize) -> impl Iterator<Item = Edge> + '_ {
        let flags = self.interior_edge_flags[s];
        Edge::ALL.into_iter().filter(move |e| flags.is_interior(*e))
    }

    pub fn outer_edges(&self, s: usize) -> impl Iterator<Item = Edge> + '_ {
        let flags = self.interior_edge_flags[s];
        Edge::ALL.into_iter().filter(move |e| !flags.is_interior(*e))
    }
}

/// Indices of all subdomains whose closure contains `p`, in ascending order.
pub fn locate_coverage(decomposition: &Decomposition, p: Point) -> Vec<usize> {
    if !decomposition.domain.contains(p) {
        return Vec::new();
    }
    decomposition
        .subdomains
        .iter()
        .enumerate()
        .filter(|(_, r)| r.contains(p))
        .map(|(s, _)| s)
        .collect()
}

/// One-dimensional ramp: 1 on the core, falling linearly to 0 across each
/// interior overlap strip of width `delta`, and 0 outside `[lo, hi]`.
fn ramp(v: f64, lo: f64, hi: f64, lo_interior: bool, hi_interior: bool, delta: f64) -> f64 {
    if v < lo || v > hi {
        return 0.0;
    }
    let mut w = 1.0_f64;
    if lo_interior && v < lo + delta {
        w = w.min((v - lo) / delta);
    }
    if hi_interior && v > hi - delta {
        w = w.min((hi - v) / delta);
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    decomposition: Decomposition,
}

pub fn make_partition_of_unity(decomposition: &Decomposition) -> PartitionOfUnity {
    PartitionOfUnity {
        decomposition: decomposition.clone(),
    }
}

impl PartitionOfUnity {
    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    fn raw_weight(&self, s: usize, p: Point) -> f64 {
        let d = &self.decomposition;
        let r = &d.subdomains[s];
        let f = &d.interior_edge_flags[s];
        let delta = d.overlap_width;
        let wx = ramp(p[0], r.x_lo, r.x_hi, f.left, f.right, delta);
        if wx == 0.0 {
            return 0.0;
        }
        wx * ramp(p[1], r.y_lo, r.y_hi, f.bottom, f.top, delta)
    }

    /// Non-zero weights `(s, χ_s(p))` in ascending subdomain order. Empty
    /// outside the domain.
    pub fn weights(&self, p: Point) -> Vec<(usize, f64)> {
        if !self.decomposition.domain.contains(p) {
            return Vec::new();
        }
        let mut raw: Vec<(usize, f64)> = (0..self.decomposition.len())
            .map(|s| (s, self.raw_weight(s, p)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            for (_, w) in raw.iter_mut() {
                *w /= total;
            }
        }
        raw
    }

    pub fn evaluate(&self, s: usize, p: Point) -> f64 {
        self.weights(p)
            .into_iter()
            .find(|(r, _)| *r == s)
            .map_or(0.0, |(_, w)| w)
    }
}

/// A scalar function of the plane. Implemented by networks and by plain
/// closures so that blending can be driven by either.
pub trait ScalarField {
    fn value_at(&self, p: Point) -> f64;

    fn values_at(&self, points: &[Point]) -> Vec<f64> {
        points.iter().map(|&p| self.value_at(p)).collect()
    }
}

impl<F: Fn(Point) -> f64> ScalarField for F {
    fn value_at(&self, p: Point) -> f64 {
        self(p)
    }
}

/// `Σ_s χ_s(p)·u_s(p)`; subdomains with zero weight are not evaluated.
pub fn blend_solutions<M: ScalarField>(
    pou: &PartitionOfUnity,
    evaluators: &[M],
    p: Point,
) -> Result<f64> {
    check_evaluators(pou, evaluators.len())?;
    if !pou.decomposition.domain.contains(p) {
        return Err(Error::OutsideDomain { x: p[0], y: p[1] });
    }
    Ok(pou
        .weights(p)
        .into_iter()
        .map(|(s, w)| w * evaluators[s].value_at(p))
        .sum())
}

/// Batched form of [`blend_solutions`]: each evaluator is called once with
/// all points in its support.
pub fn blend_many<M: ScalarField>(
    pou: &PartitionOfUnity,
    evaluators: &[M],
    points: &[Point],
) -> Result<Vec<f64>> {
    check_evaluators(pou, evaluators.len())?;
    if let Some(p) = points
        .iter()
        .find(|p| !pou.decomposition.domain.contains(**p))
    {
        return Err(Error::OutsideDomain { x: p[0], y: p[1] });
    }
    let weights: Vec<Vec<(usize, f64)>> = points.iter().map(|&p| pou.weights(p)).collect();
    let mut per_subdomain: Vec<Vec<usize>> = vec![Vec::new(); evaluators.len()];
    for (k, ws) in weights.iter().enumerate() {
        for (s, _) in ws {
            per_subdomain[*s].push(k);
        }
    }
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(evaluators.len());
    for (s, idx) in per_subdomain.iter().enumerate() {
        let pts: Vec<Point> = idx.iter().map(|&k| points[k]).collect();
        values.push(if pts.is_empty() {
            Vec::new()
        } else {
            evaluators[s].values_at(&pts)
        });
    }
    // Accumulate in ascending subdomain order per point, as the pointwise
    // version does.
    let mut cursor = vec![0usize; evaluators.len()];
    Ok(weights
        .iter()
        .map(|ws| {
            ws.iter()
                .map(|&(s, w)| {
                    let v = values[s][cursor[s]];
                    cursor[s] += 1;
                    w * v
                })
                .sum()
        })
        .collect())
}

fn check_evaluators(pou: &PartitionOfUnity, n: usize) -> Result<()> {
    if n != pou.decomposition.len() {
        return Err(Error::Shape(format!(
            "{n} evaluators for {} subdomains",
            pou.decomposition.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    fn rect_close(r: &Rect, e: [f64; 4]) -> bool {
        close(r.x_lo, e[0]) && close(r.x_hi, e[1]) && close(r.y_lo, e[2]) && close(r.y_hi, e[3])
    }

    #[test]
    fn single_subdomain_is_the_domain() {
        let d = make_regular_decomposition(Rect::unit(), 1, 1, 0.3).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.subdomains[0], Rect::unit());
        assert!(!d.interior_edge_flags[0].any());
    }

    #[test]
    fn two_by_two_extension() {
        let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
        assert!(close(d.overlap_width, 0.15));
        assert!(rect_close(&d.subdomains[0], [0.0, 0.575, 0.0, 0.575]));
        assert!(rect_close(&d.subdomains[1], [0.425, 1.0, 0.0, 0.575]));
        assert!(rect_close(&d.subdomains[3], [0.425, 1.0, 0.425, 1.0]));
        let f = d.interior_edge_flags[0];
        assert!(f.right && f.top && !f.left && !f.bottom);
    }

    #[test]
    fn non_square_domain() {
        let dom = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
        let d = make_regular_decomposition(dom, 2, 1, 0.3).unwrap();
        assert!(close(d.overlap_width, 0.3));
        assert!(rect_close(&d.subdomains[0], [0.0, 1.15, 0.0, 1.0]));
        assert!(rect_close(&d.subdomains[1], [0.85, 2.0, 0.0, 1.0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_regular_decomposition(Rect::unit(), 0, 2, 0.3).is_err());
        assert!(make_regular_decomposition(Rect::unit(), 2, 0, 0.3).is_err());
        assert!(make_regular_decomposition(Rect::unit(), 2, 2, 0.0).is_err());
        assert!(make_regular_decomposition(Rect::unit(), 2, 2, 1.5).is_err());
        let flat = Rect {
            x_lo: 0.0,
            x_hi: 0.0,
            y_lo: 0.0,
            y_hi: 1.0,
        };
        assert!(make_regular_decomposition(flat, 2, 2, 0.3).is_err());
        // Thin tiles: 0.9 * 1.0 >= 0.25
        let wide = Rect::new(0.0, 1.0, 0.0, 0.25).unwrap();
        assert!(make_regular_decomposition(wide, 1, 1, 0.9).is_err());
    }

    #[test]
    fn pou_examples() {
        let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
        let pou = make_partition_of_unity(&d);
        assert_eq!(pou.weights([0.1, 0.1]), vec![(0, 1.0)]);
        assert_eq!(pou.evaluate(0, [0.575, 0.2]), 0.0);
        let w: Vec<f64> = (0..4).map(|s| pou.evaluate(s, [0.5, 0.1])).collect();
        assert!(close(w[0], 0.5) && close(w[1], 0.5));
        assert_eq!(w[2], 0.0);
        assert_eq!(w[3], 0.0);
    }

    #[test]
    fn coverage_examples() {
        let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
        assert_eq!(locate_coverage(&d, [0.1, 0.1]), vec![0]);
        assert_eq!(locate_coverage(&d, [0.5, 0.5]), vec![0, 1, 2, 3]);
        assert!(locate_coverage(&d, [1.5, 0.5]).is_empty());
    }

    #[test]
    fn blend_examples() {
        let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
        let pou = make_partition_of_unity(&d);
        let fs: Vec<Box<dyn Fn(Point) -> f64>> = vec![
            Box::new(|_| 2.0),
            Box::new(|_| 4.0),
            Box::new(|_| panic!("outside support")),
            Box::new(|_| panic!("outside support")),
        ];
        let v = blend_solutions(&pou, &fs, [0.5, 0.1]).unwrap();
        assert!(close(v, 3.0));

        let core = [|_: Point| 3.7, |_| 0.0, |_| 0.0, |_| 0.0];
        assert_eq!(blend_solutions(&pou, &core, [0.1, 0.1]).unwrap(), 3.7);
        assert!(matches!(
            blend_solutions(&pou, &core, [1.5, 0.1]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(blend_solutions(&pou, &core[..2], [0.1, 0.1]).is_err());
    }

    #[test]
    fn batched_blend_matches_pointwise() {
        let d = make_regular_decomposition(Rect::unit(), 3, 2, 0.3).unwrap();
        let pou = make_partition_of_unity(&d);
        let fs: Vec<_> = (0..d.len())
            .map(|s| move |p: Point| (s as f64 + 1.0) * p[0] - p[1] * p[1])
            .collect();
        let pts: Vec<Point> = (0..40)
            .map(|k| [(k as f64 * 0.61803) % 1.0, (k as f64 * 0.41421) % 1.0])
            .collect();
        let batched = blend_many(&pou, &fs, &pts).unwrap();
        for (p, b) in pts.iter().zip(&batched) {
            assert_eq!(blend_solutions(&pou, &fs, *p).unwrap(), *b);
        }
    }
}
