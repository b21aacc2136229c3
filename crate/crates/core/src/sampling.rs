//! Collocation point generation: Latin hypercube samples in rectangles,
//! stratified samples on edges, and the budget split across subdomains.

use std::fmt;

use rand::distributions::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Decomposition, Edge, Point, Rect};

/// Mixes a master seed with a stream path into an independent seed
/// (SplitMix64 finaliser applied per component).
pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    stream.iter().fold(mix(master), |acc, &s| mix(acc ^ mix(s)))
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn latin_hypercube(n: usize, rect: &Rect, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::Sampling("latin hypercube needs n >= 1".into()));
    }
    let mut rng = rng_from(seed);
    let mut axis = |lo: f64, width: f64| -> Vec<f64> {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        strata
            .into_iter()
            .map(|k| {
                let u: f64 = rng.sample(Open01);
                lo + (k as f64 + u) / n as f64 * width
            })
            .collect()
    };
    let xs = axis(rect.x_lo, rect.width());
    let ys = axis(rect.y_lo, rect.height());
    Ok(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect())
}

/// `n` points on one edge of `rect`, one per equal-length stratum.
pub fn sample_edge(n: usize, rect: &Rect, edge: Edge, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::Sampling("edge sampling needs n >= 1".into()));
    }
    let mut rng = rng_from(seed);
    let (a, b) = rect.edge_segment(edge);
    Ok((0..n)
        .map(|k| {
            let u: f64 = rng.sample(Open01);
            let t = (k as f64 + u) / n as f64;
            match edge {
                Edge::Left | Edge::Right => [a[0], a[1] + t * (b[1] - a[1])],
                Edge::Bottom | Edge::Top => [a[0] + t * (b[0] - a[0]), a[1]],
            }
        })
        .collect())
}

impl std::str::FromStr for Edge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Edge::Left),
            "right" => Ok(Edge::Right),
            "bottom" => Ok(Edge::Bottom),
            "top" => Ok(Edge::Top),
            other => Err(Error::Sampling(format!("unknown edge id `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Subdomain(usize),
    Coarse,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Subdomain(s) => write!(f, "{s}"),
            Owner::Coarse => f.write_str("coarse"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSets {
    pub owner: Owner,
    pub rect: Rect,
    pub interior: Vec<Point>,
    pub outer_boundary: Vec<Point>,
    pub interface: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubdomainBudget {
    pub interior: usize,
    /// Point count per edge, in `Edge::ALL` order; outer and interface
    /// edges share one budget.
    pub edges: Vec<(Edge, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Budgets {
    pub per_subdomain: Vec<SubdomainBudget>,
}

impl Budgets {
    pub fn total_interior(&self) -> usize {
        self.per_subdomain.iter().map(|b| b.interior).sum()
    }

    pub fn total_edges(&self) -> usize {
        self.per_subdomain
            .iter()
            .flat_map(|b| b.edges.iter().map(|(_, n)| n))
            .sum()
    }
}

/// Largest-remainder split of `total` proportional to `weights`, with at
/// least one unit per entry. Ties go to the larger weight, then the lower
/// index.
fn split_proportional(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa)
            .then(weights[b].total_cmp(&weights[a]))
            .then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    while let Some(zero) = counts.iter().position(|&c| c == 0) {
        let donor = (0..counts.len())
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .expect("non-empty");
        counts[donor] -= 1;
        counts[zero] += 1;
    }
    counts
}

pub fn allocate_budgets(
    total_interior: usize,
    total_boundary_interface: usize,
    decomposition: &Decomposition,
) -> Result<Budgets> {
    let s_count = decomposition.len();
    let edge_count = 4 * s_count;
    if total_interior < s_count {
        return Err(Error::Sampling(format!(
            "interior budget {total_interior} cannot give one point to each of {s_count} subdomains"
        )));
    }
    if total_boundary_interface < edge_count {
        return Err(Error::Sampling(format!(
            "boundary/interface budget {total_boundary_interface} cannot give one point to each of {edge_count} edges"
        )));
    }
    let areas: Vec<f64> = decomposition.subdomains.iter().map(Rect::area).collect();
    let interior = split_proportional(total_interior, &areas);

    let lengths: Vec<f64> = decomposition
        .subdomains
        .iter()
        .flat_map(|r| Edge::ALL.iter().map(move |&e| r.edge_length(e)))
        .collect();
    let edge_counts = split_proportional(total_boundary_interface, &lengths);

    let per_subdomain = (0..s_count)
        .map(|s| SubdomainBudget {
            interior: interior[s],
            edges: Edge::ALL
                .iter()
                .enumerate()
                .map(|(k, &e)| (e, edge_counts[4 * s + k]))
                .collect(),
        })
        .collect();
    Ok(Budgets { per_subdomain })
}

/// Samples every subdomain and the coarse level once.
///
/// The coarse boundary set is the union of all fine outer-boundary points,
/// so it carries the fine per-length density without a separate budget.
pub fn sample_all(
    decomposition: &Decomposition,
    budgets: &Budgets,
    coarse_n: usize,
    seed: u64,
) -> Result<(Vec<SampleSets>, SampleSets)> {
    if budgets.per_subdomain.len() != decomposition.len() {
        return Err(Error::Sampling(format!(
            "budgets for {} subdomains, decomposition has {}",
            budgets.per_subdomain.len(),
            decomposition.len()
        )));
    }
    let mut fine = Vec::with_capacity(decomposition.len());
    for (s, (rect, budget)) in decomposition
        .subdomains
        .iter()
        .zip(&budgets.per_subdomain)
        .enumerate()
    {
        let flags = decomposition.interior_edge_flags[s];
        let interior = latin_hypercube(budget.interior, rect, derive_seed(seed, &[1, s as u64]))?;
        let mut outer_boundary = Vec::new();
        let mut interface = Vec::new();
        for (k, &(edge, n)) in budget.edges.iter().enumerate() {
            let pts = sample_edge(n, rect, edge, derive_seed(seed, &[2, s as u64, k as u64]))?;
            if flags.is_interior(edge) {
                interface.extend(pts);
            } else {
                outer_boundary.extend(pts);
            }
        }
        fine.push(SampleSets {
            owner: Owner::Subdomain(s),
            rect: *rect,
            interior,
            outer_boundary,
            interface,
        });
    }
    let coarse = SampleSets {
        owner: Owner::Coarse,
        rect: decomposition.domain,
        interior: latin_hypercube(coarse_n, &decomposition.domain, derive_seed(seed, &[3]))?,
        outer_boundary: fine
            .iter()
            .flat_map(|f| f.outer_boundary.iter().copied())
            .collect(),
        interface: Vec::new(),
    };
    Ok((fine, coarse))
}

/// Uniform tensor grid including the corners; x varies fastest.
pub fn evaluation_grid(domain: &Rect, nx: usize, ny: usize) -> Result<Vec<Point>> {
    if nx < 2 || ny < 2 {
        return Err(Error::Sampling(format!(
            "evaluation grid needs at least 2 x 2 points, got {nx} x {ny}"
        )));
    }
    let coord = |lo: f64, hi: f64, k: usize, n: usize| {
        if k == n - 1 {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    Ok((0..ny)
        .flat_map(|j| {
            (0..nx).map(move |i| {
                [
                    coord(domain.x_lo, domain.x_hi, i, nx),
                    coord(domain.y_lo, domain.y_hi, j, ny),
                ]
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_partition_of_unity, make_regular_decomposition};

    fn strata_counts(values: impl Iterator<Item = f64>, lo: f64, width: f64, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for v in values {
            let k = (((v - lo) / width) * n as f64).floor() as usize;
            counts[k.min(n - 1)] += 1;
        }
        counts
    }

    #[test]
    fn lhs_four_points() {
        let pts = latin_hypercube(4, &Rect::unit(), 7).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(strata_counts(pts.iter().map(|p| p[0]), 0.0, 1.0, 4), vec![1; 4]);
        assert_eq!(strata_counts(pts.iter().map(|p| p[1]), 0.0, 1.0, 4), vec![1; 4]);
    }

    #[test]
    fn lhs_single_and_determinism() {
        let p = latin_hypercube(1, &Rect::unit(), 3).unwrap();
        assert!(Rect::unit().contains(p[0]));
        let r = Rect::new(0.2, 0.9, -1.0, 3.0).unwrap();
        assert_eq!(
            latin_hypercube(50, &r, 11).unwrap(),
            latin_hypercube(50, &r, 11).unwrap()
        );
        assert_ne!(
            latin_hypercube(50, &r, 11).unwrap(),
            latin_hypercube(50, &r, 12).unwrap()
        );
        assert!(latin_hypercube(0, &r, 1).is_err());
    }

    #[test]
    fn edge_samples() {
        let pts = sample_edge(2, &Rect::unit(), Edge::Bottom, 5).unwrap();
        assert!(pts.iter().all(|p| p[1] == 0.0));
        assert!(pts[0][0] >= 0.0 && pts[0][0] < 0.5);
        assert!(pts[1][0] >= 0.5 && pts[1][0] <= 1.0);

        let r = Rect::new(0.0, 0.575, 0.0, 0.575).unwrap();
        let left = sample_edge(1, &r, Edge::Left, 9).unwrap();
        assert_eq!(left[0][0], 0.0);
        assert_eq!(
            sample_edge(30, &r, Edge::Top, 2).unwrap(),
            sample_edge(30, &r, Edge::Top, 2).unwrap()
        );
        assert!("diagonal".parse::<Edge>().is_err());
        assert_eq!("top".parse::<Edge>().unwrap(), Edge::Top);
    }

    #[test]
    fn budgets_single_subdomain() {
        let d = make_regular_decomposition(Rect::unit(), 1, 1, 0.3).unwrap();
        let b = allocate_budgets(30000, 16000, &d).unwrap();
        assert_eq!(b.per_subdomain[0].interior, 30000);
        assert!(b.per_subdomain[0].edges.iter().all(|(_, n)| *n == 4000));
    }

    #[test]
    fn budgets_two_by_two() {
        let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
        let b = allocate_budgets(30000, 16000, &d).unwrap();
        assert!(b.per_subdomain.iter().all(|s| s.interior == 7500));
        assert_eq!(b.total_edges(), 16000);

        let tiny = allocate_budgets(4, 16, &d).unwrap();
        assert!(tiny.per_subdomain.iter().all(|s| s.interior == 1));
        assert!(allocate_budgets(4, 8, &d).is_err());
        assert!(allocate_budgets(3, 16, &d).is_err());
    }

    #[test]
    fn budgets_conserved_for_uneven_splits() {
        let dom = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
        for (nx, ny) in [(3, 2), (5, 3), (4, 4)] {
            let d = make_regular_decomposition(dom, nx, ny, 0.2).unwrap();
            let b = allocate_budgets(1001, 997, &d).unwrap();
            assert_eq!(b.total_interior(), 1001);
            assert_eq!(b.total_edges(), 997);
        }
    }

    #[test]
    fn sample_all_layout() {
        let d = make_regular_decomposition(Rect::unit(), 1, 1, 0.3).unwrap();
        let b = allocate_budgets(100, 40, &d).unwrap();
        let (fine, coarse) = sample_all(&d, &b, 50, 1).unwrap();
        assert!(fine[0].interface.is_empty());
        assert_eq!(fine[0].outer_boundary.len(), 40);
        assert_eq!(coarse.interior.len(), 50);
        assert_eq!(coarse.outer_boundary.len(), 40);

        let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
        let b = allocate_budgets(400, 160, &d).unwrap();
        let (fine, _) = sample_all(&d, &b, 50, 1).unwrap();
        let pou = make_partition_of_unity(&d);
        for p in &fine[0].interface {
            assert!(p[0] == d.subdomains[0].x_hi || p[1] == d.subdomains[0].y_hi);
        }
        for f in &fine {
            let Owner::Subdomain(s) = f.owner else { panic!() };
            assert!(f.interior.iter().all(|p| f.rect.contains_strictly(*p)));
            assert!(f.outer_boundary.iter().all(|p| d.domain.on_boundary(*p, 0.0)));
            assert!(f.interface.iter().all(|p| pou.evaluate(s, *p) == 0.0));
        }
        assert_ne!(fine[0].interior, fine[3].interior);
    }

    #[test]
    fn grid_layout() {
        let g = evaluation_grid(&Rect::unit(), 2, 2).unwrap();
        assert_eq!(g, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let g = evaluation_grid(&Rect::unit(), 3, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], [0.5, 0.0]);
        assert_eq!(evaluation_grid(&Rect::unit(), 7, 4).unwrap().len(), 28);
        assert!(evaluation_grid(&Rect::unit(), 1, 4).is_err());
    }

    #[test]
    fn seeds_differ_by_stream() {
        assert_ne!(derive_seed(0, &[1, 0]), derive_seed(0, &[1, 1]));
        assert_ne!(derive_seed(0, &[1]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(42, &[2, 3]), derive_seed(42, &[2, 3]));
    }
}
