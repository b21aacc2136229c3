use deepddm::geometry::{make_regular_decomposition, Rect};
use deepddm::sampling::{allocate_budgets, sample_all};

#[test]
fn totals_are_fixed_across_grids() {
    for (nx, ny) in [(1, 1), (2, 2), (3, 3), (4, 4), (6, 6)] {
        let d = make_regular_decomposition(Rect::unit(), nx, ny, 0.3).unwrap();
        let b = allocate_budgets(30_000, 16_000, &d).unwrap();
        let (fine, coarse) = sample_all(&d, &b, 4_000, 5).unwrap();
        let interior: usize = fine.iter().map(|s| s.interior.len()).sum();
        let edges: usize = fine.iter().map(|s| s.outer_boundary.len() + s.interface.len()).sum();
        assert_eq!(interior, 30_000, "{nx}x{ny}");
        assert_eq!(edges, 16_000, "{nx}x{ny}");
        assert_eq!(coarse.interior.len(), 4_000);
        let outer: usize = fine.iter().map(|s| s.outer_boundary.len()).sum();
        assert_eq!(coarse.outer_boundary.len(), outer);
    }
}

#[test]
fn samples_lie_where_they_belong() {
    let d = make_regular_decomposition(Rect::unit(), 3, 2, 0.3).unwrap();
    let b = allocate_budgets(3_000, 1_200, &d).unwrap();
    let (fine, coarse) = sample_all(&d, &b, 500, 9).unwrap();
    for (s, set) in fine.iter().enumerate() {
        let r = d.subdomains[s];
        assert!(set.interior.iter().all(|&p| r.contains_strictly(p)));
        assert!(set.outer_boundary.iter().all(|&p| Rect::unit().on_boundary(p, 1e-12)));
        for &p in &set.interface {
            assert!(r.on_boundary(p, 1e-12));
            assert!(Rect::unit().contains_strictly(p) || !Rect::unit().on_boundary(p, 1e-12));
        }
    }
    assert!(coarse.interior.iter().all(|&p| Rect::unit().contains_strictly(p)));
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
    let b = allocate_budgets(2_000, 800, &d).unwrap();
    assert_eq!(sample_all(&d, &b, 300, 1).unwrap(), sample_all(&d, &b, 300, 1).unwrap());
    assert_ne!(sample_all(&d, &b, 300, 1).unwrap().0, sample_all(&d, &b, 300, 2).unwrap().0);
}
