use std::fs;

use deepddm::config::RunConfig;
use deepddm::experiment::{
    median_series, metrics_csv, parse_metrics_csv, points_csv, run_experiment, sampled_points, sweep,
    SweepAxis,
};
use deepddm::geometry::{make_partition_of_unity, make_regular_decomposition, Point, Rect};
use deepddm::losses::Mode;
use deepddm::metrics::blend_errors;
use deepddm::neuralnet::read_checkpoint;
use deepddm::problems::PoissonProblem;
use deepddm::sampling::evaluation_grid;

fn tiny() -> RunConfig {
    let mut c = RunConfig::default();
    c.seeds = vec![1, 2, 3];
    c.budgets.n_interior_total = 160;
    c.budgets.n_boundary_interface_total = 64;
    c.budgets.n_coarse = 50;
    c.architecture.hidden = vec![6];
    c.schedule.epochs_per_training = 4;
    c.schedule.outer_iterations = 2;
    c.evaluation.nx = 10;
    c.evaluation.ny = 10;
    c
}

#[test]
fn zero_solution_error_matches_quadrature() {
    // Grid mean of (2 sin πx sin πy)² over a 100 × 100 grid with endpoints:
    // the mean of sin²(πk/99) over k = 0..99 is 99/200.
    let expected = 4.0 * (99.0_f64 / 200.0).powi(2);
    let d = make_regular_decomposition(Rect::unit(), 2, 2, 0.3).unwrap();
    let pou = make_partition_of_unity(&d);
    let problem = PoissonProblem::on_unit_square(1.0, 1.0).unwrap();
    let grid = evaluation_grid(&Rect::unit(), 100, 100).unwrap();
    let zero = |_: Point| 0.0;
    let (mse, rel) = blend_errors(&pou, &[zero; 4], &problem, &grid).unwrap();
    assert!((mse - expected).abs() <= 1e-12, "{mse} vs {expected}");
    assert_eq!(rel, 1.0);
}

#[test]
fn experiment_writes_layout_and_median() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny();
    let res = run_experiment(&c, Some(dir.path()), |_, _| {}).unwrap();
    assert_eq!(res.runs.len(), 3);

    let echo = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert_eq!(RunConfig::from_toml_str(&echo).unwrap(), c);

    let median = parse_metrics_csv(&fs::read_to_string(dir.path().join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(median.len(), c.schedule.outer_iterations + 1);
    assert_eq!(median, res.median);

    for seed in &c.seeds {
        let sd = dir.path().join(format!("seed_{seed}"));
        let text = fs::read_to_string(sd.join("metrics.csv")).unwrap();
        let parsed = parse_metrics_csv(&text).unwrap();
        assert_eq!(metrics_csv(&parsed).unwrap(), text);
        for s in 0..4 {
            let f = fs::File::open(sd.join(format!("subdomain_{s}.ckpt"))).unwrap();
            let net = read_checkpoint(std::io::BufReader::new(f)).unwrap();
            assert_eq!(net.layer_sizes(), &[2, 6, 1]);
        }
        assert!(sd.join("coarse.ckpt").exists());
    }
    let mse: Vec<f64> = res.runs.iter().map(|r| r.metrics[2].global_mse).collect();
    let mut sorted = mse.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(res.median[2].global_mse, sorted[1]);
}

#[test]
fn median_is_permutation_invariant() {
    let c = tiny();
    let res = run_experiment(&c, None, |_, _| {}).unwrap();
    let mut series: Vec<_> = res.runs.iter().map(|r| r.metrics.clone()).collect();
    series.rotate_left(1);
    series.swap(0, 1);
    assert_eq!(median_series(&series).unwrap(), res.median);
}

#[test]
fn reruns_reproduce_metrics_and_checkpoints() {
    let mut c = tiny();
    c.seeds = vec![9];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&c, Some(a.path()), |_, _| {}).unwrap();
    run_experiment(&c, Some(b.path()), |_, _| {}).unwrap();
    let strip = |p: &std::path::Path| {
        let mut m = parse_metrics_csv(&fs::read_to_string(p).unwrap()).unwrap();
        m.iter_mut().for_each(|r| r.wall_seconds = 0.0);
        m
    };
    assert_eq!(strip(&a.path().join("seed_9/metrics.csv")), strip(&b.path().join("seed_9/metrics.csv")));
    for name in ["subdomain_0.ckpt", "subdomain_3.ckpt", "coarse.ckpt"] {
        let read = |d: &tempfile::TempDir| fs::read(d.path().join("seed_9").join(name)).unwrap();
        assert_eq!(read(&a), read(&b), "{name}");
    }
}

#[test]
fn grid_sweep_keeps_totals_and_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny();
    c.seeds = vec![0];
    c.mode = Mode::OneLevel;
    let cells = sweep(&c, &SweepAxis::Grids(vec![(1, 1), (2, 2)]), Some(dir.path()), |_, _, _| {}).unwrap();
    assert_eq!(cells.len(), 2);
    for cell in &cells {
        let state = deepddm::schwarz::init_run(&cell.config, 0).unwrap();
        let total: usize = state.fine_sets.iter().map(|s| s.interior.len()).sum();
        assert_eq!(total, 160);
        assert!(dir.path().join(&cell.label).join("metrics.csv").exists());
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert!(lines[0].starts_with("cell,nx,ny,epochs_per_training,iteration,global_mse"));
    assert_eq!(lines.len(), 1 + 2 * (c.schedule.outer_iterations + 1));
    assert!(lines[1].starts_with("grid_1x1,1,1,4,0,"));
}

#[test]
fn epoch_sweep_varies_only_epochs() {
    let mut c = tiny();
    c.seeds = vec![0];
    c.schedule.outer_iterations = 1;
    let cells = sweep(&c, &SweepAxis::EpochsPerTraining(vec![2, 5]), None, |_, _, _| {}).unwrap();
    let mut a = cells[0].config.clone();
    a.schedule.epochs_per_training = 5;
    assert_eq!(a, cells[1].config);
    assert!(sweep(&c, &SweepAxis::EpochsPerTraining(vec![]), None, |_, _, _| {}).is_err());
}

#[test]
fn point_dump_counts_every_budget() {
    let c = tiny();
    let rows = sampled_points(&c).unwrap();
    let b = &c.budgets;
    assert_eq!(rows.len(), b.n_interior_total + b.n_boundary_interface_total + b.n_coarse);
    let text = points_csv(&rows).unwrap();
    assert_eq!(text.lines().count(), rows.len() + 1);
    assert_eq!(text.lines().next(), Some("x,y,role,owner"));
    for role in ["interior", "boundary", "interface", "coarse"] {
        assert!(rows.iter().any(|r| r.role == role), "{role}");
    }
}
