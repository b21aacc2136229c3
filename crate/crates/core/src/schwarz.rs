//! Additive overlapping Schwarz iteration with a PINN solve per subdomain
//! and, in two-level mode, a coarse network on the whole domain.
//!
//! Each outer iteration trains all local networks (and the coarse network)
//! against frozen data from the previous iteration, then refreshes the
//! snapshots, the fine blend at the coarse points and the interface
//! targets, and finally advances the coupling schedule.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    blend_many, make_partition_of_unity, make_regular_decomposition, PartitionOfUnity, Point, Rect,
};
use crate::losses::{
    coarse_loss_spec, local_loss_spec, schedule_weights, update_interface_targets, InterfaceTargets,
    LossWeights, Mode, Schedule,
};
use crate::metrics::{compute_metrics, IterationMetrics};
use crate::neuralnet::{init_network, loss_value, train, AdamConfig, LossSpec, Network, OptimizerState};
use crate::problems::PoissonProblem;
use crate::sampling::{allocate_budgets, derive_seed, evaluation_grid, sample_all, SampleSets};

/// Seed streams below the run seed.
const STREAM_SAMPLES: u64 = 0;
const STREAM_LOCAL: u64 = 1;
const STREAM_COARSE: u64 = 2;

/// A network together with the optimizer state that trains it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainee {
    pub network: Network,
    pub optimizer: OptimizerState,
}

impl Trainee {
    fn new(network: Network, config: AdamConfig) -> Self {
        let optimizer = OptimizerState::new(&network, config);
        Trainee { network, optimizer }
    }

    fn train(&mut self, spec: &LossSpec, epochs: usize, reset: bool, name: impl Fn() -> String) -> Result<f64> {
        if reset {
            self.optimizer = OptimizerState::new(&self.network, self.optimizer.config);
        }
        train(&mut self.network, &mut self.optimizer, spec, epochs).map_err(|e| match e {
            Error::Diverged { epoch, .. } => Error::Diverged { network: name(), epoch },
            other => other,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SchwarzState {
    pub iteration_index: usize,
    pub mode: Mode,
    pub problem: PoissonProblem,
    pub pou: PartitionOfUnity,
    pub fine_sets: Vec<SampleSets>,
    pub coarse_sets: SampleSets,
    pub locals: Vec<Trainee>,
    /// Present in two-level mode only.
    pub coarse: Option<Trainee>,
    /// Local networks as they were at the end of the previous iteration.
    pub snapshots: Vec<Network>,
    pub coarse_snapshot: Option<Network>,
    pub interface_targets: Vec<InterfaceTargets>,
    /// Fine blend at the coarse interior points; absent before the first
    /// iteration and in one-level mode.
    pub fine_blend_values: Option<Vec<f64>>,
    pub lambda_f: f64,
    pub lambda_c: f64,
    /// Loss of each local network after its latest training.
    pub local_losses: Vec<f64>,
    pub coarse_loss: Option<f64>,
    /// `(λ_f, λ_c)` in force at each iteration index reached so far.
    pub weight_history: Vec<(f64, f64)>,
    base_weights: LossWeights,
    schedule: Schedule,
    reset_optimizer_state: bool,
}

/// Which reconstruction [`global_solution`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    /// Partition-of-unity blend of the local networks.
    Fine,
    Coarse,
}

fn interface_values(
    pou: &PartitionOfUnity,
    snapshots: &[Network],
    coarse: Option<&Network>,
    sets: &[SampleSets],
    lambda_c: f64,
) -> Result<Vec<InterfaceTargets>> {
    sets.iter()
        .enumerate()
        .map(|(s, set)| {
            // χ_s vanishes on its own interface, so the full blend is the
            // blend over the neighbours.
            let neighbor = blend_many(pou, snapshots, &set.interface)?;
            let coarse_vals = coarse.map(|c| c.values(&set.interface));
            let values = neighbor
                .iter()
                .enumerate()
                .map(|(k, &n)| update_interface_targets(n, coarse_vals.as_ref().map(|c| c[k]), lambda_c))
                .collect::<Result<Vec<f64>>>()?;
            Ok(InterfaceTargets {
                subdomain: s,
                points: set.interface.clone(),
                values,
            })
        })
        .collect()
}

impl SchwarzState {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_f: self.lambda_f,
            lambda_c: self.lambda_c,
            ..self.base_weights
        }
    }

    /// Copies of the current local networks.
    pub fn local_networks(&self) -> Vec<Network> {
        self.locals.iter().map(|t| t.network.clone()).collect()
    }

    pub fn subdomain_count(&self) -> usize {
        self.locals.len()
    }
}

/// Samples every point set, initializes all networks and sets the initial
/// interface targets from the untrained neighbours.
pub fn init_run(config: &RunConfig, seed: u64) -> Result<SchwarzState> {
    config.validate()?;
    let problem = config.problem()?;
    let d = &config.decomposition;
    let decomposition = make_regular_decomposition(Rect::unit(), d.nx, d.ny, d.overlap_fraction)?;
    let pou = make_partition_of_unity(&decomposition);
    let b = &config.budgets;
    let budgets = allocate_budgets(b.n_interior_total, b.n_boundary_interface_total, &decomposition)?;
    let (fine_sets, coarse_sets) = sample_all(
        &decomposition,
        &budgets,
        b.n_coarse,
        derive_seed(seed, &[STREAM_SAMPLES]),
    )?;

    let sizes = config.layer_sizes();
    let activation = config.architecture.activation;
    let adam = config.adam();
    let locals = (0..decomposition.len())
        .map(|s| {
            let net = init_network(&sizes, activation, derive_seed(seed, &[STREAM_LOCAL, s as u64]))?;
            Ok(Trainee::new(net, adam))
        })
        .collect::<Result<Vec<_>>>()?;
    let coarse = match config.mode {
        Mode::OneLevel => None,
        Mode::TwoLevel => {
            let net = init_network(&sizes, activation, derive_seed(seed, &[STREAM_COARSE]))?;
            Some(Trainee::new(net, adam))
        }
    };

    let snapshots: Vec<Network> = locals.iter().map(|t| t.network.clone()).collect();
    let coarse_snapshot = coarse.as_ref().map(|t| t.network.clone());
    let interface_targets = interface_values(&pou, &snapshots, None, &fine_sets, 1.0)?;
    let schedule = config.coupling_schedule();
    let (lambda_f, lambda_c) = schedule_weights(0, config.mode, &schedule);

    let mut state = SchwarzState {
        iteration_index: 0,
        mode: config.mode,
        problem,
        pou,
        fine_sets,
        coarse_sets,
        locals,
        coarse,
        snapshots,
        coarse_snapshot,
        interface_targets,
        fine_blend_values: None,
        lambda_f,
        lambda_c,
        local_losses: Vec::new(),
        coarse_loss: None,
        weight_history: vec![(lambda_f, lambda_c)],
        base_weights: config.loss_weights(lambda_f, lambda_c),
        schedule,
        reset_optimizer_state: config.reset_optimizer_state,
    };
    state.local_losses = state
        .locals
        .iter()
        .zip(&state.fine_sets)
        .zip(&state.interface_targets)
        .map(|((t, set), targets)| {
            loss_value(&t.network, &local_loss_spec(set, &state.problem, targets, &state.weights())?)
        })
        .collect::<Result<_>>()?;
    if let Some(c) = &state.coarse {
        let spec = coarse_loss_spec(&state.coarse_sets, &state.problem, None, &state.weights())?;
        state.coarse_loss = Some(loss_value(&c.network, &spec)?);
    }
    Ok(state)
}

/// One outer iteration; see the module documentation for the order of
/// steps.
pub fn outer_iteration(state: &mut SchwarzState, epochs: usize) -> Result<()> {
    let weights = state.weights();
    let reset = state.reset_optimizer_state;
    let problem = state.problem;

    let local_specs = state
        .fine_sets
        .iter()
        .zip(&state.interface_targets)
        .map(|(set, targets)| local_loss_spec(set, &problem, targets, &weights))
        .collect::<Result<Vec<_>>>()?;
    let coarse_spec = match state.coarse {
        Some(_) => Some(coarse_loss_spec(
            &state.coarse_sets,
            &problem,
            state.fine_blend_values.as_deref(),
            &weights,
        )?),
        None => None,
    };

    let locals = &mut state.locals;
    let coarse = &mut state.coarse;
    let (local_results, coarse_result) = rayon::join(
        || {
            locals
                .par_iter_mut()
                .zip(local_specs.par_iter())
                .enumerate()
                .map(|(s, (t, spec))| t.train(spec, epochs, reset, || format!("subdomain {s}")))
                .collect::<Vec<Result<f64>>>()
        },
        || match (coarse.as_mut(), coarse_spec.as_ref()) {
            (Some(t), Some(spec)) => Some(t.train(spec, epochs, reset, || "coarse".to_string())),
            _ => None,
        },
    );
    state.local_losses = local_results.into_iter().collect::<Result<Vec<_>>>()?;
    state.coarse_loss = coarse_result.transpose()?;

    state.snapshots = state.locals.iter().map(|t| t.network.clone()).collect();
    state.coarse_snapshot = state.coarse.as_ref().map(|t| t.network.clone());
    if state.coarse.is_some() {
        state.fine_blend_values = Some(blend_many(&state.pou, &state.snapshots, &state.coarse_sets.interior)?);
    }
    state.interface_targets = interface_values(
        &state.pou,
        &state.snapshots,
        state.coarse_snapshot.as_ref(),
        &state.fine_sets,
        state.lambda_c,
    )?;

    state.iteration_index += 1;
    let (lambda_f, lambda_c) = schedule_weights(state.iteration_index, state.mode, &state.schedule);
    state.lambda_f = lambda_f;
    state.lambda_c = lambda_c;
    state.weight_history.push((lambda_f, lambda_c));
    Ok(())
}

/// Initializes and runs `outer_iterations` iterations, recording metrics
/// after initialization and after every iteration. `progress` sees each
/// record as soon as it exists.
pub fn run(
    config: &RunConfig,
    seed: u64,
    mut progress: impl FnMut(&IterationMetrics),
) -> Result<(SchwarzState, Vec<IterationMetrics>)> {
    let start = Instant::now();
    let grid = evaluation_grid(&Rect::unit(), config.evaluation.nx, config.evaluation.ny)?;
    let mut state = init_run(config, seed)?;
    let mut history = Vec::with_capacity(config.schedule.outer_iterations + 1);
    let first = compute_metrics(&state, &grid, start.elapsed().as_secs_f64())?;
    progress(&first);
    history.push(first);
    for _ in 0..config.schedule.outer_iterations {
        outer_iteration(&mut state, config.schedule.epochs_per_training)?;
        let m = compute_metrics(&state, &grid, start.elapsed().as_secs_f64())?;
        progress(&m);
        history.push(m);
    }
    Ok((state, history))
}

/// Solution value at `p` from the chosen reconstruction.
pub fn global_solution(state: &SchwarzState, p: Point, which: Reconstruction) -> Result<f64> {
    if !state.pou.decomposition().domain.contains(p) {
        return Err(Error::OutsideDomain { x: p[0], y: p[1] });
    }
    match which {
        Reconstruction::Fine => Ok(blend_many(&state.pou, &state.local_networks(), &[p])?[0]),
        Reconstruction::Coarse => state
            .coarse
            .as_ref()
            .map(|c| c.network.values(&[p])[0])
            .ok_or_else(|| Error::Other("one-level run has no coarse network".into())),
    }
}

/// One human-readable progress line.
pub fn progress_line(m: &IterationMetrics) -> String {
    let losses: Vec<String> = m.per_subdomain_final_loss.iter().map(|l| format!("{l:.3e}")).collect();
    format!(
        "iteration {:>3}  mse {:.4e}  losses [{}]  elapsed {:.1}s",
        m.iteration_index,
        m.global_mse,
        losses.join(", "),
        m.wall_seconds
    )
}
