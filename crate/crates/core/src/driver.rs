//! Metric evaluation, the alternating joint optimizer, and the
//! benchmark schemes.
//!
//! One outer iteration runs beamforming, phase optimization, and
//! density reallocation in that order. Every stage keeps its previous
//! answer when a candidate update would lower the honest sum-rate
//! (leakage included), so the per-iteration trace is non-decreasing by
//! construction. The worst-case jammer is computed once before the
//! loop; an optional post-convergence re-optimization measures
//! residual vulnerability.

use crate::beamform::{compose_beamformers, BeamformSet};
use crate::channel::{
    effective_bs_channel, effective_jam_channel, generate_channels, ChannelSet, JammerLinkModel,
};
use crate::config::SystemConfig;
use crate::density::{dt_ara_bisect, dt_ara_sort, ResponseSet};
use crate::error::Result;
use crate::grid::{build_grid, uniform_density, DensityField, Grid};
use crate::jammer::{optimize_jammer, JamOpts, JammerContext, JammerStrategy};
use crate::ris::{optimize_phases, random_phase_field, PhaseField, PhaseOpts, PhaseProblem};
use crate::C64;
use nalgebra::DMatrix;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Full alternating optimization against the worst-case jammer.
    Proposed,
    /// Defense optimized against the jammer estimate, then evaluated
    /// against the worst case.
    S1NonRobust,
    /// Uniform density kept frozen; phases and beams optimized.
    S2UniformOptPhase,
    /// Uniform density and random phases; beams computed once.
    S3UniformRandomPhase,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Proposed,
        Scheme::S1NonRobust,
        Scheme::S2UniformOptPhase,
        Scheme::S3UniformRandomPhase,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::S1NonRobust => "s1",
            Scheme::S2UniformOptPhase => "s2",
            Scheme::S3UniformRandomPhase => "s3",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s.to_ascii_lowercase().as_str() {
            "proposed" => Some(Scheme::Proposed),
            "s1" | "non-robust" => Some(Scheme::S1NonRobust),
            "s2" | "uniform-opt-phase" => Some(Scheme::S2UniformOptPhase),
            "s3" | "uniform-random-phase" => Some(Scheme::S3UniformRandomPhase),
            _ => None,
        }
    }
}

/// Per-user metrics under the honest SINR (inter-user leakage is
/// computed, not assumed zero).
#[derive(Debug, Clone)]
pub struct Metrics {
    pub gamma: Vec<f64>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
}

/// Honest SINRs from the full z-value table.
pub fn metrics_from_z(zb: &[Vec<C64>], zj: &[C64], p_jam: f64, noise: &[f64]) -> Metrics {
    let users = zb.len();
    let gamma: Vec<f64> = (0..users)
        .map(|k| {
            let signal = zb[k][k].norm_sqr();
            let leak: f64 = (0..users)
                .filter(|&i| i != k)
                .map(|i| zb[k][i].norm_sqr())
                .sum();
            signal / (leak + zj[k].norm_sqr() * p_jam + noise[k])
        })
        .collect();
    let rates: Vec<f64> = gamma.iter().map(|&g| (1.0 + g).log2()).collect();
    let sum_rate = rates.iter().sum();
    Metrics { gamma, rates, sum_rate }
}

pub fn metrics(problem: &PhaseProblem, theta: &PhaseField) -> Metrics {
    let (zb, zj) = problem.z_values(theta);
    metrics_from_z(&zb, &zj, problem.p_jam, &problem.noise)
}

#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    pub after_beamform: f64,
    pub after_phase: f64,
    pub after_density: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub channel: Duration,
    pub jammer: Duration,
    pub beamform: Duration,
    pub phase: Duration,
    pub density: Duration,
    pub total: Duration,
}

/// Final defense re-evaluated against a re-optimized jammer.
#[derive(Debug, Clone)]
pub struct WorstCaseReport {
    pub jammer: JammerStrategy,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scheme: Scheme,
    pub trace: Vec<IterationRecord>,
    pub initial_sum_rate: f64,
    pub metrics: Metrics,
    pub rho: DensityField,
    pub theta: PhaseField,
    pub beams: BeamformSet,
    pub jammer: JammerStrategy,
    pub worst_case: Option<WorstCaseReport>,
    pub converged: bool,
    pub iterations: usize,
    pub timings: StageTimings,
}

impl RunReport {
    /// The sum-rate used for scheme comparisons: worst-case when the
    /// re-evaluation ran, the in-loop value otherwise.
    pub fn reported_sum_rate(&self) -> f64 {
        self.worst_case
            .as_ref()
            .map(|w| w.metrics.sum_rate)
            .unwrap_or(self.metrics.sum_rate)
    }
}

struct Stack {
    grid: Grid,
    channels: ChannelSet,
    jlm: JammerLinkModel,
}

fn build_stack(config: &SystemConfig) -> Result<Stack> {
    config.validate()?;
    let grid = build_grid(config);
    let scenario = config.scenario();
    let (channels, jlm) = generate_channels(config, &grid, &scenario)?;
    Ok(Stack { grid, channels, jlm })
}

fn bs_channel_matrix(
    theta: &PhaseField,
    rho: &DensityField,
    channels: &ChannelSet,
    grid: &Grid,
    users: usize,
) -> Result<DMatrix<C64>> {
    let m = channels.cells[0].h_bu.ncols();
    let mut h = DMatrix::<C64>::zeros(users, m);
    for k in 0..users {
        let row = effective_bs_channel(theta, rho, channels, grid, k)?;
        h.set_row(k, &row.transpose());
    }
    Ok(h)
}

/// ZF + water-filling against the current jamming exposure. Returns
/// `None` when the effective channel is too ill-conditioned; callers
/// keep the previous beams.
fn beamform_stage(
    config: &SystemConfig,
    stack: &Stack,
    theta: &PhaseField,
    rho: &DensityField,
    jammer: &JammerStrategy,
) -> Result<Option<BeamformSet>> {
    let h = bs_channel_matrix(theta, rho, &stack.channels, &stack.grid, config.users)?;
    let denoms: Vec<f64> = (0..config.users)
        .map(|k| {
            effective_jam_channel(
                theta,
                rho,
                &stack.channels,
                &stack.grid,
                &stack.jlm,
                jammer.position,
                &jammer.beamformer,
                k,
            )
            .map(|z| z.norm_sqr() * config.p_jam + config.noise_power)
        })
        .collect::<Result<_>>()?;
    match compose_beamformers(&h, &denoms, config.p_bs) {
        Ok(set) => Ok(Some(set)),
        Err(crate::error::Error::SingularChannel { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn build_problem(
    config: &SystemConfig,
    stack: &Stack,
    rho: &DensityField,
    beams: &BeamformSet,
    jammer: &JammerStrategy,
) -> PhaseProblem {
    PhaseProblem::build(
        &stack.channels,
        &stack.grid,
        rho,
        &beams.w,
        &stack.jlm,
        jammer.position,
        &jammer.beamformer,
        config.p_jam,
        config.noise_power,
    )
}

/// Accepted density step: the new field plus the state that makes it
/// pay off (re-zero-forced beams, re-adapted phases).
struct DensityStep {
    rho: DensityField,
    beams: BeamformSet,
    theta: PhaseField,
    rate: f64,
}

/// One density reallocation with a damped fallback: the full
/// threshold solution is tried first, then successively smaller
/// convex blends with the current field, keeping the first blend that
/// improves the honest sum-rate. The feasible set is convex, so every
/// blend satisfies the budget and the cap.
///
/// Moving mass breaks both the zero-forcing of the beams and the
/// jamming suppression the phases encode, which the honest rate
/// punishes at second order. Each candidate is therefore evaluated
/// with beams re-zero-forced against it and the phases re-optimized,
/// and the whole bundle is accepted jointly.
fn density_stage(
    config: &SystemConfig,
    stack: &Stack,
    problem: &PhaseProblem,
    theta: &PhaseField,
    rho: &DensityField,
    jammer: &JammerStrategy,
    current_rate: f64,
) -> Result<Option<DensityStep>> {
    let responses = ResponseSet::from_problem(problem, theta);
    // Two allocation proposals: the signed marginal gain of the current
    // state, and the phase-optimistic envelope. The signed field is exact to
    // first order but scores empty cells by their unoptimised phases; the
    // envelope ranks them by the path-loss profile instead. Whichever
    // proposal survives the joint re-evaluation wins.
    let fields = [
        responses.gain_field(rho),
        responses.envelope_field(rho),
    ];
    let mut targets = Vec::new();
    for gain in &fields {
        let target = if config.solver.dtara_use_bisection {
            dt_ara_bisect(
                gain,
                &stack.grid,
                config.uav_budget,
                config.rho_max,
                config.solver.dtara_bisect_tol,
            )?
        } else {
            dt_ara_sort(gain, &stack.grid, config.uav_budget, config.rho_max)?
        };
        targets.push(target);
    }
    let polish_iters = if config.solver.density_polish_iters > 0 {
        config.solver.density_polish_iters
    } else {
        config.solver.ris_max_iters
    };
    let polish_opts = PhaseOpts {
        max_iters: polish_iters,
        tol: config.solver.ris_tol,
        rate_tol: config.solver.ris_rate_tol,
        initial_step: config.solver.ris_initial_step,
        max_halvings: config.solver.ris_max_halvings,
    };
    let mut t = 1.0;
    for _ in 0..4 {
        let mut best: Option<DensityStep> = None;
        for (which, target) in targets.iter().enumerate() {
            let blend = DensityField {
                rho: rho
                    .rho
                    .iter()
                    .zip(&target.rho)
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect(),
            };
            if let Some(beams) = beamform_stage(config, stack, theta, &blend, jammer)? {
                let cand_problem = build_problem(config, stack, &blend, &beams, jammer);
                // The envelope proposal routes mass onto cells whose phases
                // were never optimised; co-phase those cells before
                // polishing so the proposal is judged on its geometry, not
                // on its initial phase draw.
                let start = if which == 1 {
                    let grew: Vec<bool> = rho
                        .rho
                        .iter()
                        .zip(&blend.rho)
                        .map(|(old, new)| new > old)
                        .collect();
                    cand_problem.aligned_phases(theta, &grew)
                } else {
                    theta.clone()
                };
                let outcome = optimize_phases(&cand_problem, start, &polish_opts);
                let rate = *outcome.trace.last().unwrap();
                let floor = best.as_ref().map_or(current_rate, |b| b.rate);
                if rate > floor {
                    best = Some(DensityStep {
                        rho: blend,
                        beams,
                        theta: outcome.theta,
                        rate,
                    });
                }
            }
        }
        if best.is_some() {
            return Ok(best);
        }
        t *= 0.5;
    }
    Ok(None)
}

pub fn alternating_optimize(config: &SystemConfig) -> Result<RunReport> {
    run_scheme(Scheme::Proposed, config)
}

pub fn run_scheme(scheme: Scheme, config: &SystemConfig) -> Result<RunReport> {
    let t_total = Instant::now();
    let t0 = Instant::now();
    let stack = build_stack(config)?;
    let mut timings = StageTimings {
        channel: t0.elapsed(),
        ..StageTimings::default()
    };

    let mut rho = uniform_density(&stack.grid, config.uav_budget, config.rho_max)?;
    let mut theta = random_phase_field(&stack.grid, config.ris_elements, config.seed);

    // The defense's model of the jammer: full uncertainty disk for the
    // robust schemes, the bare estimate for the non-robust one.
    let defense_eps = match scheme {
        Scheme::S1NonRobust => 0.0,
        _ => config.epsilon,
    };
    let jam_opts = JamOpts {
        step: config.solver.jam_step,
        fd_step: config.solver.jam_fd_step,
        max_iters: config.solver.jam_max_iters,
    };
    let t0 = Instant::now();
    let ctx = JammerContext {
        theta: &theta,
        rho: &rho,
        channels: &stack.channels,
        grid: &stack.grid,
        jlm: &stack.jlm,
    };
    let jammer = optimize_jammer(&ctx, config.jammer_estimate, defense_eps, &jam_opts);
    // The evaluation adversary is the worst case over the full disk at
    // the common initial state, so every scheme under one seed faces
    // the same jammer regardless of what its defense assumed.
    let eval_jammer = if defense_eps == config.epsilon {
        jammer.clone()
    } else {
        optimize_jammer(&ctx, config.jammer_estimate, config.epsilon, &jam_opts)
    };
    timings.jammer = t0.elapsed();

    let t0 = Instant::now();
    let mut beams = beamform_stage(config, &stack, &theta, &rho, &jammer)?
        .ok_or(crate::error::Error::SingularChannel { cond: f64::INFINITY })?;
    timings.beamform += t0.elapsed();

    let mut problem = build_problem(config, &stack, &rho, &beams, &jammer);
    let mut rate = problem.sum_rate(&theta);
    let initial_sum_rate = rate;

    // carried across outer iterations so a stagnated phase optimizer
    // stays stagnated instead of re-exploring at a large step
    let mut phase_step = config.solver.ris_initial_step;

    let optimize_density = matches!(scheme, Scheme::Proposed | Scheme::S1NonRobust);
    let max_iters = match scheme {
        Scheme::S3UniformRandomPhase => 0,
        _ => config.solver.outer_max_iters,
    };

    let mut trace = Vec::new();
    let mut converged = max_iters == 0;
    let mut iterations = 0;
    for iter in 1..=max_iters {
        iterations = iter;

        let t0 = Instant::now();
        if let Some(cand) = beamform_stage(config, &stack, &theta, &rho, &jammer)? {
            let cand_problem = build_problem(config, &stack, &rho, &cand, &jammer);
            let cand_rate = cand_problem.sum_rate(&theta);
            if cand_rate >= rate {
                beams = cand;
                problem = cand_problem;
                rate = cand_rate;
            }
        }
        timings.beamform += t0.elapsed();
        let after_beamform = rate;

        let t0 = Instant::now();
        let phase_opts = PhaseOpts {
            max_iters: config.solver.ris_max_iters,
            tol: config.solver.ris_tol,
            rate_tol: config.solver.ris_rate_tol,
            initial_step: phase_step,
            max_halvings: config.solver.ris_max_halvings,
        };
        let outcome = optimize_phases(&problem, theta, &phase_opts);
        theta = outcome.theta;
        phase_step = outcome.final_step;
        rate = *outcome.trace.last().unwrap();
        timings.phase += t0.elapsed();
        let after_phase = rate;

        let t0 = Instant::now();
        if optimize_density {
            if let Some(step) =
                density_stage(config, &stack, &problem, &theta, &rho, &jammer, rate)?
            {
                rho = step.rho;
                beams = step.beams;
                theta = step.theta;
                rate = step.rate;
                // the polished phases explored at full step scale
                phase_step = config.solver.ris_initial_step;
                problem = build_problem(config, &stack, &rho, &beams, &jammer);
            }
        }
        timings.density += t0.elapsed();
        let after_density = rate;

        trace.push(IterationRecord {
            iteration: iter,
            after_beamform,
            after_phase,
            after_density,
        });
        let prev = if trace.len() >= 2 {
            trace[trace.len() - 2].after_density
        } else {
            initial_sum_rate
        };
        if (rate - prev).abs() < config.solver.outer_tol {
            converged = true;
            break;
        }
    }

    // The loop ends on a phase or density update, leaving the beams
    // derived from an earlier state; re-derive them so the reported
    // precoder is zero-forcing at the reported phases and density.
    let t0 = Instant::now();
    if let Some(cand) = beamform_stage(config, &stack, &theta, &rho, &jammer)? {
        problem = build_problem(config, &stack, &rho, &cand, &jammer);
        beams = cand;
    }
    timings.beamform += t0.elapsed();

    let final_metrics = metrics(&problem, &theta);

    // The converged defense re-evaluated against the worst-case
    // adversary. With `reoptimize_jammer` the adversary re-optimizes
    // over the disk against the final defense (residual
    // vulnerability); otherwise it is the initial-state worst case,
    // which keeps the comparison stable across schemes.
    let worst_case = {
        let t0 = Instant::now();
        let wc_jammer = if config.solver.reoptimize_jammer {
            let ctx = JammerContext {
                theta: &theta,
                rho: &rho,
                channels: &stack.channels,
                grid: &stack.grid,
                jlm: &stack.jlm,
            };
            optimize_jammer(&ctx, config.jammer_estimate, config.epsilon, &jam_opts)
        } else {
            eval_jammer
        };
        let wc_problem = build_problem(config, &stack, &rho, &beams, &wc_jammer);
        let m = metrics(&wc_problem, &theta);
        timings.jammer += t0.elapsed();
        Some(WorstCaseReport { jammer: wc_jammer, metrics: m })
    };

    timings.total = t_total.elapsed();
    Ok(RunReport {
        scheme,
        trace,
        initial_sum_rate,
        metrics: final_metrics,
        rho,
        theta,
        beams,
        jammer,
        worst_case,
        converged,
        iterations,
        timings,
    })
}

/// Marginal-gain field of a finished run, for the density-map export.
/// Rebuilds the channel stack deterministically from the config.
pub fn gain_field_for(config: &SystemConfig, report: &RunReport) -> Result<crate::density::GainField> {
    let stack = build_stack(config)?;
    let jammer = report
        .worst_case
        .as_ref()
        .map(|w| &w.jammer)
        .unwrap_or(&report.jammer);
    let problem = build_problem(config, &stack, &report.rho, &report.beams, jammer);
    let responses = ResponseSet::from_problem(&problem, &report.theta);
    Ok(responses.gain_field(&report.rho))
}

/// Wall-clock of the density allocator per swarm size, at a fixed
/// grid. `reps` repetitions are summed per value to beat timer noise.
pub fn complexity_probe(
    config: &SystemConfig,
    q_values: &[f64],
    reps: usize,
) -> Result<Vec<(f64, Duration)>> {
    use rand::Rng;
    let grid = build_grid(config);
    let mut rng = crate::rng::substream(config.seed, "complexity-probe");
    let gain = crate::density::GainField {
        g: (0..grid.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
    };
    let mut table = Vec::with_capacity(q_values.len());
    for &q in q_values {
        let start = Instant::now();
        for _ in 0..reps {
            let d = dt_ara_bisect(&gain, &grid, q, config.rho_max, config.solver.dtara_bisect_tol)?;
            std::hint::black_box(d);
        }
        table.push((q, start.elapsed()));
    }
    Ok(table)
}
