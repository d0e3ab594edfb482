//! Experiment runners: loss grids, genealogy dumps, and Gibbs chains.
//!
//! Cells of an experiment grid run in parallel and are stitched back
//! together in loop order, so outputs are identical regardless of
//! scheduling. Observations are regenerated inside every cell from the data
//! stream of its replicate and cross-checked by hash, which guarantees that
//! competing schemes face identical data.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{estimate, loss, EstimatorKind};
use crate::filter::{bpf, FilterConfig};
use crate::models::{log_returns, simulate, StateSpaceModel};
use crate::pgibbs::{acf, chain_median, particle_gibbs, PgConfig};
use crate::rng::RngStream;
use crate::select::SelectionScheme;

use super::config::{ExperimentConfig, ExperimentKind, NlParams, SvParams};
use super::output::{
    hash_bits, AcfRow, ChainRow, DegeneracyDump, DistinctRow, EdgeRow, PgDump, PgEstimateRow,
    ResultRow, StateRow, SurvivorRow, TrajectoryRow,
};

/// Gap between consecutive replicates in the filter stream space, leaving
/// room for the scheme ordinal.
pub const FILTER_STREAM_SPACING: u64 = 1_000_000;

/// Random stream feeding observation simulation for one replicate.
///
/// Independent of the scheme and the particle count, so every cell of a
/// (step count, replicate) pair simulates identical data.
pub fn data_stream(seed: u64, replicate: usize) -> RngStream {
    RngStream::new(seed, replicate as u64)
}

/// Random stream feeding filter and chain randomness for one
/// (replicate, scheme) cell.
///
/// Schemes are spaced by their stable ordinal, so adding a scheme to a
/// config never perturbs the streams of existing cells.
pub fn filter_stream(seed: u64, replicate: usize, scheme: SelectionScheme) -> RngStream {
    RngStream::new(seed, replicate as u64 * FILTER_STREAM_SPACING + scheme.ordinal())
}

#[derive(Clone, Copy)]
enum ModelSpec {
    Sv(SvParams),
    Nl([f64; 2]),
}

impl ModelSpec {
    fn build(&self) -> Result<Box<dyn StateSpaceModel>> {
        match self {
            ModelSpec::Sv(params) => Ok(Box::new(params.model()?)),
            ModelSpec::Nl(theta) => Ok(Box::new(NlParams::model(*theta)?)),
        }
    }
}

fn validate_as(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    let mut config = config.clone();
    config.experiment = kind;
    config.validate()
}

/// Runs the stochastic volatility loss grid and returns one row per
/// (step count, particle count, scheme, replicate, estimator, loss).
pub fn run_sv_loss(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    validate_as(config, ExperimentKind::SvLoss)?;
    let variants = [("sv_loss".to_string(), ModelSpec::Sv(config.sv))];
    let (rows, _) = run_loss_grid(config, &variants, None)?;
    Ok(rows)
}

/// Runs the non-linear loss grid over every configured variance pair.
///
/// Returns the loss rows plus, when `nl.state_dump` names an estimator, one
/// state row per time step of every cell.
pub fn run_nl_loss(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<StateRow>)> {
    validate_as(config, ExperimentKind::NlLoss)?;
    let variants: Vec<(String, ModelSpec)> = config
        .nl
        .thetas
        .iter()
        .map(|&theta| {
            let id = format!("nl_loss[{}:{}]", theta[0], theta[1]);
            (id, ModelSpec::Nl(theta))
        })
        .collect();
    run_loss_grid(config, &variants, config.nl.state_dump)
}

struct LossCell {
    experiment: String,
    model: ModelSpec,
    steps: usize,
    particles: usize,
    scheme: SelectionScheme,
    replicate: usize,
}

struct LossCellOutput {
    data_hash: u64,
    rows: Vec<ResultRow>,
    states: Vec<StateRow>,
}

fn run_loss_grid(
    config: &ExperimentConfig,
    variants: &[(String, ModelSpec)],
    state_dump: Option<EstimatorKind>,
) -> Result<(Vec<ResultRow>, Vec<StateRow>)> {
    let mut cells = Vec::new();
    for (experiment, model) in variants {
        for &steps in &config.step_counts {
            for &particles in &config.particle_counts {
                for &scheme in &config.schemes {
                    for replicate in 0..config.replicates {
                        cells.push(LossCell {
                            experiment: experiment.clone(),
                            model: *model,
                            steps,
                            particles,
                            scheme,
                            replicate,
                        });
                    }
                }
            }
        }
    }

    let outputs: Vec<LossCellOutput> = cells
        .par_iter()
        .map(|cell| run_loss_cell(cell, config, state_dump))
        .collect::<Result<Vec<_>>>()?;

    let mut seen: HashMap<(&str, usize, usize), u64> = HashMap::new();
    for (cell, output) in cells.iter().zip(&outputs) {
        let key = (cell.experiment.as_str(), cell.steps, cell.replicate);
        let expected = *seen.entry(key).or_insert(output.data_hash);
        assert_eq!(
            expected, output.data_hash,
            "cells diverged on shared observations for {key:?}"
        );
    }

    let mut rows = Vec::new();
    let mut states = Vec::new();
    for output in outputs {
        rows.extend(output.rows);
        states.extend(output.states);
    }
    Ok((rows, states))
}

fn run_loss_cell(
    cell: &LossCell,
    config: &ExperimentConfig,
    state_dump: Option<EstimatorKind>,
) -> Result<LossCellOutput> {
    let model = cell.model.build()?;
    let mut data_rng = data_stream(config.seed, cell.replicate).rng();
    let (truth, observations) = simulate(model.as_ref(), cell.steps, &mut data_rng)?;

    let mut filter_config = FilterConfig::new(cell.particles, cell.scheme);
    filter_config.ess_threshold_fraction = config.ess_threshold_fraction;
    let mut rng = filter_stream(config.seed, cell.replicate, cell.scheme).rng();
    let output = bpf(model.as_ref(), &observations, &filter_config, &mut rng)?;

    let zero_one_threshold = model.transition_noise_std() / 2.0;
    let mut rows = Vec::with_capacity(config.estimators.len() * config.losses.len());
    for &estimator in &config.estimators {
        let estimated = estimate(&output, estimator, Some(&mut rng))?;
        for &loss_name in &config.losses {
            let value = loss(&truth, &estimated, loss_name.to_loss(zero_one_threshold))?;
            rows.push(ResultRow::new(
                cell.experiment.clone(),
                cell.scheme,
                cell.particles,
                cell.steps,
                cell.replicate,
                estimator,
                loss_name,
                value,
            )?);
        }
    }

    let mut states = Vec::new();
    if let Some(kind) = state_dump {
        let estimated = estimate(&output, kind, Some(&mut rng))?;
        states.reserve(truth.len());
        for (index, (&truth_state, &estimated_state)) in truth.iter().zip(&estimated).enumerate() {
            states.push(StateRow {
                experiment: cell.experiment.clone(),
                scheme: cell.scheme,
                particles: cell.particles,
                steps: cell.steps,
                replicate: cell.replicate,
                step: index + 1,
                truth: truth_state,
                estimate: estimated_state,
            });
        }
    }

    Ok(LossCellOutput {
        data_hash: hash_bits(&observations),
        rows,
        states,
    })
}

/// Runs filters on the volatility model and dumps their genealogies: every
/// propagation edge, the ancestor path of every final particle, and the
/// per-step count of distinct time-1 ancestors.
pub fn run_degeneracy(config: &ExperimentConfig) -> Result<DegeneracyDump> {
    validate_as(config, ExperimentKind::Degeneracy)?;
    let steps = config.step_counts[0];

    let mut cells = Vec::new();
    for &particles in &config.particle_counts {
        for &scheme in &config.schemes {
            for replicate in 0..config.replicates {
                cells.push((particles, scheme, replicate));
            }
        }
    }

    let outputs: Vec<(u64, DegeneracyDump)> = cells
        .par_iter()
        .map(|&(particles, scheme, replicate)| {
            run_degeneracy_cell(config, steps, particles, scheme, replicate)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut seen: HashMap<usize, u64> = HashMap::new();
    for (&(_, _, replicate), (data_hash, _)) in cells.iter().zip(&outputs) {
        let expected = *seen.entry(replicate).or_insert(*data_hash);
        assert_eq!(
            expected, *data_hash,
            "cells diverged on shared observations for replicate {replicate}"
        );
    }

    let mut dump = DegeneracyDump::default();
    for (_, cell_dump) in outputs {
        dump.edges.extend(cell_dump.edges);
        dump.survivors.extend(cell_dump.survivors);
        dump.distinct.extend(cell_dump.distinct);
    }
    Ok(dump)
}

fn run_degeneracy_cell(
    config: &ExperimentConfig,
    steps: usize,
    particles: usize,
    scheme: SelectionScheme,
    replicate: usize,
) -> Result<(u64, DegeneracyDump)> {
    let model = config.sv.model()?;
    let mut data_rng = data_stream(config.seed, replicate).rng();
    let (_, observations) = simulate(&model, steps, &mut data_rng)?;

    let mut filter_config = FilterConfig::new(particles, scheme);
    filter_config.ess_threshold_fraction = config.ess_threshold_fraction;
    let mut rng = filter_stream(config.seed, replicate, scheme).rng();
    let output = bpf(&model, &observations, &filter_config, &mut rng)?;
    let genealogy = &output.genealogy;

    let mut dump = DegeneracyDump::default();
    for (step_index, row) in genealogy.ancestors.iter().enumerate().skip(1) {
        for (child, &parent) in row.iter().enumerate() {
            dump.edges.push(EdgeRow {
                scheme,
                particles,
                replicate,
                step: step_index + 1,
                child,
                parent,
            });
        }
    }

    for leaf in 0..particles {
        let mut lineage = vec![0usize; steps];
        let mut index = leaf;
        for step in (0..steps).rev() {
            lineage[step] = index;
            index = genealogy.ancestors[step][index];
        }
        for (step_index, &ancestor) in lineage.iter().enumerate() {
            dump.survivors.push(SurvivorRow {
                scheme,
                particles,
                replicate,
                leaf,
                step: step_index + 1,
                ancestor,
            });
        }
    }

    for (step_index, &roots) in genealogy.distinct_initial_ancestors().iter().enumerate() {
        dump.distinct.push(DistinctRow {
            scheme,
            particles,
            replicate,
            step: step_index + 1,
            roots,
        });
    }

    Ok((hash_bits(&observations), dump))
}

/// Runs particle Gibbs chains and dumps per-iteration parameters,
/// trailing-window medians, autocorrelations, and any retained
/// trajectories.
///
/// Price configs ingest the configured file once and run every cell on its
/// log-returns, so `step_counts` is ignored and the steps column reports
/// the return count. Synthetic configs simulate volatility data per
/// (step count, replicate). Estimate rows carry the variance medians plus
/// their square roots (`sigma`, `beta`); autocorrelations need at least two
/// retained iterations.
pub fn run_pg(config: &ExperimentConfig) -> Result<PgDump> {
    let price_returns: Option<Vec<f64>> = match config.experiment {
        ExperimentKind::PgPrices => {
            validate_as(config, ExperimentKind::PgPrices)?;
            let path = config.pg.prices_path.as_ref().expect("presence is validated");
            Some(read_price_returns(path)?)
        }
        _ => {
            validate_as(config, ExperimentKind::PgSynthetic)?;
            None
        }
    };

    let step_counts: Vec<usize> = match &price_returns {
        Some(returns) => vec![returns.len()],
        None => config.step_counts.clone(),
    };

    let mut cells = Vec::new();
    for &steps in &step_counts {
        for &particles in &config.particle_counts {
            for &scheme in &config.schemes {
                for replicate in 0..config.replicates {
                    cells.push(PgCell {
                        steps,
                        particles,
                        scheme,
                        replicate,
                    });
                }
            }
        }
    }

    let outputs: Vec<(u64, PgDump)> = cells
        .par_iter()
        .map(|cell| run_pg_cell(config, cell, price_returns.as_deref()))
        .collect::<Result<Vec<_>>>()?;

    let mut seen: HashMap<(usize, usize), u64> = HashMap::new();
    for (cell, (data_hash, _)) in cells.iter().zip(&outputs) {
        let key = (cell.steps, cell.replicate);
        let expected = *seen.entry(key).or_insert(*data_hash);
        assert_eq!(
            expected, *data_hash,
            "cells diverged on shared observations for {key:?}"
        );
    }

    let mut dump = PgDump::default();
    for (_, cell_dump) in outputs {
        dump.chains.extend(cell_dump.chains);
        dump.estimates.extend(cell_dump.estimates);
        dump.acfs.extend(cell_dump.acfs);
        dump.trajectories.extend(cell_dump.trajectories);
    }
    Ok(dump)
}

struct PgCell {
    steps: usize,
    particles: usize,
    scheme: SelectionScheme,
    replicate: usize,
}

fn run_pg_cell(
    config: &ExperimentConfig,
    cell: &PgCell,
    price_returns: Option<&[f64]>,
) -> Result<(u64, PgDump)> {
    let observations: Vec<f64> = match price_returns {
        Some(returns) => returns.to_vec(),
        None => {
            let model = config.sv.model()?;
            let mut data_rng = data_stream(config.seed, cell.replicate).rng();
            let (_, observations) = simulate(&model, cell.steps, &mut data_rng)?;
            observations
        }
    };
    let data_hash = hash_bits(&observations);

    let mut pg_config = PgConfig::new(cell.particles, config.pg.iterations, cell.scheme);
    pg_config.burn_in = config.pg.burn_in;
    pg_config.estimate_window = config.pg.estimate_window;
    pg_config.trajectory_stride = config.pg.trajectory_stride;
    pg_config.ess_threshold_fraction = config.ess_threshold_fraction;

    let mut rng = filter_stream(config.seed, cell.replicate, cell.scheme).rng();
    let record = particle_gibbs(&observations, &pg_config, &config.pg.priors, &mut rng)?;

    let mut dump = PgDump::default();
    for (index, ((&sigma2, &beta2), &phi)) in record
        .sigma2
        .iter()
        .zip(&record.beta2)
        .zip(&record.phi)
        .enumerate()
    {
        dump.chains.push(ChainRow {
            scheme: cell.scheme,
            particles: cell.particles,
            steps: cell.steps,
            replicate: cell.replicate,
            iteration: index + 1,
            sigma2,
            beta2,
            phi,
        });
    }

    let retained = config.pg.iterations - config.pg.burn_in;
    let window = config.pg.estimate_window.min(retained);
    let max_lag = config.pg.max_lag.min(retained - 1);
    let parameters: [(&'static str, &[f64]); 3] = [
        ("sigma2", &record.sigma2),
        ("beta2", &record.beta2),
        ("phi", &record.phi),
    ];
    for (parameter, chain) in parameters {
        let tail = &chain[config.pg.burn_in..];
        let median = chain_median(tail, window)?;
        dump.estimates.push(PgEstimateRow {
            scheme: cell.scheme,
            particles: cell.particles,
            steps: cell.steps,
            replicate: cell.replicate,
            parameter,
            value: median,
        });
        let root = match parameter {
            "sigma2" => Some("sigma"),
            "beta2" => Some("beta"),
            _ => None,
        };
        if let Some(root) = root {
            dump.estimates.push(PgEstimateRow {
                scheme: cell.scheme,
                particles: cell.particles,
                steps: cell.steps,
                replicate: cell.replicate,
                parameter: root,
                value: median.sqrt(),
            });
        }
        for (lag, &value) in acf(tail, max_lag)?.iter().enumerate() {
            dump.acfs.push(AcfRow {
                scheme: cell.scheme,
                particles: cell.particles,
                steps: cell.steps,
                replicate: cell.replicate,
                parameter,
                lag,
                value,
            });
        }
    }

    for (index, trajectory) in record.trajectories.iter().enumerate() {
        let iteration = index * config.pg.trajectory_stride + 1;
        for (step_index, &state) in trajectory.iter().enumerate() {
            dump.trajectories.push(TrajectoryRow {
                scheme: cell.scheme,
                particles: cell.particles,
                steps: cell.steps,
                replicate: cell.replicate,
                iteration,
                step: step_index + 1,
                state,
            });
        }
    }

    Ok((data_hash, dump))
}

/// Reads a two-column price CSV (`date,price` with a header row) and
/// converts the prices to log-returns.
///
/// Errors carry one-based file line numbers, counting the header as line
/// one.
pub fn read_price_returns(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?;
    if headers.len() != 2 {
        return Err(Error::Ingest {
            row: 1,
            message: format!("expected two columns (date, price), got {}", headers.len()),
        });
    }
    let mut prices = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map_or(index + 2, |position| position.line() as usize);
        if record.len() != 2 {
            return Err(Error::Ingest {
                row: line,
                message: format!("expected two columns, got {}", record.len()),
            });
        }
        let raw = record.get(1).expect("length is checked");
        let price: f64 = raw.trim().parse().map_err(|_| Error::Ingest {
            row: line,
            message: format!("price is not a number: `{raw}`"),
        })?;
        prices.push(price);
    }
    log_returns(&prices).map_err(|error| match error {
        Error::Ingest { row, message } => Error::Ingest { row: row + 1, message },
        other => other,
    })
}
