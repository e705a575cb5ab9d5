//! Runs the configured parameter sweep and collects table rows.

use std::time::Instant;

use netuq::galerkin::{GalerkinOptions, ReducedGalerkinOptions};
use netuq::models::composite::{
    composite_experiment, theoretical_constraint_rank, CompositeFunction, CompositeReference,
    CompositeRow,
};
use netuq::models::heat::{
    heat_network_experiment_with, monte_carlo_v1, HeatNetworkConfig, HeatNetworkRow,
};
use netuq::network::NetworkOptions;
use netuq::reduction::{RankSelection, ReductionOptions};
use serde::Serialize;

use crate::config::{ExperimentConfig, Problem, RankMode};
use crate::error::{CliError, CliResult};

/// Composite row as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositeRecord {
    #[serde(rename = "N")]
    pub degree: usize,
    #[serde(rename = "P1")]
    pub basis_size: usize,
    #[serde(rename = "Q1")]
    pub grid_size: usize,
    #[serde(rename = "Pp1")]
    pub reduced_size: usize,
    #[serde(rename = "R")]
    pub nonzeros: usize,
    pub err_full: f64,
    pub err_reduced: f64,
    pub orth_err: f64,
}

impl From<&CompositeRow> for CompositeRecord {
    fn from(row: &CompositeRow) -> Self {
        Self {
            degree: row.degree,
            basis_size: row.basis_size,
            grid_size: row.grid_size,
            reduced_size: row.reduced_size,
            nonzeros: row.nonzeros,
            err_full: row.err_full,
            err_reduced: row.err_reduced,
            orth_err: row.orth_err,
        }
    }
}

/// Monte Carlo statistics of `v₁` next to the Galerkin moments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloRecord {
    pub s: usize,
    pub samples: usize,
    pub seed: u64,
    pub mc_mean: f64,
    pub mc_std_dev: f64,
    pub mc_mean_se: f64,
    pub mc_std_dev_se: f64,
    pub galerkin_mean: f64,
    pub galerkin_std_dev: f64,
}

/// Wall-clock time of one sweep entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowTiming {
    pub label: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tables {
    Composite(Vec<CompositeRecord>),
    HeatNetwork {
        rows: Vec<HeatNetworkRow>,
        monte_carlo: Vec<MonteCarloRecord>,
    },
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub tables: Tables,
    pub timings: Vec<RowTiming>,
    pub total_seconds: f64,
}

pub fn run(config: &ExperimentConfig) -> CliResult<RunResult> {
    let start = Instant::now();
    let (tables, timings) = match config.problem {
        Problem::Composite => run_composite(config)?,
        Problem::HeatNetwork => run_heat_network(config)?,
    };
    Ok(RunResult {
        tables,
        timings,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

fn reduction_options(config: &ExperimentConfig, reduced_degree: usize) -> ReductionOptions {
    let rank = match config.rank_mode {
        RankMode::Tolerance => RankSelection::Tolerance,
        RankMode::FixedRank => RankSelection::Fixed(theoretical_constraint_rank(reduced_degree, 2)),
    };
    ReductionOptions {
        qr_tol: config.qr_tol,
        rank,
        retry: config.retry,
        ..ReductionOptions::default()
    }
}

fn run_composite(config: &ExperimentConfig) -> CliResult<(Tables, Vec<RowTiming>)> {
    let problem = CompositeFunction::new(config.s)?;
    let started = Instant::now();
    let reference = CompositeReference::new(&problem, config.reference_degree)?;
    let mut timings = vec![RowTiming {
        label: format!("reference N={}", config.reference_degree),
        seconds: started.elapsed().as_secs_f64(),
    }];
    let mut records = Vec::new();
    for degree in config.n_min..=config.n_max {
        let reduced_degree = config.n_prime.unwrap_or(degree);
        let started = Instant::now();
        let row = composite_experiment(
            &problem,
            degree,
            reduced_degree,
            &reduction_options(config, reduced_degree),
            &reference,
        )?;
        let seconds = started.elapsed().as_secs_f64();
        log::info!(
            "composite N={degree}: R={} err_full={:.3e} err_reduced={:.3e} ({seconds:.2}s)",
            row.nonzeros,
            row.err_full,
            row.err_reduced
        );
        let record = CompositeRecord::from(&row);
        ensure_finite(
            &format!("composite row N={degree}"),
            &[record.err_full, record.err_reduced, record.orth_err],
        )?;
        records.push(record);
        timings.push(RowTiming {
            label: format!("N={degree}"),
            seconds,
        });
    }
    Ok((Tables::Composite(records), timings))
}

fn run_heat_network(config: &ExperimentConfig) -> CliResult<(Tables, Vec<RowTiming>)> {
    let galerkin = GalerkinOptions {
        tol: config.newton_tol,
        ..GalerkinOptions::default()
    };
    let reduced_degree = config.n_prime.unwrap_or(config.n);
    let reduced = ReducedGalerkinOptions {
        variables: config.intermediate.into(),
        reduction: reduction_options(config, reduced_degree),
        ..ReducedGalerkinOptions::new(reduced_degree, config.reduce_which.into())
    };
    let mut rows = Vec::new();
    let mut monte_carlo = Vec::new();
    let mut timings = Vec::new();
    for s in config.s_min..=config.s_max {
        let model = HeatNetworkConfig::with_modes(s);
        let started = Instant::now();
        let report = heat_network_experiment_with(&model, config.n, &reduced, &galerkin)?;
        let seconds = started.elapsed().as_secs_f64();
        let row = report.row;
        log::info!(
            "heat network s={s}: R={} solves=({}, {}) difference={:.2e} ({seconds:.2}s)",
            row.nonzeros,
            row.solves_c1,
            row.solves_c2,
            report.coefficient_difference
        );
        ensure_finite(
            &format!("heat-network row s={s}"),
            &[row.time_c1, row.time_c2, report.coefficient_difference],
        )?;
        timings.push(RowTiming {
            label: format!("s={s}"),
            seconds,
        });

        if config.mc_samples > 0 {
            let started = Instant::now();
            let summary = monte_carlo_v1(
                &model,
                config.mc_samples,
                config.seed,
                &NetworkOptions::default(),
            )?;
            let (mean, sd) = report.full_state.v1_moments();
            let record = MonteCarloRecord {
                s,
                samples: summary.samples,
                seed: config.seed,
                mc_mean: summary.mean,
                mc_std_dev: summary.std_dev,
                mc_mean_se: summary.mean_std_error,
                mc_std_dev_se: summary.std_dev_std_error,
                galerkin_mean: mean[0],
                galerkin_std_dev: sd[0],
            };
            ensure_finite(
                &format!("Monte Carlo summary s={s}"),
                &[
                    record.mc_mean,
                    record.mc_std_dev,
                    record.galerkin_mean,
                    record.galerkin_std_dev,
                ],
            )?;
            monte_carlo.push(record);
            timings.push(RowTiming {
                label: format!("monte carlo s={s}"),
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        rows.push(row);
    }
    Ok((Tables::HeatNetwork { rows, monte_carlo }, timings))
}

fn ensure_finite(what: &str, values: &[f64]) -> CliResult<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::NonFinite(what.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_composite_sweep() {
        let config = ExperimentConfig {
            n_max: 2,
            reference_degree: 4,
            ..ExperimentConfig::defaults(Problem::Composite)
        };
        let result = run(&config).unwrap();
        let Tables::Composite(rows) = result.tables else {
            panic!("wrong table kind");
        };
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].basis_size, rows[0].grid_size), (5, 16));
        assert_eq!(result.timings.len(), 3);
    }

    #[test]
    fn fixed_rank_uses_the_theoretical_rank() {
        let config = ExperimentConfig {
            rank_mode: RankMode::FixedRank,
            ..ExperimentConfig::defaults(Problem::Composite)
        };
        let opts = reduction_options(&config, 4);
        assert_eq!(opts.rank, RankSelection::Fixed(45));
    }

    #[test]
    fn non_finite_values_are_reported() {
        let err = ensure_finite("row", &[1.0, f64::NAN]).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_SOLVER);
    }
}
