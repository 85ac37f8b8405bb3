//! One function per subcommand, each producing a [`Report`].

use std::sync::Arc;

use ensemble_qc::density::mixed_fidelity;
use ensemble_qc::detection::Execution;
use ensemble_qc::optics::LossModel;
use ensemble_qc::protocols::{
    cz_fuse, eme_round_probability, encode_cluster, ideal_eme, ideal_eme_inputs, leakage_fraction, prepare_eme,
    prepare_eme_with_retry, prepare_three_cluster, ClusterGraph, CzStatus, ExcitationParams,
};
use ensemble_qc::resources::{expected_costs, simulate_model, trial_rng, Estimate, GrowthModel, GROWTH_CSV_HEADER};
use ensemble_qc::verify::{eme_error_reference, id_ghz_reference, loss_scan, loss_rate, threshold_by_bisection, LossForm};
use ensemble_qc::{Cutoff, Error, MixedState, ModeRegistry, PureState};
use rayon::prelude::*;

use crate::config::{Mode, RunConfig};
use crate::report::{Cell, Report};
use crate::CliError;

pub const GHZ_LABELS: [&str; 6] = ["q0", "q1", "q2", "q3", "q4", "q5"];
pub const GHZ_KEPT: [&str; 3] = ["q1", "q3", "q5"];
const EME_MAX_ATTEMPTS: u32 = 10_000_000;

fn loss(cfg: &RunConfig) -> Result<LossModel, CliError> {
    Ok(LossModel::new(cfg.eta_e, cfg.eta_d)?)
}

fn cutoff(cfg: &RunConfig) -> Cutoff {
    Cutoff::new(cfg.cutoff)
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.expect("validated: sampled runs carry a seed")
}

/// Runs `trial` for every index in parallel, in index order.
fn sampled<T: Send, F>(cfg: &RunConfig, trial: F) -> Result<Vec<T>, CliError>
where
    F: Fn(&mut dyn rand::RngCore) -> Result<T, Error> + Sync,
{
    let seed = seed(cfg);
    let out: Result<Vec<T>, Error> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| trial(&mut trial_rng(seed, t)))
        .collect();
    Ok(out?)
}

fn header(cfg: &RunConfig) -> Report {
    Report::summary()
        .with("eta_e", cfg.eta_e)
        .with("eta_d", cfg.eta_d)
        .with("cutoff", cfg.cutoff as u32)
}

pub fn eme(cfg: &RunConfig) -> Result<Report, CliError> {
    let registry = ModeRegistry::with_qubits(&["i", "j"])?;
    let cut = cutoff(cfg);
    let vacuum = MixedState::from_pure(PureState::vacuum(registry.clone(), cut)?);
    let params = ExcitationParams::new(cfg.p, cfg.cutoff)?;
    let loss = loss(cfg)?;
    let round = eme_round_probability(cfg.p, loss.eta(), cfg.cutoff)?;
    let report = header(cfg).with("p", cfg.p).with("round_probability", round);
    match cfg.mode {
        Mode::Analytic => {
            let out = prepare_eme(&vacuum, "i", "j", params, loss, Execution::Analytic)?;
            let state = out.corrected_state()?;
            let reference = eme_error_reference(registry.clone(), cut, "i", "j", cfg.p, loss.eta())?;
            let ideal = ideal_eme(registry, cut, "i", "j")?;
            Ok(report
                .with("success_probability", out.probability)
                .with("fidelity", mixed_fidelity(&state, &reference)?)
                .with("fidelity_ideal", state.fidelity(&ideal)?)
                .with("leakage", leakage_fraction(&out.state()?, &["i", "j"])?))
        }
        Mode::Sampled => {
            let rounds = sampled(cfg, |rng| {
                let (_, attempts) = prepare_eme_with_retry(&vacuum, "i", "j", params, loss, rng, EME_MAX_ATTEMPTS)?;
                Ok((attempts.h + attempts.v) as f64)
            })?;
            let est = Estimate::from_samples(rounds);
            Ok(report
                .with("trials", cfg.trials)
                .with("seed", seed(cfg))
                .with("mean_rounds", est.mean)
                .with("stderr", est.stderr)
                .with("expected_rounds", 2.0 / round))
        }
    }
}

fn ghz_input(cut: Cutoff) -> Result<MixedState, CliError> {
    let registry = ModeRegistry::with_qubits(&GHZ_LABELS)?;
    Ok(MixedState::from_pure(ideal_eme_inputs(registry, cut, GHZ_LABELS)?))
}

pub fn ghz(cfg: &RunConfig) -> Result<Report, CliError> {
    let cut = cutoff(cfg);
    let input = ghz_input(cut)?;
    let loss = loss(cfg)?;
    let analytic = prepare_three_cluster(&input, GHZ_LABELS, loss, Execution::Analytic)?;
    let report = header(cfg).with("loss_rate", loss.loss_rate());
    match cfg.mode {
        Mode::Analytic => {
            let r = loss_rate(loss.eta())?;
            let reference = id_ghz_reference(input.registry().clone(), cut, GHZ_KEPT, r, LossForm::AmplitudeDamping)?;
            let fidelity = mixed_fidelity(&analytic.corrected_state()?, &reference)?;
            Ok(report
                .with("success_probability", analytic.probability)
                .with("fidelity", fidelity)
                .with("branches", analytic.branches.len() as u64))
        }
        Mode::Sampled => {
            let hits = sampled(cfg, |rng| match prepare_three_cluster(&input, GHZ_LABELS, loss, Execution::Sampled(rng)) {
                Ok(_) => Ok(1.0),
                Err(Error::HeraldFailed { .. }) => Ok(0.0),
                Err(e) => Err(e),
            })?;
            let est = Estimate::from_samples(hits);
            Ok(report
                .with("trials", cfg.trials)
                .with("seed", seed(cfg))
                .with("success_fraction", est.mean)
                .with("stderr", est.stderr)
                .with("success_probability", analytic.probability))
        }
    }
}

/// Two two-qubit clusters `3–1` and `2–4` fused through links 1 and 2.
pub fn fusion_input() -> Result<(Arc<ModeRegistry>, ClusterGraph), CliError> {
    let graph = ClusterGraph::line(&["3", "1"])?.union(&ClusterGraph::line(&["2", "4"])?)?;
    let registry = ModeRegistry::with_qubits(graph.vertices())?;
    Ok((registry, graph))
}

pub fn cz(cfg: &RunConfig) -> Result<Report, CliError> {
    let (registry, graph) = fusion_input()?;
    let cut = cutoff(cfg);
    let input = MixedState::from_pure(encode_cluster(registry.clone(), cut, &graph)?);
    let loss = loss(cfg)?;
    let run = |exec: Execution<'_>| cz_fuse(&input, ["1", "2"], ["3", "4"], loss, exec);
    let analytic = run(Execution::Analytic)?;
    let report = header(cfg)
        .with("p_success", analytic.p_success)
        .with("p_failure", analytic.p_failure)
        .with("p_indeterminate", analytic.p_indeterminate);
    match cfg.mode {
        Mode::Analytic => {
            let fused = encode_cluster(registry, cut, &ClusterGraph::line(&["3", "4"])?)?;
            let f = analytic.success().corrected_state()?.fidelity(&fused)?;
            Ok(report.with("success_fidelity", f))
        }
        Mode::Sampled => {
            let statuses = sampled(cfg, |rng| Ok(run(Execution::Sampled(rng))?.status()))?;
            let count = |keep: &dyn Fn(&CzStatus) -> bool| statuses.iter().filter(|s| keep(s)).count() as u64;
            Ok(report
                .with("trials", cfg.trials)
                .with("seed", seed(cfg))
                .with("successes", count(&|s| *s == CzStatus::Success))
                .with("failures", count(&|s| matches!(s, CzStatus::Failure { .. })))
                .with("indeterminate", count(&|s| *s == CzStatus::Indeterminate)))
        }
    }
}

pub fn grow(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = GrowthModel::lossy(cfg.p, cfg.eta(), cfg.rate())?.with_boundary(cfg.boundary);
    let stats = simulate_model(model, cfg.n, cfg.trials, seed(cfg))?;
    let ledger = expected_costs(model.round_success)?;
    let mut table = Report::table(&GROWTH_CSV_HEADER);
    table.push_row(vec![
        Cell::Int(stats.n as u64),
        Cell::Num(stats.p),
        Cell::Num(stats.eta),
        Cell::Int(stats.trials),
        Cell::Num(stats.pulses.mean),
        Cell::Num(stats.pulses.stderr),
        Cell::Num(stats.attempts.mean),
    ]);
    let json = serde_json::json!({
        "stats": stats,
        "pulses_per_qubit": stats.pulses_per_qubit(),
        "attempts_per_qubit": stats.attempts_per_qubit(),
        "ledger": ledger,
        "ledger_total": ledger.total_for(cfg.n),
    });
    Ok(Report::Dual {
        csv: Box::new(table),
        json,
    })
}

/// Loss scan over the grid, with the bisected threshold inserted as its own
/// row when it falls inside the grid.
pub fn sweep_loss(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut grid = cfg.eta_grid.clone();
    let threshold = threshold_by_bisection(1e-12)?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if lo < threshold && threshold < hi && !grid.iter().any(|&e| (e - threshold).abs() < 1e-9) {
        grid.push(threshold);
        grid.sort_by(f64::total_cmp);
    }
    let rows = loss_scan(&grid)?;
    let mut table = Report::table(&["eta", "r", "g", "margin"]);
    for r in rows {
        table.push_row(vec![Cell::Num(r.eta), Cell::Num(r.r), Cell::Num(r.g), Cell::Num(r.margin)]);
    }
    Ok(table)
}
