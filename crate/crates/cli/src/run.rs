use std::io::Write;

use locc_spectrum::bench::{self, Strategy, MSE_CSV_HEADER, SWEEP_CSV_HEADER};
use locc_spectrum::entangle::{entanglement_experiment, BipartitePureState};
use locc_spectrum::estimator::adaptive_estimate;
use locc_spectrum::lemma::{self, chernoff_grid, empirical_tail, spectral_structure, tail_probability_bound};
use locc_spectrum::linalg::gell_mann_basis;
use locc_spectrum::model::rho_from_spectrum;
use locc_spectrum::sampling::{random_unitary, RngStream};
use locc_spectrum::{Matrix, Spectrum};
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Format, FrameSpec};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Chernoff grid checked by `verify-tails`.
const CHERNOFF_NS: [u64; 3] = [10, 100, 1000];
const CHERNOFF_PS: [f64; 3] = [0.1, 0.3, 0.5];

pub enum Outcome {
    Passed,
    SuiteFailed(String),
}

/// Result of a subcommand: a JSON value and a CSV table with the same content.
struct Output {
    json: serde_json::Value,
    csv_header: String,
    csv_rows: Vec<String>,
}

fn frame(cfg: &ExperimentConfig) -> Result<Matrix, CliError> {
    Ok(match cfg.frame {
        FrameSpec::Identity => Matrix::identity(cfg.d),
        FrameSpec::Random { seed } => random_unitary(&gell_mann_basis(cfg.d)?, &mut RngStream::new(seed, 0))?,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = Spectrum::new(cfg.spectrum.clone())?;
    let (output, outcome) = match cfg.command.as_str() {
        "estimate" => (estimate(cfg, &spec)?, Outcome::Passed),
        "bench-qcrb" => (bench_qcrb(cfg, &spec)?, Outcome::Passed),
        "sweep-mu" => (sweep_mu(cfg, &spec)?, Outcome::Passed),
        "verify-lemma1" => verify_lemma1(cfg)?,
        "verify-tails" => verify_tails(cfg, &spec)?,
        "entangle" => (entangle(cfg, &spec)?, Outcome::Passed),
        other => return Err(CliError::Validation(format!("command: unknown subcommand `{other}`"))),
    };
    write_output(cfg, &output)?;
    Ok(outcome)
}

fn estimate(cfg: &ExperimentConfig, spec: &Spectrum) -> Result<Output, CliError> {
    let rho = rho_from_spectrum(spec, &frame(cfg)?)?;
    let basis = gell_mann_basis(cfg.d)?;
    let est = adaptive_estimate(&rho, cfg.n, cfg.mu, &basis, &mut RngStream::new(cfg.seed, 0))?;
    let json = json!({
        "p_hat": est.p_hat,
        "p_hat_sorted": est.p_hat_sorted(),
        "N": est.split.total,
        "N0": est.split.per_generator,
        "N_initial": est.split.initial,
        "N_final": est.split.r#final,
        "mu": est.mu,
        "theta_hat": est.tomography.theta_hat,
        "sigma_eigenvalues": est.tomography.eigensystem.values,
        "second_stage_counts": est.second_stage_counts.counts,
        "sigma_min_gap": est.sigma_min_gap,
        "ambiguous_pairing": est.ambiguous_pairing,
    });
    let csv_rows = est
        .p_hat
        .iter()
        .zip(&est.second_stage_counts.counts)
        .enumerate()
        .map(|(k, (p, c))| format!("{},{},{},{},{},{}", cfg.d, cfg.n, cfg.mu, k + 1, c, p))
        .collect();
    Ok(Output { json, csv_header: "d,N,mu,k,count,p_hat".into(), csv_rows })
}

fn bench_qcrb(cfg: &ExperimentConfig, spec: &Spectrum) -> Result<Output, CliError> {
    let f = frame(cfg)?;
    let strategy = if cfg.known_basis { Strategy::KnownBasis } else { Strategy::Adaptive { mu: cfg.mu } };
    let reports = cfg
        .n_grid
        .iter()
        .map(|&n| bench::mse_monte_carlo(spec, &f, n, strategy, cfg.trials, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let csv_rows = reports.iter().flat_map(|r| r.csv_rows()).collect();
    Ok(Output { json: serde_json::to_value(&reports).expect("reports serialize"), csv_header: MSE_CSV_HEADER.into(), csv_rows })
}

fn sweep_mu(cfg: &ExperimentConfig, spec: &Spectrum) -> Result<Output, CliError> {
    let table = bench::mu_threshold_sweep(spec, &frame(cfg)?, &cfg.n_grid, &cfg.mu_list, cfg.trials, cfg.seed)?;
    Ok(Output {
        json: serde_json::to_value(&table).expect("table serializes"),
        csv_header: SWEEP_CSV_HEADER.into(),
        csv_rows: table.csv_rows(),
    })
}

fn verify_lemma1(cfg: &ExperimentConfig) -> Result<(Output, Outcome), CliError> {
    let report = lemma::lemma1_suite(cfg.samples, &cfg.dims, cfg.seed)?;
    let csv_rows = (0..5)
        .map(|i| format!("{},{},{},{}", i + 1, report.samples_tested, report.violations[i], report.worst_margins[i]))
        .collect();
    let outcome = match report.total_violations() {
        0 => Outcome::Passed,
        v => Outcome::SuiteFailed(format!("{v} lemma violations in {} instances", report.samples_tested)),
    };
    let json = serde_json::to_value(&report).expect("report serializes");
    Ok((Output { json, csv_header: "point,samples,violations,worst_margin".into(), csv_rows }, outcome))
}

#[derive(Serialize)]
struct TailRow {
    #[serde(rename = "N")]
    n: u64,
    epsilon: f64,
    empirical: f64,
    stderr: f64,
    bound: f64,
    holds: bool,
}

fn verify_tails(cfg: &ExperimentConfig, spec: &Spectrum) -> Result<(Output, Outcome), CliError> {
    let chernoff = chernoff_grid(&CHERNOFF_NS, &CHERNOFF_PS)?;
    let chernoff_exceptions = chernoff.iter().filter(|r| !r.holds()).count();

    let f = frame(cfg)?;
    let structure = spectral_structure(&rho_from_spectrum(spec, &f)?, lemma::MERGE_TOL)?;
    let mut tails = Vec::new();
    for &n in &cfg.n_grid {
        for &eps in &cfg.epsilon {
            let emp = empirical_tail(spec, &f, n, cfg.mu, eps, cfg.trials, cfg.seed)?;
            let bound = tail_probability_bound(eps, n as f64, cfg.mu, &structure)?;
            tails.push(TailRow {
                n,
                epsilon: eps,
                empirical: emp.frequency,
                stderr: emp.stderr,
                bound,
                holds: emp.frequency <= bound + 3.0 * emp.stderr,
            });
        }
    }
    let tail_exceptions = tails.iter().filter(|t| !t.holds).count();

    let csv_rows = tails
        .iter()
        .map(|t| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                cfg.d, t.n, cfg.mu, cfg.trials, cfg.seed, t.epsilon, t.empirical, t.stderr, t.bound, t.holds
            )
        })
        .collect();
    let json = json!({
        "gap": structure.gap,
        "chernoff": { "rows": chernoff.len(), "exceptions": chernoff_exceptions, "grid": chernoff },
        "tails": tails,
    });
    let outcome = if chernoff_exceptions + tail_exceptions == 0 {
        Outcome::Passed
    } else {
        Outcome::SuiteFailed(format!(
            "{chernoff_exceptions} Chernoff exceptions, {tail_exceptions} tail-bound exceptions"
        ))
    };
    let header = format!(
        "# chernoff_rows={} chernoff_exceptions={chernoff_exceptions}\nd,N,mu,R,seed,epsilon,empirical,stderr,bound,holds",
        chernoff.len()
    );
    Ok((Output { json, csv_header: header, csv_rows }, outcome))
}

fn entangle(cfg: &ExperimentConfig, spec: &Spectrum) -> Result<Output, CliError> {
    let schmidt = BipartitePureState::from_schmidt(&spec.full())?;
    let psi = match cfg.frame {
        FrameSpec::Identity => schmidt,
        FrameSpec::Random { .. } => schmidt.apply_local(&frame(cfg)?, &Matrix::identity(cfg.d))?,
    };
    let summary = entanglement_experiment(&psi, cfg.n, cfg.mu, cfg.trials, cfg.seed)?;
    let csv_rows = vec![format!(
        "{},{},{},{},{},{}",
        summary.true_entropy, summary.estimate_mean, summary.estimate_sd, summary.n, summary.mu, summary.trials
    )];
    Ok(Output {
        json: serde_json::to_value(&summary).expect("summary serializes"),
        csv_header: "true_entropy,estimate_mean,estimate_sd,N,mu,trials".into(),
        csv_rows,
    })
}

fn render(cfg: &ExperimentConfig, output: &Output) -> String {
    let config = serde_json::to_value(cfg).expect("config serializes");
    match cfg.format {
        Format::Json => {
            let doc = json!({ "version": VERSION, "config": config, "result": output.json });
            let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!("# locc-spectrum {VERSION}\n# config {config}\n{}\n", output.csv_header);
            for row in &output.csv_rows {
                s.push_str(row);
                s.push('\n');
            }
            s
        }
    }
}

fn write_output(cfg: &ExperimentConfig, output: &Output) -> Result<(), CliError> {
    let text = render(cfg, output);
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
