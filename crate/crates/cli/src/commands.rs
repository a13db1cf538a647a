use num_complex::Complex64;
use qroulette::montecarlo::{simulate, ExperimentConfig, SampleSummary};
use qroulette::naimark::{
    random_spec, random_trials, semiclassical_check, ExtensionReport, RouletteSpec,
    SemiclassicalLadder, Truncations, SPEC_TOL,
};
use qroulette::noise::{zero_line, NoiseReport, Verdict, ZeroLine};
use qroulette::states::DEFAULT_TAIL_BOUND;
use qroulette::{DetectorConfig, Efficiency, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::output::Outputs;
use crate::{Command, DiscreteArgs, NaimarkMode, NoiseArgs, SemiclassicalArgs, SimulateArgs, ThresholdArgs};

pub fn execute(command: &Command, out: &mut Outputs) -> Result<(), CliError> {
    match command {
        Command::Noise(args) => noise(args, out),
        Command::Threshold(args) => threshold(args, out),
        Command::Simulate(args) => simulate_cmd(args, out),
        Command::Naimark(NaimarkMode::DiscreteRandom(args)) => discrete_random(args, out),
        Command::Naimark(NaimarkMode::Semiclassical(args)) => semiclassical(args, out),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct NoiseOutput<'a> {
    state: String,
    #[serde(flatten)]
    report: &'a NoiseReport,
    verdict: Verdict,
}

fn noise(args: &NoiseArgs, out: &mut Outputs) -> Result<(), CliError> {
    let eta = Efficiency::new(args.eta)?;
    let report = NoiseReport::for_state(&args.state, eta, DEFAULT_TAIL_BOUND)?;
    let rows = [
        ("state", args.state.to_string()),
        ("eta", report.eta.to_string()),
        ("mean_n", report.mean_n.to_string()),
        ("mean_n_sq", report.mean_n_sq.to_string()),
        ("roulette_var", report.roulette_var.to_string()),
        ("direct_var", report.direct_var.to_string()),
        ("heterodyne_var", report.heterodyne_var.to_string()),
        ("added_roulette", report.added_roulette.to_string()),
        ("added_heterodyne", report.added_heterodyne.to_string()),
        ("delta_rh", report.delta_rh.to_string()),
        ("threshold_n", report.threshold_n.to_string()),
        ("verdict", report.verdict().to_string()),
    ];
    for (key, value) in rows {
        println!("{key:<17} {value}");
    }
    if args.json {
        out.json(
            "noise.json",
            &NoiseOutput {
                state: args.state.to_string(),
                report: &report,
                verdict: report.verdict(),
            },
        )?;
    }
    Ok(())
}

fn threshold(args: &ThresholdArgs, out: &mut Outputs) -> Result<(), CliError> {
    if args.etas.is_empty() {
        return Err(CliError::Validation("invalid etas: list is empty".into()));
    }
    let curves = args
        .etas
        .iter()
        .map(|&eta| Ok(zero_line(Efficiency::new(eta)?, args.points, args.n_max)?))
        .collect::<Result<Vec<ZeroLine>, CliError>>()?;
    let mut rows = Vec::new();
    for curve in &curves {
        for p in &curve.points {
            rows.push(vec![p.eta, p.total, p.beta, f64::from(u8::from(p.converged))]);
        }
        rows.push(vec![curve.eta, curve.beta_zero_intercept, 0.0, 1.0]);
        println!(
            "eta {:<6} beta=0 intercept N = {}  ({} contour points, {} N values without a root)",
            curve.eta,
            curve.beta_zero_intercept,
            curve.points.len(),
            curve.no_root.len()
        );
    }
    out.csv("threshold.csv", &["eta", "N", "beta", "converged"], &rows)?;
    out.json("threshold.json", &curves)?;
    Ok(())
}

fn histogram_rows(summary: &SampleSummary) -> Vec<Vec<f64>> {
    summary
        .histogram
        .iter()
        .map(|b| vec![b.center, b.count as f64])
        .collect()
}

fn simulate_cmd(args: &SimulateArgs, out: &mut Outputs) -> Result<(), CliError> {
    let config = ExperimentConfig::new(
        args.state.clone(),
        DetectorConfig::new(args.scheme, args.eta)?,
        args.samples,
        args.seed,
    )
    .with_workers(args.workers);
    let summary = simulate(&config)?;
    out.json("simulate.json", &summary)?;
    out.csv("simulate_histogram.csv", &["center", "count"], &histogram_rows(&summary))?;
    println!(
        "{} mean {} variance {} (standard error {})",
        summary.scheme, summary.mean, summary.sample_variance, summary.standard_error
    );
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DiscreteOutput {
    trials: usize,
    seed: u64,
    max_dim: usize,
    max_m: usize,
    tolerance: f64,
    worst: ExtensionReport,
    passed: bool,
}

fn corrupted_spec(args: &DiscreteArgs) -> Result<RouletteSpec, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let spec = random_spec(&mut rng, args.max_dim, args.max_m)?;
    let mut families = spec.families().to_vec();
    families[0][0][(0, 0)] += Complex64::from(1e-3);
    Ok(RouletteSpec::new(spec.system_dim(), spec.weights().to_vec(), families)?)
}

fn discrete_random(args: &DiscreteArgs, out: &mut Outputs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Validation("invalid trials: must be at least 1".into()));
    }
    if args.corrupt {
        corrupted_spec(args)?;
    }
    let reports = random_trials(args.seed, args.trials, args.max_dim, args.max_m, Execution::Auto)?;
    let worst = reports.into_iter().reduce(ExtensionReport::worst).expect("at least one trial");
    let passed = worst.max_residual() <= SPEC_TOL;
    out.json(
        "naimark.json",
        &DiscreteOutput {
            trials: args.trials,
            seed: args.seed,
            max_dim: args.max_dim,
            max_m: args.max_m,
            tolerance: SPEC_TOL,
            worst,
            passed,
        },
    )?;
    println!(
        "{} random extensions: worst residuals orthogonality {:e} completeness {:e} partial trace {:e}",
        args.trials,
        worst.max_orthogonality_residual,
        worst.max_completeness_residual,
        worst.max_partial_trace_residual
    );
    if passed {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "verification failed: residual {:e} exceeds {SPEC_TOL:e}",
            worst.max_residual()
        )))
    }
}

fn semiclassical(args: &SemiclassicalArgs, out: &mut Outputs) -> Result<(), CliError> {
    if args.z.is_empty() {
        return Err(CliError::Validation("invalid z: list is empty".into()));
    }
    let alpha = Complex64::new(args.alpha_re, args.alpha_im);
    let z_max = args.z.iter().copied().fold(0.0, f64::max);
    let auto = Truncations::auto(alpha.norm(), z_max, 1e-12);
    let truncations = Truncations {
        system: args.system_trunc.unwrap_or(auto.system),
        probe: args.probe_trunc.unwrap_or(auto.probe),
    };
    let ladder: SemiclassicalLadder = semiclassical_check(alpha, args.phi, &args.z, truncations)?;
    out.json("naimark.json", &ladder)?;
    println!("target 2Re(alpha e^-i phi) = {}", ladder.target);
    for p in &ladder.points {
        println!("|z| = {:<8} <X> = {:<24} deviation {:e}", p.z, p.expectation, p.deviation);
    }
    if ladder.monotone {
        Ok(())
    } else {
        Err(CliError::Numerical("deviation ladder is not monotone non-increasing".into()))
    }
}
