//! Seeded Monte Carlo simulation of the three intensity measurements.
//!
//! Draws are generated in fixed blocks of [`BLOCK_SIZE`] outcomes; block `b`
//! uses ChaCha8 stream `b` of the run seed. Workers only decide which thread
//! fills which block, so every statistic is bit-identical for any worker
//! count.

use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{heterodyne_estimator, intensity_estimator};
use crate::exec::Execution;
use crate::noise::NoiseReport;
use crate::numerics::{oscillator_table, CompensatedSum, DensityTable, DEFAULT_TABLE_TOL};
use crate::pom::{DetectorConfig, Efficiency, Scheme};
use crate::states::{moments, photon_distribution, PhotonStatistics, StateSpec, DEFAULT_TAIL_BOUND, MAX_PHOTON_NUMBER};

/// Outcomes per random stream.
pub const BLOCK_SIZE: usize = 4096;

/// Upper limit on histogram bins.
pub const MAX_BINS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub state: StateSpec,
    pub detector: DetectorConfig,
    pub n_samples: usize,
    pub seed: u64,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(state: StateSpec, detector: DetectorConfig, n_samples: usize, seed: u64) -> Self {
        Self {
            state,
            detector,
            n_samples,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("nSamples", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        self.state.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub count: u64,
}

/// Empirical summary of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleSummary {
    pub scheme: Scheme,
    pub eta: f64,
    pub mean: f64,
    pub sample_variance: f64,
    pub standard_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub bin_width: f64,
    pub histogram: Vec<HistogramBin>,
}

trait OutcomeSampler: Sync {
    fn draw<R: Rng>(&self, rng: &mut R) -> Result<f64>;
}

fn photon_sampler(stats: &PhotonStatistics) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(stats.rho()).map_err(|e| Error::invalid("rho", e.to_string()))
}

/// Quadrature tables per photon number, built on first use and shared by
/// every run in the process.
static TABLES: [OnceLock<Result<DensityTable>>; MAX_PHOTON_NUMBER + 1] =
    [const { OnceLock::new() }; MAX_PHOTON_NUMBER + 1];

fn quadrature_table(n: usize) -> Result<&'static DensityTable> {
    TABLES[n]
        .get_or_init(|| oscillator_table(n, DEFAULT_TABLE_TOL))
        .as_ref()
        .map_err(Clone::clone)
}

struct RouletteSampler {
    photons: WeightedIndex<f64>,
    smear: Option<Normal<f64>>,
    eta: Efficiency,
}

impl RouletteSampler {
    fn new(stats: &PhotonStatistics, eta: Efficiency) -> Result<Self> {
        let smear = if eta.is_unit() {
            None
        } else {
            Some(Normal::new(0.0, eta.smearing_variance().sqrt()).map_err(|e| Error::invalid("eta", e.to_string()))?)
        };
        Ok(Self {
            photons: photon_sampler(stats)?,
            smear,
            eta,
        })
    }
}

impl OutcomeSampler for RouletteSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        let n = self.photons.sample(rng);
        let mut x = quadrature_table(n)?.sample(rng);
        if let Some(noise) = &self.smear {
            x += noise.sample(rng);
        }
        Ok(intensity_estimator(x, self.eta))
    }
}

struct HeterodyneSampler {
    photons: WeightedIndex<f64>,
    noise: Option<Normal<f64>>,
    eta: Efficiency,
}

impl OutcomeSampler for HeterodyneSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        let n = self.photons.sample(rng);
        // |⟨α|n⟩|²/π: |α|² ~ Gamma(n + 1, 1), phase uniform
        let radial = Gamma::new(n as f64 + 1.0, 1.0).map_err(|e| Error::invalid("gamma", e.to_string()))?;
        let modulus = radial.sample(rng).sqrt();
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let (mut re, mut im) = (modulus * phase.cos(), modulus * phase.sin());
        if let Some(noise) = &self.noise {
            re += noise.sample(rng);
            im += noise.sample(rng);
        }
        Ok(heterodyne_estimator(re, im, self.eta))
    }
}

struct DirectSampler {
    photons: WeightedIndex<f64>,
    eta: Efficiency,
}

impl OutcomeSampler for DirectSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        let n = self.photons.sample(rng);
        let counts = Binomial::new(n as u64, self.eta.value())
            .map_err(|e| Error::invalid("eta", e.to_string()))?
            .sample(rng);
        Ok(counts as f64 / self.eta.value())
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

fn fill<S: OutcomeSampler>(sampler: &S, n_samples: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_samples];
    exec.for_each_chunk(&mut out, BLOCK_SIZE, |block, chunk| {
        let mut rng = block_rng(seed, block);
        for slot in chunk.iter_mut() {
            *slot = sampler.draw(&mut rng)?;
        }
        Ok(())
    })?;
    Ok(out)
}

/// Raw estimator outcomes for `config`, in draw order.
pub fn simulate_outcomes(config: &ExperimentConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let stats = photon_distribution(&config.state, DEFAULT_TAIL_BOUND)?;
    let eta = config.detector.eta;
    let exec = Execution::with_workers(config.workers);
    let (n, seed) = (config.n_samples, config.seed);
    match config.detector.scheme {
        Scheme::Roulette => fill(&RouletteSampler::new(&stats, eta)?, n, seed, exec),
        Scheme::Heterodyne => {
            let noise = if eta.is_unit() {
                None
            } else {
                Some(
                    Normal::new(0.0, eta.heterodyne_noise_variance().sqrt())
                        .map_err(|e| Error::invalid("eta", e.to_string()))?,
                )
            };
            let sampler = HeterodyneSampler {
                photons: photon_sampler(&stats)?,
                noise,
                eta,
            };
            fill(&sampler, n, seed, exec)
        }
        Scheme::Direct => {
            let sampler = DirectSampler {
                photons: photon_sampler(&stats)?,
                eta,
            };
            fill(&sampler, n, seed, exec)
        }
    }
}

/// Simulates whichever scheme `config` names.
pub fn simulate(config: &ExperimentConfig) -> Result<SampleSummary> {
    let outcomes = simulate_outcomes(config)?;
    Ok(summarize(&outcomes, config.detector.scheme, config.detector.eta, config.seed))
}

fn require_scheme(config: &ExperimentConfig, scheme: Scheme) -> Result<()> {
    if config.detector.scheme == scheme {
        Ok(())
    } else {
        Err(Error::invalid(
            "scheme",
            format!("expected {scheme}, config names {}", config.detector.scheme),
        ))
    }
}

/// Random-phase homodyne: n ~ ρ, x ~ |⟨x|n⟩|², Gaussian smearing when η < 1,
/// outcome 2x² − 1/(2η).
pub fn sample_roulette(config: &ExperimentConfig) -> Result<SampleSummary> {
    require_scheme(config, Scheme::Roulette)?;
    simulate(config)
}

/// Heterodyne: Husimi draw for n ~ ρ plus complex Gaussian noise when
/// η < 1, outcome |α|² − 1/η.
pub fn sample_heterodyne(config: &ExperimentConfig) -> Result<SampleSummary> {
    require_scheme(config, Scheme::Heterodyne)?;
    simulate(config)
}

/// Photon counting: m ~ Binomial(n, η), outcome m/η.
pub fn sample_direct(config: &ExperimentConfig) -> Result<SampleSummary> {
    require_scheme(config, Scheme::Direct)?;
    simulate(config)
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean, unbiased sample variance, standard error and a Freedman–Diaconis
/// histogram (at most [`MAX_BINS`] bins).
pub fn summarize(outcomes: &[f64], scheme: Scheme, eta: Efficiency, seed: u64) -> SampleSummary {
    let n = outcomes.len();
    assert!(n > 0, "cannot summarize an empty sample");
    let mean = outcomes.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let sq: CompensatedSum = outcomes.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let sample_variance = if n > 1 { sq.value() / (n - 1) as f64 } else { 0.0 };

    let mut sorted = outcomes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[n - 1]);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let fd_width = 2.0 * iqr / (n as f64).cbrt();
    let span = max - min;
    let bins = if span > 0.0 && fd_width > 0.0 {
        ((span / fd_width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        1
    };
    let bin_width = if span > 0.0 { span / bins as f64 } else { 0.0 };
    let mut counts = vec![0u64; bins];
    for &v in &sorted {
        let idx = if bin_width > 0.0 {
            (((v - min) / bin_width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            center: min + bin_width * (i as f64 + 0.5),
            count,
        })
        .collect();

    SampleSummary {
        scheme,
        eta: eta.value(),
        mean,
        sample_variance,
        standard_error: (sample_variance / n as f64).sqrt(),
        n_samples: n,
        seed,
        bin_width,
        histogram,
    }
}

/// All three schemes on one state and efficiency, with the analytic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub roulette: SampleSummary,
    pub heterodyne: SampleSummary,
    pub direct: SampleSummary,
    pub report: NoiseReport,
}

impl Comparison {
    pub fn summary(&self, scheme: Scheme) -> &SampleSummary {
        match scheme {
            Scheme::Roulette => &self.roulette,
            Scheme::Heterodyne => &self.heterodyne,
            Scheme::Direct => &self.direct,
        }
    }
}

pub fn run_comparison(state: &StateSpec, eta: Efficiency, n_samples: usize, seed: u64) -> Result<Comparison> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let run = |scheme| {
        let config = ExperimentConfig::new(state.clone(), DetectorConfig { scheme, eta }, n_samples, seed)
            .with_workers(workers);
        simulate(&config)
    };
    let m = moments(&photon_distribution(state, DEFAULT_TAIL_BOUND)?);
    Ok(Comparison {
        roulette: run(Scheme::Roulette)?,
        heterodyne: run(Scheme::Heterodyne)?,
        direct: run(Scheme::Direct)?,
        report: NoiseReport::new(m.mean, m.mean_sq, eta)?,
    })
}
