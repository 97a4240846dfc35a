//! Implementations behind the argument surface: dataset loading, the solver
//! and robust-estimation commands, the parallel bench drivers, and the
//! closed-form tables.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::iter::{IntoParallelIterator, ParallelIterator};

use relpose_core::study::{
    aggregate_applicability, aggregate_noise_cell, aggregate_stability, applicability_pair,
    noise_grid_instance, stability_instance, NoiseCell, NoiseGridInstance,
};
use relpose_core::{
    ransac_1ac_d, required_iterations, ApplicabilityConfig, NoiseConfig, NoiseGridConfig,
    Observation, PinholeCamera, RansacConfig, SceneConfig, SolverVariant, StabilityConfig,
    SynthError,
};

use crate::error::CliError;
use crate::io;
use crate::output::{self, LiftJson, PoseJson, RansacJson, SolveJson};
use crate::{BenchCommand, Cli, Command, DataArgs, ReportFormat, TheoryCommand};

struct Global {
    seed: u64,
    threads: usize,
    out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let global = Global {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
    };
    match cli.command {
        Command::Solve {
            data,
            index,
            solver,
        } => solve(&global, &data, index, solver.into()),
        Command::Ransac {
            data,
            confidence,
            threshold_fraction,
            max_iterations,
            min_inliers_lo,
            solver,
        } => {
            let config = RansacConfig {
                confidence,
                threshold_fraction,
                max_iterations,
                min_inliers_for_lo: min_inliers_lo,
                seed: global.seed,
                solver: solver.into(),
            };
            ransac(&global, &data, &config)
        }
        Command::Bench(bench) => match bench {
            BenchCommand::Stability {
                instances,
                format,
                histogram,
            } => bench_stability(&global, instances, format, histogram),
            BenchCommand::Noise {
                instances_per_cell,
                format,
            } => bench_noise(&global, instances_per_cell, format),
            BenchCommand::Applicability {
                pairs,
                correspondences,
                outlier_fraction,
                sigma_px,
                sigma_frame,
                sigma_depth,
                per_pair,
                format,
            } => {
                let noise = NoiseConfig {
                    sigma_px,
                    sigma_frame,
                    sigma_depth,
                    sigma_gradient: sigma_depth,
                };
                bench_applicability(
                    &global,
                    pairs,
                    correspondences,
                    outlier_fraction,
                    noise,
                    per_pair,
                    format,
                )
            }
        },
        Command::Theory(TheoryCommand::Iters {
            confidence,
            inlier_ratios,
            sample_sizes,
        }) => theory_iters(&global, confidence, &inlier_ratios, &sample_sizes),
        Command::Lift { data, index } => lift(&global, &data, index),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

/// Runs `f` on a dedicated rayon pool when more than one worker is requested
/// (0 meaning one per core); a single worker stays on the calling thread.
/// Work is sharded by instance index, so the result bytes never depend on
/// the worker count.
fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if threads == 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

struct Dataset {
    observations: Vec<Observation>,
    camera1: PinholeCamera,
    camera2: PinholeCamera,
}

fn load_dataset(data: &DataArgs) -> Result<Dataset, CliError> {
    let records = io::load_correspondences(&data.input)?;
    let camera1 = io::load_intrinsics(&data.intrinsics1)?;
    let camera2 = match &data.intrinsics2 {
        Some(path) => io::load_intrinsics(path)?,
        None => camera1.clone(),
    };
    let depth1 = data.depth1.as_deref().map(io::load_depth_map).transpose()?;
    let depth2 = data.depth2.as_deref().map(io::load_depth_map).transpose()?;
    let observations = io::observations_from_records(&records, depth1.as_ref(), depth2.as_ref())?;
    Ok(Dataset {
        observations,
        camera1,
        camera2,
    })
}

fn observation_at(dataset: &Dataset, index: usize) -> Result<&Observation, CliError> {
    dataset.observations.get(index).ok_or_else(|| {
        CliError::Invalid(format!(
            "record index {index} out of range: the file holds {} records",
            dataset.observations.len()
        ))
    })
}

fn solve(
    global: &Global,
    data: &DataArgs,
    index: usize,
    solver: SolverVariant,
) -> Result<(), CliError> {
    let dataset = load_dataset(data)?;
    let observation = observation_at(&dataset, index)?;
    let lifted = observation.lift(&dataset.camera1, &dataset.camera2)?;
    let pose = solver.solve(&lifted)?;
    let report = SolveJson {
        solver: solver.name(),
        record: index,
        pose: PoseJson::from(&pose),
    };
    write_output(global.out.as_deref(), &output::to_json_string(&report))
}

fn lift(global: &Global, data: &DataArgs, index: usize) -> Result<(), CliError> {
    let dataset = load_dataset(data)?;
    let observation = observation_at(&dataset, index)?;
    let lifted = observation.lift(&dataset.camera1, &dataset.camera2)?;
    let report = LiftJson::new(index, &lifted);
    write_output(global.out.as_deref(), &output::to_json_string(&report))
}

fn ransac(global: &Global, data: &DataArgs, config: &RansacConfig) -> Result<(), CliError> {
    let dataset = load_dataset(data)?;
    let start = Instant::now();
    let result = ransac_1ac_d(
        &dataset.observations,
        &dataset.camera1,
        &dataset.camera2,
        config,
    )?;
    let elapsed = start.elapsed();
    // Timing is diagnostic only; stdout stays byte-stable for a fixed seed.
    eprintln!(
        "ransac: {}/{} inliers after {} iterations, {} local-optimization rounds, {:.3} ms",
        result.inlier_count,
        dataset.observations.len(),
        result.iterations_run,
        result.lo_steps,
        elapsed.as_secs_f64() * 1e3
    );
    let report = RansacJson::new(&result);
    write_output(global.out.as_deref(), &output::to_json_string(&report))
}

fn theory_iters(
    global: &Global,
    confidence: f64,
    inlier_ratios: &[f64],
    sample_sizes: &[u32],
) -> Result<(), CliError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::Invalid(format!(
            "confidence must lie strictly between 0 and 1, got {confidence}"
        )));
    }
    if inlier_ratios.is_empty() || sample_sizes.is_empty() {
        return Err(CliError::Invalid(
            "need at least one inlier ratio and one sample size".into(),
        ));
    }
    let mut csv = String::from("sample_size");
    for ratio in inlier_ratios {
        let _ = write!(csv, ",{ratio}");
    }
    csv.push('\n');
    for &size in sample_sizes {
        let _ = write!(csv, "{size}");
        for &ratio in inlier_ratios {
            let _ = write!(csv, ",{}", required_iterations(confidence, ratio, size));
        }
        csv.push('\n');
    }
    write_output(global.out.as_deref(), &csv)
}

fn scene_with_seed(seed: u64) -> SceneConfig {
    SceneConfig {
        seed,
        ..SceneConfig::default()
    }
}

fn bench_stability(
    global: &Global,
    instances: u64,
    format: ReportFormat,
    histogram: bool,
) -> Result<(), CliError> {
    let cfg = StabilityConfig {
        scene: scene_with_seed(global.seed),
        instances,
        ..StabilityConfig::default()
    };
    let start = Instant::now();
    let rows = with_pool(global.threads, || {
        (0..cfg.instances)
            .into_par_iter()
            .map(|index| stability_instance(&cfg, index))
            .collect::<Result<Vec<_>, SynthError>>()
    })??;
    let report = aggregate_stability(&cfg, &rows);
    eprintln!(
        "stability: {} instances in {:.3} s ({} failures, {} NaN outputs)",
        report.instances,
        start.elapsed().as_secs_f64(),
        report.failures.iter().sum::<u64>(),
        report.nan_outputs.iter().sum::<u64>(),
    );
    let text = match format {
        ReportFormat::Json => output::to_json_string(&report),
        ReportFormat::Csv if histogram => report.histogram_csv(),
        ReportFormat::Csv => report.summary_csv(),
    };
    write_output(global.out.as_deref(), &text)
}

fn bench_noise(
    global: &Global,
    instances_per_cell: u64,
    format: ReportFormat,
) -> Result<(), CliError> {
    let cfg = NoiseGridConfig {
        scene: scene_with_seed(global.seed),
        instances_per_cell,
        ..NoiseGridConfig::default()
    };
    let start = Instant::now();
    let cells = with_pool(global.threads, || -> Result<Vec<NoiseCell>, SynthError> {
        let mut cells = Vec::new();
        for (axis, sigma) in cfg.cells() {
            let noise = axis.cell(sigma);
            let instances = (0..cfg.instances_per_cell)
                .into_par_iter()
                .map(|index| noise_grid_instance(&cfg, &noise, index))
                .collect::<Result<Vec<NoiseGridInstance>, SynthError>>()?;
            cells.push(aggregate_noise_cell(&cfg, axis, sigma, &instances));
        }
        Ok(cells)
    })??;
    let report = relpose_core::NoiseGridReport {
        solvers: cfg.solvers.clone(),
        instances_per_cell: cfg.instances_per_cell,
        cells,
    };
    eprintln!(
        "noise grid: {} cells x {} instances in {:.3} s",
        report.cells.len(),
        report.instances_per_cell,
        start.elapsed().as_secs_f64(),
    );
    let text = match format {
        ReportFormat::Json => output::to_json_string(&report),
        ReportFormat::Csv => report.to_csv(),
    };
    write_output(global.out.as_deref(), &text)
}

fn bench_applicability(
    global: &Global,
    pairs: u64,
    correspondences: usize,
    outlier_fraction: f64,
    noise: NoiseConfig,
    per_pair: bool,
    format: ReportFormat,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&outlier_fraction) {
        return Err(CliError::Invalid(format!(
            "outlier fraction must lie in [0, 1], got {outlier_fraction}"
        )));
    }
    let cfg = ApplicabilityConfig {
        scene: scene_with_seed(global.seed),
        pairs,
        correspondences_per_pair: correspondences,
        outlier_fraction,
        noise,
        ..ApplicabilityConfig::default()
    };
    let start = Instant::now();
    let outcomes = with_pool(global.threads, || {
        (0..cfg.pairs)
            .into_par_iter()
            .map(|index| applicability_pair(&cfg, index))
            .collect::<Result<Vec<_>, SynthError>>()
    })??;
    let report = aggregate_applicability(&cfg, &outcomes);
    eprintln!(
        "applicability: {:.4} of {} hypotheses reached {} inliers ({:.3} s)",
        report.fraction_with_min_inliers,
        report.hypotheses,
        report.min_inliers,
        start.elapsed().as_secs_f64(),
    );
    let text = match format {
        ReportFormat::Json => output::to_json_string(&report),
        ReportFormat::Csv if per_pair => report.per_pair_csv(),
        ReportFormat::Csv => report.error_cdf_csv(),
    };
    write_output(global.out.as_deref(), &text)
}
