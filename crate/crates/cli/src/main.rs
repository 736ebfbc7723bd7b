//! Command-line front end. Exit codes: 0 when every check in the run
//! passed, 2 when the report was produced but a verification step failed,
//! 1 for usage or internal errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use salem_cli::config::{Construction, ExperimentConfig};
use salem_cli::{emit_report, parse_config, run_experiment, CliError, Format, RunReport};
use salem_core::criteria;
use salem_core::envelope::{BallProfile, FourierProfile};
use salem_core::measure::AtomicMeasure;

#[derive(Parser)]
#[command(
    name = "salemlab",
    about = "Desk-scale constructions of fractal measures with Fourier-decay, ball-mass, and frame-criterion audits",
    version
)]
struct Cli {
    /// Output path stem; writes <out>.json and, with --csv, band/ball CSVs.
    #[arg(long, global = true, default_value = "report")]
    out: PathBuf,

    /// Also emit CSV tables for every profile in the report.
    #[arg(long, global = true)]
    csv: bool,

    /// Optional config file (flat key = value); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Rayon thread count (results are independent of this by design).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonTuning {
    /// Band range lower edge for transform profiles.
    #[arg(long)]
    band_min: Option<i32>,
    /// Band range upper edge for transform profiles.
    #[arg(long)]
    band_max: Option<i32>,
    /// Samples per dyadic band.
    #[arg(long)]
    samples_per_band: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Unequal-weight infinite-convolution truncation with interval audit.
    Convolution {
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 6)]
        levels: u32,
        #[arg(long)]
        seed: u64,
        /// File with comma or newline separated contraction dials in [0,1].
        #[arg(long)]
        t_vector: Option<PathBuf>,
        #[command(flatten)]
        tuning: CommonTuning,
    },
    /// Random dyadic thinning construction with the heavy-node chain.
    Cantor {
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 12)]
        levels: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        retry_cap: u64,
        #[command(flatten)]
        tuning: CommonTuning,
    },
    /// Brownian images of the origin-pinned base measure.
    Brownian {
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 24)]
        levels: u32,
        #[arg(long, default_value_t = 400)]
        paths: u32,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        tuning: CommonTuning,
    },
    /// Prime-periodized measure with positive coefficients.
    Kaufman {
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 1e4)]
        q1: f64,
        #[arg(long, default_value_t = 1e7)]
        q2: f64,
        /// Window-size constant override (calibrated when absent).
        #[arg(long)]
        cs: Option<f64>,
        /// Positivity witness range.
        #[arg(long, default_value_t = 1 << 14)]
        kmax: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tuning: CommonTuning,
    },
    /// Weighted planar arc: decay scan and Gram identity.
    Arc {
        #[arg(long, default_value_t = 1e4)]
        rmax: f64,
        #[arg(long, default_value_t = 64)]
        samples: u32,
        #[arg(long, default_value_t = 128)]
        gram_k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Translate-plus-taper combination over a convolution base.
    Oneline {
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 5)]
        levels: u32,
        #[arg(long)]
        seed: u64,
        /// Taper vanishing point (defaults to the atom nearest 1/2).
        #[arg(long)]
        x0: Option<f64>,
        #[command(flatten)]
        tuning: CommonTuning,
    },
    /// Criterion verdicts over serialized measures and profiles.
    Criteria {
        /// Serialized atomic measure (JSON).
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Serialized transform profile (JSON).
        #[arg(long)]
        fourier: Option<PathBuf>,
        /// Serialized ball profile (JSON).
        #[arg(long)]
        ball: Option<PathBuf>,
        /// JSON array of weight-product ratios.
        #[arg(long)]
        ratios: Option<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        threshold: f64,
    },
}

fn apply_tuning(cfg: &mut ExperimentConfig, tuning: &CommonTuning) {
    if let Some(v) = tuning.band_min {
        cfg.band_min = v;
    }
    if let Some(v) = tuning.band_max {
        cfg.band_max = v;
    }
    if let Some(v) = tuning.samples_per_band {
        cfg.samples_per_band = v;
    }
}

fn load_t_vector(path: &PathBuf) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(e.to_string()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad t entry {p}")))
        })
        .collect()
}

fn build_config(cli: &Cli) -> Result<Option<ExperimentConfig>, CliError> {
    let from_file = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Io(e.to_string()))?;
            Some(parse_config(&text)?)
        }
        None => None,
    };
    let cfg = match &cli.command {
        Command::Convolution {
            s,
            levels,
            seed,
            t_vector,
            tuning,
        } => {
            let mut cfg =
                from_file.unwrap_or_else(|| ExperimentConfig::defaults(Construction::Convolution));
            cfg.construction = Construction::Convolution;
            cfg.s = *s;
            cfg.levels = *levels;
            cfg.seed = *seed;
            if let Some(path) = t_vector {
                cfg.t_vector = Some(load_t_vector(path)?);
            }
            apply_tuning(&mut cfg, tuning);
            Some(cfg)
        }
        Command::Cantor {
            s,
            levels,
            seed,
            retry_cap,
            tuning,
        } => {
            let mut cfg =
                from_file.unwrap_or_else(|| ExperimentConfig::defaults(Construction::Cantor));
            cfg.construction = Construction::Cantor;
            cfg.s = *s;
            cfg.levels = *levels;
            cfg.seed = *seed;
            cfg.retry_cap = *retry_cap;
            apply_tuning(&mut cfg, tuning);
            Some(cfg)
        }
        Command::Brownian {
            s,
            levels,
            paths,
            seed,
            tuning,
        } => {
            let mut cfg =
                from_file.unwrap_or_else(|| ExperimentConfig::defaults(Construction::Brownian));
            cfg.construction = Construction::Brownian;
            cfg.s = *s;
            cfg.levels = *levels;
            cfg.paths = *paths;
            cfg.seed = *seed;
            apply_tuning(&mut cfg, tuning);
            Some(cfg)
        }
        Command::Kaufman {
            s,
            q1,
            q2,
            cs,
            kmax,
            seed,
            tuning,
        } => {
            let mut cfg =
                from_file.unwrap_or_else(|| ExperimentConfig::defaults(Construction::Kaufman));
            cfg.construction = Construction::Kaufman;
            cfg.s = *s;
            cfg.q1 = *q1;
            cfg.q2 = Some(*q2);
            cfg.cs = *cs;
            cfg.kmax = *kmax;
            cfg.seed = *seed;
            apply_tuning(&mut cfg, tuning);
            Some(cfg)
        }
        Command::Arc {
            rmax,
            samples,
            gram_k,
            seed,
        } => {
            let mut cfg =
                from_file.unwrap_or_else(|| ExperimentConfig::defaults(Construction::Arc));
            cfg.construction = Construction::Arc;
            cfg.rmax = *rmax;
            cfg.samples_per_band = *samples;
            cfg.gram_k = *gram_k;
            cfg.seed = *seed;
            Some(cfg)
        }
        Command::Oneline {
            s,
            levels,
            seed,
            x0,
            tuning,
        } => {
            let mut cfg =
                from_file.unwrap_or_else(|| ExperimentConfig::defaults(Construction::OneLine));
            cfg.construction = Construction::OneLine;
            cfg.s = *s;
            cfg.levels = *levels;
            cfg.seed = *seed;
            cfg.x0 = *x0;
            apply_tuning(&mut cfg, tuning);
            Some(cfg)
        }
        Command::Criteria { .. } => None,
    };
    Ok(cfg)
}

fn run_criteria_command(
    measure: &Option<PathBuf>,
    fourier: &Option<PathBuf>,
    ball: &Option<PathBuf>,
    ratios: &Option<PathBuf>,
    threshold: f64,
    out: &PathBuf,
) -> Result<Vec<criteria::CriterionReport>, CliError> {
    let mut reports = Vec::new();
    let read = |p: &PathBuf| -> Result<String, CliError> {
        std::fs::read_to_string(p).map_err(|e| CliError::Io(e.to_string()))
    };
    if let Some(path) = ratios {
        let seq: Vec<f64> = serde_json::from_str(&read(path)?)
            .map_err(|e| CliError::Config(format!("bad ratios file: {e}")))?;
        reports.push(criteria::uniformity_verdict(&seq, threshold));
    }
    if let (Some(fp), Some(bp)) = (fourier, ball) {
        let f: FourierProfile = serde_json::from_str(&read(fp)?)
            .map_err(|e| CliError::Config(format!("bad transform profile: {e}")))?;
        let b: BallProfile = serde_json::from_str(&read(bp)?)
            .map_err(|e| CliError::Config(format!("bad ball profile: {e}")))?;
        reports.push(
            criteria::heavy_decay_verdict(&b, &f).map_err(|e| CliError::Core(e.to_string()))?,
        );
    }
    if let Some(mp) = measure {
        let m: AtomicMeasure = serde_json::from_str(&read(mp)?)
            .map_err(|e| CliError::Config(format!("bad measure: {e}")))?;
        let (lev, illw) = criteria::integral_criteria(
            |xi| {
                salem_core::measure::fourier_atomic(&m, xi).map(|v| v.norm())
            },
            1.0,
            1.0,
            1.0,
            &[32.0, 128.0, 512.0],
        )
        .map_err(|e| CliError::Core(e.to_string()))?;
        reports.push(lev);
        reports.push(illw);
    }
    if reports.is_empty() {
        return Err(CliError::Config(
            "criteria needs at least one of --ratios, --fourier with --ball, or --measure".into(),
        ));
    }
    let json = serde_json::to_string_pretty(&reports).expect("serializable");
    std::fs::write(out.with_extension("json"), json).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(reports)
}

fn real_main() -> Result<ExitCode, CliError> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap would exit 2; usage errors are 1 here, with 2 reserved
            // for failed checks
            eprint!("{e}");
            return Ok(ExitCode::from(1));
        }
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Criteria {
        measure,
        fourier,
        ball,
        ratios,
        threshold,
    } = &cli.command
    {
        let reports =
            run_criteria_command(measure, fourier, ball, ratios, *threshold, &cli.out)?;
        for r in &reports {
            eprintln!("{:?}: {:?}", r.criterion, r.verdict);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let config = build_config(&cli)?.expect("non-criteria command builds a config");
    let report: RunReport = run_experiment(&config)?;
    let mut formats = vec![Format::Json];
    if cli.csv {
        formats.push(Format::Csv);
    }
    let written = emit_report(&report, &formats, &cli.out)?;
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    if report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            eprintln!("check failed: {f}");
        }
        Ok(ExitCode::from(2))
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
