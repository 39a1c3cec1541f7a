use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use speclab::asymmetry::{epsilon, fraenkel_asymmetry};
use speclab::ball_oracle::ball_spectrum;
use speclab::eigensolver::{assemble, extrapolate, lowest_eigenpairs_seeded, DEFAULT_SEED, DEFAULT_TOL};
use speclab::geometry::{make_family, rasterize, FamilyKind, FamilySpec};
use speclab::harness::{
    read_jsonl, run_sweep, verify_inequalities, write_csv, write_jsonl, write_plots, Config, ExperimentRecord, SweepSpec,
};
use speclab::surgery::{hat_extension, radial_cutoff, ratio_competitors, shell_scan, SurgeryConfig};
use speclab::{Error, Result};

#[derive(Parser)]
#[command(name = "speclab", version, about = "Dirichlet eigenvalues of near-ball domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenvalues of one domain.
    Spectrum(Single),
    /// Fraenkel asymmetry of one domain.
    Asymmetry(Single),
    /// Shell scan, hat extension, cutoff and ratio competitors of one domain.
    Surgery(Single),
    /// Sweep families and write records.
    Sweep(SweepArgs),
    /// Check records against the spectral inequalities.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct Single {
    #[arg(long)]
    family: FamilyKind,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Comma list of 1/h; two values in halving relation enable extrapolation.
    #[arg(long, value_delimiter = ',', default_value = "64,128")]
    res: Vec<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Keep the family's natural scale instead of unit volume.
    #[arg(long)]
    unnormalized: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<FamilyKind>,
    #[arg(long, value_delimiter = ',')]
    params: Vec<f64>,
    /// A single parameter, appended to `--params`.
    #[arg(long)]
    param: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    res: Vec<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    unnormalized: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Records file; a `.jsonl` mirror is written next to a CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write log-log SVG plots next to the output.
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON-lines records written by `sweep`.
    #[arg(long)]
    input: PathBuf,
    /// Full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(a) => spectrum(&a).map(|_| 0),
        Command::Asymmetry(a) => asymmetry(&a).map(|_| 0),
        Command::Surgery(a) => surgery(&a).map(|_| 0),
        Command::Sweep(a) => sweep(&a).map(|_| 0),
        Command::Verify(a) => verify(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

impl Single {
    fn spec(&self) -> FamilySpec {
        let spec = FamilySpec::new(self.family, self.dim);
        if self.unnormalized {
            spec.unnormalized()
        } else {
            spec
        }
    }

    fn finest(&self) -> Result<usize> {
        self.res.iter().copied().max().ok_or_else(|| Error::Resolution("empty --res".into()))
    }
}

fn spectrum(a: &Single) -> Result<()> {
    let domain = make_family(&a.spec(), a.param)?;
    let mut res = a.res.clone();
    res.sort_unstable();
    res.dedup();
    let mut levels = Vec::new();
    for &n in &res {
        let raster = rasterize(&domain, 1.0 / n as f64)?;
        let s = lowest_eigenpairs_seeded(&assemble(&raster), a.k, DEFAULT_TOL, a.seed)?;
        levels.push(json!({
            "h": 1.0 / n as f64,
            "nodes": raster.len(),
            "eigenvalues": s.eigenvalues,
            "residuals": s.residuals,
            "iterations": s.iterations,
        }));
    }
    let extrapolated = if res.len() >= 2 {
        let (c, f) = (&levels[levels.len() - 2], &levels[levels.len() - 1]);
        let values = (0..a.k)
            .map(|j| {
                extrapolate(
                    (c["h"].as_f64().unwrap(), c["eigenvalues"][j].as_f64().unwrap()),
                    (f["h"].as_f64().unwrap(), f["eigenvalues"][j].as_f64().unwrap()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Some(values)
    } else {
        None
    };
    emit(
        a.out.as_deref(),
        &json!({
            "family": a.family.name(),
            "s": a.param,
            "dim": a.dim,
            "levels": levels,
            "extrapolated": extrapolated,
            "ball": ball_spectrum(a.dim, a.k)?.eigenvalues(),
        }),
    )
}

fn asymmetry(a: &Single) -> Result<()> {
    let domain = make_family(&a.spec(), a.param)?;
    let raster = rasterize(&domain, 1.0 / a.finest()? as f64)?;
    let r = fraenkel_asymmetry(&raster);
    emit(
        a.out.as_deref(),
        &json!({
            "family": a.family.name(),
            "s": a.param,
            "dim": a.dim,
            "h": raster.spacing(),
            "d": r.d,
            "d_err": r.uncertainty,
            "center": &r.center[..a.dim],
            "eps": epsilon(&raster),
            "probes": r.probes.len(),
        }),
    )
}

fn surgery(a: &Single) -> Result<()> {
    let domain = make_family(&a.spec(), a.param)?;
    let raster = rasterize(&domain, 1.0 / a.finest()? as f64)?;
    let spectrum = lowest_eigenpairs_seeded(&assemble(&raster), a.k, DEFAULT_TOL, a.seed)?;
    let cfg = match a.alpha {
        Some(alpha) => SurgeryConfig::new(a.dim, alpha)?,
        None => SurgeryConfig::default_for(a.dim)?,
    };
    let eps = epsilon(&raster);
    let error = |e: Error| json!({ "error": e.to_string() });
    let scan = shell_scan(&raster, &spectrum, &cfg, eps, 0);
    let hat = match &scan {
        Ok(s) => match hat_extension(&raster, &spectrum, s.t_bar, cfg.delta(eps)) {
            Ok(h) => json!({
                "nodes": h.raster.len(),
                "rayleigh": h.rayleigh,
                "gram_l2": h.gram_l2,
                "ritz": h.ritz,
            }),
            Err(e) => error(e),
        },
        Err(_) => serde_json::Value::Null,
    };
    let cutoff = match radial_cutoff(&raster, &spectrum.eigenvectors[0], &cfg, eps) {
        Ok(c) => json!({ "nodes": c.raster.len(), "rayleigh": c.rayleigh[0] }),
        Err(e) => error(e),
    };
    let competitors = match ratio_competitors(&raster, &spectrum.eigenvectors[0], a.k, None) {
        Ok(c) => json!({ "rayleigh": c.rayleigh, "sigma_min": c.sigma_min, "gram_l2": c.gram_l2 }),
        Err(e) => error(e),
    };
    emit(
        a.out.as_deref(),
        &json!({
            "family": a.family.name(),
            "s": a.param,
            "dim": a.dim,
            "h": raster.spacing(),
            "eps": eps,
            "alpha": cfg.alpha,
            "n": cfg.n,
            "eigenvalues": spectrum.eigenvalues,
            "shell_scan": match scan {
                Ok(s) => serde_json::to_value(&s)?,
                Err(e) => error(e),
            },
            "hat_extension": hat,
            "radial_cutoff": cutoff,
            "ratio_competitors": competitors,
        }),
    )
}

fn workers(flag: Option<usize>, config: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var("SPECLAB_WORKERS") {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("SPECLAB_WORKERS must be a positive integer, got `{v}`")));
    }
    Ok(flag.or(config).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if !a.res.is_empty() {
        cfg.resolutions = a.res.clone();
    }
    if a.alpha.is_some() {
        cfg.alpha = a.alpha;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let mut sweeps = cfg.sweeps();
    if let Some(kind) = a.family {
        let mut spec = FamilySpec::new(kind, a.dim.unwrap_or(cfg.dim));
        if a.unnormalized {
            spec = spec.unnormalized();
        }
        let mut params = a.params.clone();
        params.extend(a.param);
        let mut s = SweepSpec::new(spec, params, cfg.k, cfg.resolutions.clone()).with_seed(cfg.seed);
        s.alpha = cfg.alpha;
        s.surgery = cfg.surgery;
        sweeps.push(s);
    } else if let Some(dim) = a.dim {
        sweeps.iter_mut().for_each(|s| s.spec.dim = dim);
    }
    if sweeps.is_empty() {
        return Err(Error::Invalid("nothing to sweep: give --config or --family".into()));
    }
    let workers = workers(a.workers, cfg.workers)?;
    let mut records: Vec<ExperimentRecord> = Vec::new();
    for s in &sweeps {
        records.extend(run_sweep(s, workers)?);
    }
    for r in records.iter().filter(|r| !r.is_ok()) {
        eprintln!("record {} failed: {}", r.id, r.error.as_deref().unwrap_or(""));
    }

    let mut out = output(a.out.as_deref())?;
    match a.format {
        Format::Csv => write_csv(&records, &mut out)?,
        Format::Jsonl => write_jsonl(&records, &mut out)?,
    }
    out.flush()?;
    if let (Format::Csv, Some(path)) = (a.format, &a.out) {
        write_jsonl(&records, BufWriter::new(File::create(path.with_extension("jsonl"))?))?;
    }
    if a.plots {
        let dir = a
            .out
            .as_ref()
            .and_then(|p| p.parent())
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        for p in write_plots(&records, &dir)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Result<i32> {
    let records = read_jsonl(BufReader::new(File::open(&a.input)?))?;
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to verify".into()));
    }
    let report = verify_inequalities(&records);
    print!("{}", report.summary());
    if let Some(path) = &a.out {
        emit(Some(path), &serde_json::to_value(&report)?)?;
    }
    Ok(report.exit_code())
}
