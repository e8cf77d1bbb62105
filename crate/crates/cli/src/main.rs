//! `acf`: command-line front end for fade enumeration, relay-map generation
//! and checking, fade-plane quantization and throughput simulation.
//!
//! Failures print one JSON line `{"error", "message", "exit_code"}` on
//! stderr. Exit codes: 2 usage, 3 malformed map file, 4 infeasible flags,
//! 5 I/O, 6 verification failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acf_pnc::direct::{direct_map, enumerate_constraints, ConstraintSet};
use acf_pnc::mapfile::{MapFile, FORMAT_VERSION};
use acf_pnc::mapgen::{base_clustering, cartesian_product, rotate_map, transpose_map};
use acf_pnc::metrics::{cluster_min_distance, effective_min_distance, Quantizer};
use acf_pnc::simulator::run_simulation;
use acf_pnc::{
    DecisionMethod, FadeState, GridSpec, LatinSquare, MapLibrary, MapMethod, Scheme, SignalSet, SimConfig,
    SingularFadeSet,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// A map removes its fade when its cluster distance there exceeds this.
const REMOVAL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    MalformedMap(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MalformedMap(_) => "malformed_map",
            CliError::Infeasible(_) => "infeasible",
            CliError::Io { .. } => "io",
            CliError::Verification(_) => "verification_failed",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MalformedMap(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Verification(_) => 6,
        }
    }
}

impl From<acf_pnc::Error> for CliError {
    fn from(e: acf_pnc::Error) -> Self {
        use acf_pnc::Error as E;
        match e {
            E::MapFile(_) | E::MalformedSquare(_) | E::Json(_) | E::PartitionConflict { .. } => {
                CliError::MalformedMap(e.to_string())
            }
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "acf", version, about = "Relay maps for two-way ACF relaying with PSK signal sets")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the singular fade states as JSON.
    Fades {
        #[arg(long, default_value_t = 2)]
        lambda: u32,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate relay maps.
    Latin {
        #[command(subcommand)]
        command: LatinCommand,
    },
    /// Pick a map for every point of a fade-plane grid.
    Quantize(QuantizeArgs),
    /// Simulate end-to-end throughput over Rayleigh fading.
    Simulate(SimulateArgs),
    /// Check a map file: Latin property and removal of its fade state.
    Verify {
        map: PathBuf,
        /// Fade to check instead of the one recorded in the file.
        #[arg(long, value_parser = parse_fade, allow_hyphen_values = true)]
        fade: Option<FadeState>,
    },
}

#[derive(Debug, Subcommand)]
enum LatinCommand {
    /// Build the map for one singular fade state.
    Gen {
        #[arg(long, value_parser = parse_fade, allow_hyphen_values = true)]
        fade: FadeState,
        /// cartesian, direct, rotate:K or transpose.
        #[arg(long, value_parser = parse_gen_method)]
        method: GenMethod,
        #[arg(long, default_value_t = 2)]
        lambda: u32,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the direct-clustering constraints to this file.
        #[arg(long)]
        emit_constraints: Option<PathBuf>,
    },
    /// Build one map per singular fade state plus an index.
    Lib {
        /// cartesian or direct.
        #[arg(long, value_parser = parse_map_method)]
        method: MapMethod,
        #[arg(long, default_value_t = 2)]
        lambda: u32,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write the direct-clustering constraints of every fade.
        #[arg(long)]
        emit_constraints: bool,
    },
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    /// re0,re1,im0,im1,step
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true, default_value = "-2,2,-2,2,0.02")]
    grid: GridSpec,
    /// full or simple.
    #[arg(long, value_parser = parse_decision)]
    method: DecisionMethod,
    /// Library the maps come from: cartesian or direct.
    #[arg(long, value_parser = parse_map_method, default_value = "cartesian")]
    library: MapMethod,
    #[arg(long, default_value_t = 2)]
    lambda: u32,
    /// CSV output; the legend goes next to it as `<stem>.legend.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// acf-cp, acf-dc, two-stage or fixed-xor.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    /// `start:step:stop`, a comma list, or `inf` for noiseless.
    #[arg(long, value_parser = parse_snr)]
    snr: SnrList,
    #[arg(long, default_value_t = 10_000)]
    frames: usize,
    #[arg(long, env = "PNC_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    lambda: u32,
    /// Bits per user per frame; defaults to the largest multiple of the bits
    /// per exchange not above 256.
    #[arg(long)]
    frame_length: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy)]
enum GenMethod {
    Cartesian,
    Direct,
    Rotate(i64),
    Transpose,
}

#[derive(Debug, Clone)]
struct SnrList(Vec<f64>);

fn parse_fade(s: &str) -> Result<FadeState, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [re, im] => {
            let re: f64 = re.trim().parse().map_err(|_| format!("bad real part {re:?}"))?;
            let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part {im:?}"))?;
            Ok(FadeState::new(re, im))
        }
        _ => Err(format!("expected re,im, got {s:?}")),
    }
}

fn parse_gen_method(s: &str) -> Result<GenMethod, String> {
    match s {
        "cartesian" => Ok(GenMethod::Cartesian),
        "direct" => Ok(GenMethod::Direct),
        "transpose" => Ok(GenMethod::Transpose),
        _ => match s.strip_prefix("rotate:") {
            Some(k) => k.parse().map(GenMethod::Rotate).map_err(|_| format!("bad rotation count {k:?}")),
            None => Err(format!("unknown method {s:?}")),
        },
    }
}

fn parse_map_method(s: &str) -> Result<MapMethod, String> {
    match s.parse::<MapMethod>() {
        Ok(m @ (MapMethod::Cartesian | MapMethod::Direct)) => Ok(m),
        _ => Err(format!("expected cartesian or direct, got {s:?}")),
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: acf_pnc::Error| e.to_string())
}

fn parse_decision(s: &str) -> Result<DecisionMethod, String> {
    s.parse().map_err(|e: acf_pnc::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: acf_pnc::Error| e.to_string())
}

fn parse_snr(s: &str) -> Result<SnrList, String> {
    let num = |t: &str| -> Result<f64, String> {
        match t.trim() {
            "inf" => Ok(f64::INFINITY),
            v => v.parse::<f64>().map_err(|_| format!("bad SNR value {v:?}")),
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite() && stop >= start) {
                return Err(format!("bad SNR range {s:?}"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("expected start:step:stop or a comma list, got {s:?}")),
    };
    Ok(SnrList(values))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn emit(out: Option<&Path>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, contents),
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

/// Looks `h` up in the fade set, returning the stored (exact) state.
fn singular(set: &SignalSet, h: FadeState) -> CliResult<FadeState> {
    let fades = SingularFadeSet::enumerate(set);
    fades
        .index_of(h)
        .map(|i| fades.states()[i])
        .ok_or_else(|| CliError::Infeasible(format!("fade state {h} is not singular for lambda {}", set.lambda())))
}

fn constraints_json(cs: &ConstraintSet) -> serde_json::Value {
    json!({ "format_version": FORMAT_VERSION, "constraints": cs })
}

fn cmd_fades(lambda: u32, out: Option<&Path>) -> CliResult<()> {
    let set = SignalSet::new(lambda)?;
    let fades = SingularFadeSet::enumerate(&set);
    let doc = json!({ "format_version": FORMAT_VERSION, "lambda": lambda, "fades": fades.to_json() });
    emit(out, &pretty(&doc))
}

fn generate(set: &SignalSet, h: FadeState, method: GenMethod) -> CliResult<(LatinSquare, FadeState, MapMethod)> {
    let cartesian = |g: FadeState| -> CliResult<LatinSquare> { Ok(cartesian_product(&base_clustering(set, g)?)) };
    match method {
        GenMethod::Cartesian => {
            let h = singular(set, h)?;
            Ok((cartesian(h)?, h, MapMethod::Cartesian))
        }
        GenMethod::Direct => {
            let h = singular(set, h)?;
            Ok((direct_map(set, h)?.square, h, MapMethod::Direct))
        }
        GenMethod::Rotate(k) => {
            let h = singular(set, h)?;
            let step = 2.0 * std::f64::consts::PI / set.size() as f64;
            let source = FadeState::from_polar(h.gamma(), h.theta() - k as f64 * step);
            let source = singular(set, source)?;
            Ok((rotate_map(&cartesian(source)?, k, set)?, h, MapMethod::Rotate))
        }
        GenMethod::Transpose => {
            let h = singular(set, h)?;
            let source = singular(set, FadeState::from_complex(1.0 / h.as_complex()))?;
            Ok((transpose_map(&cartesian(source)?), h, MapMethod::Transpose))
        }
    }
}


fn cmd_latin_gen(
    h: FadeState,
    method: GenMethod,
    lambda: u32,
    out: Option<&Path>,
    emit_constraints: Option<&Path>,
) -> CliResult<()> {
    let set = SignalSet::new(lambda)?;
    let (square, fade, tag) = generate(&set, h, method)?;
    if let Some(path) = emit_constraints {
        write_file(path, &pretty(&constraints_json(&enumerate_constraints(&set, fade)?)))?;
    }
    emit(out, &MapFile::new(&square, fade, tag, &set).to_json())
}

fn cmd_latin_lib(method: MapMethod, lambda: u32, out_dir: &Path, emit_constraints: bool) -> CliResult<()> {
    let set = SignalSet::new(lambda)?;
    let lib = MapLibrary::build(&set, method)?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
    let mut maps = Vec::with_capacity(lib.len());
    for (i, e) in lib.entries().iter().enumerate() {
        let name = format!("map_{i:02}.json");
        write_file(&out_dir.join(&name), &MapFile::new(&e.square, e.fade, e.method, &set).to_json())?;
        let mut row = json!({
            "index": i,
            "file": name,
            "fade": e.fade,
            "method": e.method,
            "label_count": e.square.label_count(),
        });
        if emit_constraints {
            let cname = format!("constraints_{i:02}.json");
            let cs = enumerate_constraints(&set, e.fade)?;
            write_file(&out_dir.join(&cname), &pretty(&constraints_json(&cs)))?;
            row["constraints"] = json!(cname);
        }
        maps.push(row);
    }
    let index = json!({
        "format_version": FORMAT_VERSION,
        "lambda": lambda,
        "method": method,
        "maps": maps,
    });
    write_file(&out_dir.join("index.json"), &pretty(&index))
}

fn cmd_quantize(args: &QuantizeArgs) -> CliResult<()> {
    let set = SignalSet::new(args.lambda)?;
    let lib = MapLibrary::build(&set, args.library)?;
    let q = match args.method {
        DecisionMethod::Full => Quantizer::new(&lib),
        DecisionMethod::Simple => Quantizer::simple_only(&lib),
    };
    let region = q.quantize(&args.grid, args.method);
    write_file(&args.out, &region.to_csv())?;
    let legend = json!({
        "format_version": FORMAT_VERSION,
        "lambda": args.lambda,
        "library": args.library,
        "method": args.method,
        "grid": args.grid,
        "fades": lib.fades().to_json(),
        "ties": region.ties.iter().filter(|&&t| t).count(),
    });
    write_file(&args.out.with_extension("legend.json"), &pretty(&legend))
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let set = SignalSet::new(args.lambda)?;
    let mut config = SimConfig::new(args.scheme, args.lambda, args.snr.0.clone(), args.frames, args.seed);
    if let Some(len) = args.frame_length {
        config.frame_length = len;
    }
    config.validate()?;
    let lib = args.scheme.library(&set)?;
    let result = run_simulation(&config, &lib)?;
    write_file(&args.out, &result.to_csv())?;
    let summary = json!({
        "format_version": FORMAT_VERSION,
        "config": result.config,
        "bc_signal_set": result.bc_signal_set,
        "points": result.points,
    });
    println!("{}", serde_json::to_string(&summary).expect("JSON values always serialize"));
    Ok(())
}

fn cmd_verify(path: &Path, fade: Option<FadeState>) -> CliResult<()> {
    let file = MapFile::from_json(&read_file(path)?)?;
    let set = file.signal_set()?;
    let square = file.square()?;
    let m = set.size();
    if square.order() != m * m {
        return Err(CliError::MalformedMap(format!(
            "order {} does not match a {m}-point signal set (expected {})",
            square.order(),
            m * m
        )));
    }
    let h = fade.unwrap_or(file.meta.fade);
    let report = square.validate();
    let latin = report.is_ok();
    let (cluster_distance, removes) = if latin {
        let d = cluster_min_distance(&square, &set, h);
        (Some(d), d > REMOVAL_THRESHOLD)
    } else {
        (None, false)
    };
    let summary = json!({
        "format_version": FORMAT_VERSION,
        "order": square.order(),
        "label_count": square.label_count(),
        "fade": h,
        "singular": effective_min_distance(&set, h) < 1e-9,
        "latin": latin,
        "violations": report.violations,
        "cluster_distance": cluster_distance,
        "removes_fade": removes,
    });
    println!("{}", pretty(&summary));
    if !latin {
        let v = report.first().expect("a failed report has a violation");
        return Err(CliError::Verification(format!(
            "{} violations, first at row {} column {} (label {} repeated in its {:?})",
            report.violations.len(),
            v.row,
            v.col,
            v.label,
            v.axis
        )));
    }
    if !removes {
        return Err(CliError::Verification(format!("map does not remove fade state {h}")));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Fades { lambda, out } => cmd_fades(lambda, out.as_deref()),
        Command::Latin { command: LatinCommand::Gen { fade, method, lambda, out, emit_constraints } } => {
            cmd_latin_gen(fade, method, lambda, out.as_deref(), emit_constraints.as_deref())
        }
        Command::Latin { command: LatinCommand::Lib { method, lambda, out_dir, emit_constraints } } => {
            cmd_latin_lib(method, lambda, &out_dir, emit_constraints)
        }
        Command::Quantize(args) => cmd_quantize(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Verify { map, fade } => cmd_verify(&map, fade),
    }
}

fn fail(err: CliError) -> ExitCode {
    let line = json!({ "error": err.kind(), "message": err.to_string(), "exit_code": err.code() });
    eprintln!("{line}");
    ExitCode::from(err.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail(CliError::Usage(first.to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
