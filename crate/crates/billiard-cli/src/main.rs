//! Command-line laboratory for open billiard flows: scene checks, periodic
//! orbits, curvature products, pinching and non-integrability certificates,
//! transfer-operator spectra, orbit counting, and SVG figures.
//!
//! Exit codes: 0 success, 1 usage/configuration/solver error, 2 a verified
//! property failed its check.

mod render;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use billiard::certify::{pinching_exponents, verify_nonintegrability};
use billiard::counting::{counting_report, orbit_table};
use billiard::curvature::{expansion_factors, fd_period_expansion};
use billiard::geometry::{check_no_eclipse, scene_constants, Scene};
use billiard::orbits::{find_periodic_orbit, max_angle_estimate, PeriodicOrbit};
use billiard::symbolic::Word;
use billiard::transfer::spectral_report;
use billiard::Error;

use report::{emit_csv, emit_json, emit_text, scene_hash, Envelope};

#[derive(Parser)]
#[command(
    name = "billiard-cli",
    about = "Numerical laboratory for open billiard flows outside strictly convex obstacles"
)]
struct Cli {
    /// Scene JSON file (may also come from --config).
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// JSON config file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report artifacts.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for randomized sampling; fixed seed means bit-identical reports.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene-level checks and constants.
    Geometry {
        #[command(subcommand)]
        sub: GeometryCmd,
    },
    /// Periodic orbit solves and tables.
    Orbit {
        #[command(subcommand)]
        sub: OrbitCmd,
    },
    /// Curvature evolution and expansion products.
    Curvature {
        #[command(subcommand)]
        sub: CurvatureCmd,
    },
    /// Pinching and non-integrability certificates.
    Certify {
        #[command(subcommand)]
        sub: CertifyCmd,
    },
    /// Transfer-operator spectra and contraction curves.
    Transfer {
        #[command(subcommand)]
        sub: TransferCmd,
    },
    /// Orbit counting against the logarithmic integral.
    Count {
        #[command(subcommand)]
        sub: CountCmd,
    },
    /// SVG figure of the scene with selected orbits.
    Render(RenderArgs),
}

#[derive(Subcommand)]
enum GeometryCmd {
    /// No-eclipse certificate, pairwise gaps and scene constants.
    Check {
        /// Maximum incidence angle for the derived constants.
        #[arg(long)]
        phi0: Option<f64>,
    },
}

#[derive(Subcommand)]
enum OrbitCmd {
    /// Solve the periodic orbit of one cyclic word, e.g. `1-2-3`.
    Find { word: String },
    /// CSV table of all primitive orbits up to a period bound.
    Table {
        #[arg(long)]
        max_period: Option<usize>,
    },
}

#[derive(Subcommand)]
enum CurvatureCmd {
    /// Expansion factors along an orbit, cross-checked against the
    /// finite-difference period map.
    Verify {
        #[arg(long)]
        word: String,
        #[arg(long)]
        periods: Option<usize>,
    },
}

#[derive(Subcommand)]
enum CertifyCmd {
    /// Pinching exponents and the gap/curvature inequality.
    Pinching {
        /// Angle bound; `auto` estimates it from orbits up to --max-period.
        #[arg(long, default_value = "auto")]
        phi0: String,
        #[arg(long)]
        max_period: Option<usize>,
    },
    /// Symplectic non-integrability pairing on a perpendicular orbit.
    Symplectic {
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        pair: Vec<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Subcommand)]
enum TransferCmd {
    /// Pressure, entropy-by-depth and contraction curves.
    Spectrum {
        #[arg(long)]
        depth: Option<usize>,
        /// Twist frequencies, comma separated.
        #[arg(long, value_delimiter = ',')]
        b: Vec<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Operator iterations in the seed-based contraction estimate.
        #[arg(long)]
        iterate: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Subcommand)]
enum CountCmd {
    /// Counting function against li(e^(h t)) over a length grid.
    Pi {
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        max_period: Option<usize>,
        /// Cylinder depth for the entropy estimate.
        #[arg(long)]
        depth: Option<usize>,
    },
}

#[derive(Args)]
struct RenderArgs {
    /// Cyclic words to draw, semicolon separated, e.g. `1-2;1-2-3`.
    #[arg(long, value_delimiter = ';')]
    words: Vec<String>,
    /// Output file name (under --output-dir).
    #[arg(long)]
    out: Option<String>,
}

/// Flat config file: any field may be omitted; command-line flags win.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scene_path: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    phi0: Option<f64>,
    max_period: Option<usize>,
    depth: Option<usize>,
    lambda: Option<f64>,
    samples: Option<usize>,
    b_list: Option<Vec<f64>>,
    theta: Option<f64>,
    iterate: Option<usize>,
    trials: Option<usize>,
    lambda_max: Option<f64>,
    periods: Option<usize>,
}

struct Context {
    scene: Scene,
    hash: String,
    output_dir: PathBuf,
    seed: u64,
    cfg: FileConfig,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("BILLIARD_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg: FileConfig = match &cli.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };
    let scene_path = cli
        .scene
        .clone()
        .or_else(|| cfg.scene_path.clone())
        .ok_or("no scene file (pass --scene or set scene_path in --config)")?;
    let scene_bytes = fs::read(&scene_path)?;
    let scene = Scene::from_json_str(std::str::from_utf8(&scene_bytes)?)?;
    let ctx = Context {
        scene,
        hash: scene_hash(&scene_bytes),
        output_dir: cli
            .output_dir
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        cfg,
    };
    match cli.command {
        Command::Geometry { sub } => geometry_cmd(&ctx, sub),
        Command::Orbit { sub } => orbit_cmd(&ctx, sub),
        Command::Curvature { sub } => curvature_cmd(&ctx, sub),
        Command::Certify { sub } => certify_cmd(&ctx, sub),
        Command::Transfer { sub } => transfer_cmd(&ctx, sub),
        Command::Count { sub } => count_cmd(&ctx, sub),
        Command::Render(args) => render_cmd(&ctx, args),
    }
}

fn parse_cyclic_word(text: &str, scene: &Scene) -> Result<Word, Error> {
    let word = Word::parse(text, true)?;
    if word.symbols().iter().any(|&s| s > scene.obstacle_count()) {
        return Err(Error::Domain(format!(
            "word {text} references an obstacle beyond {}",
            scene.obstacle_count()
        )));
    }
    Ok(word)
}

fn geometry_cmd(ctx: &Context, sub: GeometryCmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match sub {
        GeometryCmd::Check { phi0 } => {
            let phi0 = phi0.or(ctx.cfg.phi0);
            let certificate = check_no_eclipse(&ctx.scene);
            let constants = match phi0 {
                Some(angle) => Some(scene_constants(&ctx.scene, angle)?),
                None => None,
            };
            let k0 = ctx.scene.obstacle_count();
            let gaps: Vec<serde_json::Value> = (1..=k0)
                .flat_map(|i| {
                    ((i + 1)..=k0)
                        .map(move |j| json!({"pair": [i, j], "gap": ctx.scene.gap(i, j)}))
                })
                .collect();
            let holds = certificate.holds;
            let envelope = Envelope {
                scene_hash: ctx.hash.clone(),
                command: "geometry check".into(),
                seed: ctx.seed,
                params: json!({ "phi0": phi0 }),
                report: json!({
                    "certificate": certificate,
                    "gaps": gaps,
                    "constants": constants,
                }),
            };
            emit_json(&ctx.output_dir, "geometry_check", &envelope)?;
            Ok(verdict(holds))
        }
    }
}

fn orbit_cmd(ctx: &Context, sub: OrbitCmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match sub {
        OrbitCmd::Find { word } => {
            let cyclic = parse_cyclic_word(&word, &ctx.scene)?;
            let orbit = find_periodic_orbit(&ctx.scene, &cyclic, 1e-12)?;
            let envelope = Envelope {
                scene_hash: ctx.hash.clone(),
                command: "orbit find".into(),
                seed: ctx.seed,
                params: json!({ "word": cyclic.label() }),
                report: &orbit,
            };
            emit_json(&ctx.output_dir, "orbit_find", &envelope)?;
            Ok(ExitCode::SUCCESS)
        }
        OrbitCmd::Table { max_period } => {
            let max_period = max_period.or(ctx.cfg.max_period).unwrap_or(6);
            let table = orbit_table(&ctx.scene, max_period)?;
            let params = json!({ "max_period": max_period });
            let rows: Vec<String> = table
                .entries
                .iter()
                .map(|e| {
                    format!(
                        "{},{},{:.12},{:.12},{:.12},{}",
                        e.word.label(),
                        e.period,
                        e.length,
                        e.min_angle,
                        e.max_angle,
                        e.primitive
                    )
                })
                .collect();
            let path = emit_csv(
                &ctx.output_dir,
                "orbit_table",
                &ctx.hash,
                "orbit table",
                &params,
                "word,period,length,min_angle,max_angle,primitive",
                &rows,
            )?;
            println!(
                "wrote {} entries (complete: {}) to {}",
                table.entries.len(),
                table.complete,
                path.display()
            );
            Ok(verdict(table.complete))
        }
    }
}

fn curvature_cmd(ctx: &Context, sub: CurvatureCmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match sub {
        CurvatureCmd::Verify { word, periods } => {
            let periods = periods.or(ctx.cfg.periods).unwrap_or(1);
            let cyclic = parse_cyclic_word(&word, &ctx.scene)?;
            let orbit = find_periodic_orbit(&ctx.scene, &cyclic, 1e-12)?;
            let expansion = expansion_factors(&ctx.scene, &orbit, periods)?;
            let fd = fd_period_expansion(&ctx.scene, &orbit, periods, 1e-6)?;
            let cross_check = expansion.product * fd;
            let ok = (cross_check - 1.0).abs() < 1e-4;
            let envelope = Envelope {
                scene_hash: ctx.hash.clone(),
                command: "curvature verify".into(),
                seed: ctx.seed,
                params: json!({ "word": cyclic.label(), "periods": periods }),
                report: json!({
                    "word": cyclic.label(),
                    "bounces": expansion.bounces,
                    "product": expansion.product,
                    "fd_expansion": fd,
                    "product_times_fd": cross_check,
                }),
            };
            emit_json(&ctx.output_dir, "curvature_verify", &envelope)?;
            Ok(verdict(ok))
        }
    }
}

fn certify_cmd(ctx: &Context, sub: CertifyCmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match sub {
        CertifyCmd::Pinching { phi0, max_period } => {
            let max_period = max_period.or(ctx.cfg.max_period).unwrap_or(6);
            let (phi_value, phi_source) = if phi0 == "auto" {
                (max_angle_estimate(&ctx.scene, max_period)?, "empirical")
            } else {
                (phi0.parse::<f64>().map_err(|_| {
                    Error::Domain(format!("phi0 must be a number or `auto`, got {phi0}"))
                })?, "supplied")
            };
            let constants = scene_constants(&ctx.scene, phi_value)?;
            let report = pinching_exponents(&constants);
            let ok = report.inequality_holds && report.margin > 0.0;
            let envelope = Envelope {
                scene_hash: ctx.hash.clone(),
                command: "certify pinching".into(),
                seed: ctx.seed,
                params: json!({
                    "phi0": phi_value,
                    "phi0_source": phi_source,
                    "max_period": max_period,
                }),
                report: json!({ "constants": constants, "pinching": report }),
            };
            emit_json(&ctx.output_dir, "certify_pinching", &envelope)?;
            Ok(verdict(ok))
        }
        CertifyCmd::Symplectic {
            pair,
            lambda,
            samples,
        } => {
            if pair.len() != 2 {
                return Err(Box::new(Error::Domain(
                    "--pair takes exactly two obstacle indices".into(),
                )));
            }
            let lambda = lambda.or(ctx.cfg.lambda).unwrap_or(1.0);
            let samples = samples.or(ctx.cfg.samples).unwrap_or(100);
            let params = json!({
                "pair": pair,
                "lambda": lambda,
                "samples": samples,
            });
            match verify_nonintegrability(
                &ctx.scene,
                (pair[0], pair[1]),
                lambda,
                samples,
                ctx.seed,
            ) {
                Ok(report) => {
                    let ok = report.min_eig_p > 0.0;
                    let envelope = Envelope {
                        scene_hash: ctx.hash.clone(),
                        command: "certify symplectic".into(),
                        seed: ctx.seed,
                        params,
                        report,
                    };
                    emit_json(&ctx.output_dir, "certify_symplectic", &envelope)?;
                    Ok(verdict(ok))
                }
                Err(Error::Verification(msg)) => {
                    let envelope = Envelope {
                        scene_hash: ctx.hash.clone(),
                        command: "certify symplectic".into(),
                        seed: ctx.seed,
                        params,
                        report: json!({ "verification_failure": msg }),
                    };
                    emit_json(&ctx.output_dir, "certify_symplectic", &envelope)?;
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(Box::new(e)),
            }
        }
    }
}

fn transfer_cmd(ctx: &Context, sub: TransferCmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match sub {
        TransferCmd::Spectrum {
            depth,
            b,
            theta,
            iterate,
            trials,
        } => {
            let depth = depth.or(ctx.cfg.depth).unwrap_or(5);
            let b_list = if b.is_empty() {
                ctx.cfg
                    .b_list
                    .clone()
                    .unwrap_or_else(|| vec![0.0, 10.0, 50.0, 200.0])
            } else {
                b
            };
            let theta = theta.or(ctx.cfg.theta);
            let iterate = iterate.or(ctx.cfg.iterate).unwrap_or(8);
            let trials = trials.or(ctx.cfg.trials).unwrap_or(5);
            let report = spectral_report(
                &ctx.scene,
                depth,
                theta,
                &b_list,
                iterate,
                trials,
                ctx.seed,
            )?;
            let params = json!({
                "depth": depth,
                "b_list": b_list,
                "theta": theta,
                "iterate": iterate,
                "trials": trials,
            });
            let rows: Vec<String> = report
                .contraction
                .iter()
                .map(|p| format!("{:.6},{:.12},{:.12}", p.b, p.rho_seed_max, p.rho_spectral))
                .collect();
            emit_csv(
                &ctx.output_dir,
                "transfer_contraction",
                &ctx.hash,
                "transfer spectrum",
                &params,
                "b,rho_seed_max,rho_spectral",
                &rows,
            )?;
            let envelope = Envelope {
                scene_hash: ctx.hash.clone(),
                command: "transfer spectrum".into(),
                seed: ctx.seed,
                params,
                report,
            };
            emit_json(&ctx.output_dir, "transfer_spectrum", &envelope)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn count_cmd(ctx: &Context, sub: CountCmd) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match sub {
        CountCmd::Pi {
            lambda_max,
            max_period,
            depth,
        } => {
            let max_period = max_period.or(ctx.cfg.max_period).unwrap_or(12);
            let depth = depth.or(ctx.cfg.depth).unwrap_or(6);
            let table = orbit_table(&ctx.scene, max_period)?;
            let lambda_max = lambda_max
                .or(ctx.cfg.lambda_max)
                .unwrap_or_else(|| table.horizon());
            let model = billiard::transfer::build_cylinder_model(&ctx.scene, depth, None)?;
            let h_t = billiard::transfer::entropy(&model)?;
            let start = table
                .entries
                .first()
                .map(|e| e.length)
                .ok_or_else(|| Error::Domain("empty orbit table".into()))?;
            let steps = 48;
            let lambdas: Vec<f64> = (0..=steps)
                .map(|k| start + (lambda_max - start) * k as f64 / steps as f64)
                .collect();
            let rows = counting_report(&table, h_t, &lambdas)?;
            let envelope = Envelope {
                scene_hash: ctx.hash.clone(),
                command: "count pi".into(),
                seed: ctx.seed,
                params: json!({
                    "lambda_max": lambda_max,
                    "max_period": max_period,
                    "depth": depth,
                    "entropy": h_t,
                }),
                report: rows,
            };
            emit_json(&ctx.output_dir, "count_pi", &envelope)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn render_cmd(ctx: &Context, args: RenderArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for text in &args.words {
        let word = parse_cyclic_word(text, &ctx.scene)?;
        orbits.push(find_periodic_orbit(&ctx.scene, &word, 1e-12)?);
    }
    let words: Vec<String> = orbits.iter().map(|o| o.word.label()).collect();
    let header = format!(
        "scene_hash={} command=render words={} seed={}",
        ctx.hash,
        words.join(";"),
        ctx.seed
    );
    let svg = render::render_svg(&ctx.scene, &orbits, &header)?;
    let file_name = args.out.unwrap_or_else(|| "render.svg".into());
    let path = emit_text(&ctx.output_dir, &file_name, &svg)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn verdict(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
