use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dcreg_bench::{inspect, parse_solvers, run_benchmark, BenchSpec, NormalSource, Perturbation};
use dcreg_core::characterizer::Axis;
use dcreg_core::cloud::{load_cloud, save_cloud};
use dcreg_core::mitigator::SolverKind;
use dcreg_core::scene::{gen_scene, SceneKind, SceneSpec};
use dcreg_core::{register, CloudFormat, RigidTransform, SolverConfig};
use nalgebra::Vector3;

#[derive(Parser)]
#[command(name = "dcreg", version, about = "Degeneracy-aware point-to-plane ICP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align SOURCE to TARGET and print the result as JSON.
    Register {
        source: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the result JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the source cloud moved by the final pose.
        #[arg(long)]
        aligned: Option<PathBuf>,
    },
    /// Run every requested solver on one perturbed synthetic scene.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
        /// `all` or a comma-separated list (dcreg-pcg,treg,tsvd,sr,plain).
        #[arg(long, default_value = "all")]
        solvers: String,
        #[arg(long, default_value = "z", value_parser = parse_axis)]
        rot_axis: Axis,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        rot_deg: f64,
        #[arg(long, default_value = "z", value_parser = parse_axis)]
        trans_axis: Axis,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        trans_m: f64,
        /// Target normals: estimated (k nearest neighbors) or analytic.
        #[arg(long, default_value = "estimated", value_parser = parse_normals)]
        normals: NormalSource,
        #[command(flatten)]
        solver: SolverArgs,
        /// JSONL report path; the CSV summary is written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic scene to a cloud file.
    Gen {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection and axis characterization of CLOUD (against TARGET, or
    /// itself) at one pose.
    Inspect {
        cloud: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct InitArgs {
    /// Initial rotation as an axis-angle vector in degrees, "x,y,z".
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    init_rot_deg: Option<Vector3<f64>>,
    /// Initial translation in meters, "x,y,z".
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    init_trans: Option<Vector3<f64>>,
}

impl InitArgs {
    fn pose(&self) -> RigidTransform {
        let phi = self
            .init_rot_deg
            .unwrap_or_else(Vector3::zeros)
            .map(f64::to_radians);
        RigidTransform::from_axis_angle(&phi, self.init_trans.unwrap_or_else(Vector3::zeros))
    }
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value = "cylinder")]
    scene: SceneKind,
    /// Point count (scene default when omitted).
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    extent: Option<f64>,
    #[arg(long)]
    wall_gap: Option<f64>,
    /// Gaussian coordinate noise, meters.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SceneArgs {
    fn spec(&self) -> SceneSpec {
        let d = SceneSpec::new(self.scene);
        SceneSpec {
            point_count: self.points.unwrap_or(d.point_count),
            radius: self.radius.unwrap_or(d.radius),
            height: self.height.unwrap_or(d.height),
            extent: self.extent.unwrap_or(d.extent),
            wall_gap: self.wall_gap.unwrap_or(d.wall_gap),
            noise_sigma: self.noise.unwrap_or(d.noise_sigma),
            seed: self.seed,
            ..d
        }
    }
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Args)]
struct SolverArgs {
    /// JSON file with any subset of the solver configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kappa_th: Option<f64>,
    #[arg(long)]
    kappa_tg: Option<f64>,
    #[arg(long)]
    pcg_tol: Option<f64>,
    #[arg(long)]
    pcg_max_iter: Option<usize>,
    /// Step solver (ignored by `bench`, which takes --solvers).
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    corr_radius: Option<f64>,
    #[arg(long)]
    treg_lambda: Option<f64>,
    #[arg(long)]
    trans_convergence: Option<f64>,
    #[arg(long)]
    rot_convergence: Option<f64>,
    #[arg(long)]
    normal_k: Option<usize>,
    #[arg(long)]
    fitness_radius: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => SolverConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(kappa_th => kappa_th, kappa_tg => kappa_tg, pcg_tol => pcg_tol,
             pcg_max_iter => pcg_max_iter, solver => solver, max_iter => max_icp_iterations,
             corr_radius => corr_radius, treg_lambda => treg_lambda,
             trans_convergence => trans_convergence, rot_convergence => rot_convergence,
             normal_k => normal_k, fitness_radius => fitness_radius);
        c.validate()?;
        Ok(c)
    }
}

fn parse_vec3(s: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vector3::new(x, y, z)),
        _ => Err(format!("expected three comma-separated numbers, got {s:?}")),
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(format!("axis must be x, y or z, got {s:?}")),
    }
}

fn parse_normals(s: &str) -> Result<NormalSource, String> {
    match s {
        "estimated" => Ok(NormalSource::Estimated),
        "analytic" => Ok(NormalSource::Analytic),
        _ => Err(format!("normals must be estimated or analytic, got {s:?}")),
    }
}

fn load(path: &Path) -> anyhow::Result<dcreg_core::PointCloud> {
    let format = CloudFormat::from_path(path)?;
    load_cloud(path, format).with_context(|| format!("loading {}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

/// `DCREG_THREADS` caps the worker pool; 0 or unset lets rayon decide.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("DCREG_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("DCREG_THREADS must be a count, got {value:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Register {
            source,
            target,
            init,
            solver,
            out,
            aligned,
        } => {
            let config = solver.config()?;
            let src = load(&source)?;
            let tgt = load(&target)?;
            let result = register(&src, &tgt, &init.pose(), &config)?;
            eprintln!(
                "{:?} after {} iterations, fitness {:.2}%, rmse {:.4} m",
                result.reason,
                result.iterations(),
                result.metrics.fitness,
                result.metrics.rmse
            );
            if let Some(path) = aligned {
                let moved = src.transformed(&result.final_pose);
                save_cloud(&moved, &path, CloudFormat::from_path(&path)?)?;
            }
            write_output(
                out.as_deref(),
                &(serde_json::to_string_pretty(&result)? + "\n"),
            )
        }
        Command::Bench {
            scene,
            solvers,
            rot_axis,
            rot_deg,
            trans_axis,
            trans_m,
            normals,
            solver,
            out,
        } => {
            let config = solver.config()?;
            let solvers = parse_solvers(&solvers)?;
            let spec = BenchSpec {
                scene: scene.spec(),
                perturbation: Perturbation {
                    rot_axis,
                    rot_deg,
                    trans_axis,
                    trans_m,
                },
                normals,
            };
            let report = run_benchmark(&spec, &solvers, &config, out.as_deref())?;
            report.write_csv(std::io::stdout().lock())?;
            Ok(())
        }
        Command::Gen { scene, out } => {
            let cloud = gen_scene(&scene.spec())?;
            save_cloud(&cloud, &out, CloudFormat::from_path(&out)?)?;
            eprintln!("wrote {} points to {}", cloud.len(), out.display());
            Ok(())
        }
        Command::Inspect {
            cloud,
            target,
            init,
            solver,
            json,
        } => {
            let config = solver.config()?;
            let src = load(&cloud)?;
            let tgt = match &target {
                Some(path) => load(path)?,
                None => src.clone(),
            };
            let report = inspect(&src, &tgt, &init.pose(), &config)?;
            let text = if json {
                serde_json::to_string_pretty(&report)? + "\n"
            } else {
                report.table()
            };
            write_output(None, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
