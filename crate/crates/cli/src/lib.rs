//! The `lamina` pipeline: validate → cell → tensors → macro → micro →
//! compare. Stages talk only through the files they write.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage error (unknown subcommand, bad flag) |
//! | 2 | missing or unreadable input, or an output that cannot be written |
//! | 3 | malformed or inconsistent input (parse, config, tensor schema) |
//! | 4 | geometry rejected (connectivity, clearance, periodicity) |
//! | 5 | solver failure (no convergence, singular system, bad initial data) |
//! | 6 | tensor audit failed |
//!
//! Failures print `{"error": {"code", "kind", "message"}}` on stderr.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use lamina_core::cell::{CellDiagnostics, CellOperator};
use lamina_core::correctors::{compare_runs, CellCorrectors, Reconstruction};
use lamina_core::fem::solve::SolveConfig;
use lamina_core::geometry::{build_cell_mesh, validate_geometry, MicrostructureSpec};
use lamina_core::io::runs::{self, config_hash};
use lamina_core::io::{json_bytes, ArtifactWriter, RunManifest};
use lamina_core::macro_fsi::{run_macro, MacroConfig, MacroSystem};
use lamina_core::micro::{apriori_report, run_micro, MicroConfig, MicroRun};
use lamina_core::tensors::{audit_tensors, compute_tensors};
use lamina_core::Error;

#[derive(Debug, Parser)]
#[command(name = "lamina", version, about = "Thin elastic layer in Stokes flow: cell problems, effective plate, reference solves")]
pub struct Cli {
    /// Output directory (defaults depend on the subcommand).
    #[arg(short = 'o', long = "output-dir", global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for independent solves.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Iterative solver tolerance for cell problems.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for random microstructures.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a microstructure file.
    Validate { microstructure: PathBuf },
    /// Solve the cell problems of a microstructure.
    Cell { microstructure: PathBuf },
    /// Effective plate tensors from a `cell` output directory.
    Tensors { cell_dir: PathBuf },
    /// Run the effective Stokes-plate model.
    Macro { config: PathBuf },
    /// Run the ε-resolved reference model.
    Micro { config: PathBuf },
    /// Compare micro runs against a macro run.
    Compare {
        macro_run: PathBuf,
        #[arg(required = true)]
        micro_runs: Vec<PathBuf>,
        /// `cell` output whose solutions give the second-order corrector.
        #[arg(long)]
        cell: Option<PathBuf>,
    },
    /// Write a random connected layer microstructure (uses `--seed`, moving
    /// to later seeds until the draw validates).
    Generate {
        #[arg(long, default_value_t = 3)]
        dimension: usize,
        /// Voxels per axis, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "4,4,4")]
        resolution: Vec<usize>,
    },
}

#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub manifest: Option<RunManifest>,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io { .. } => (2, "io"),
            Error::Parse { .. } => (3, "parse"),
            Error::Dimension(_) | Error::InvalidSpec(_) | Error::Tensor(_) | Error::Config(_) => (3, "invalid_input"),
            Error::Expression { .. } => (3, "expression"),
            Error::Mismatch(_) => (3, "mismatch"),
            Error::Geometry(_) | Error::Constraint(_) => (4, "geometry"),
            Error::Solve(_) => (5, "solver"),
            Error::Projection { .. } => (5, "initial_data"),
            Error::Audit(_) => (6, "audit"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type Stage = std::result::Result<(Option<RunManifest>, String), Failure>;

fn usage(message: String) -> Failure {
    Failure {
        code: 1,
        kind: "usage",
        message,
    }
}

pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome {
                    code: 0,
                    manifest: None,
                    stdout: e.to_string(),
                    stderr: String::new(),
                };
            }
            return failure_outcome(usage(e.to_string().trim().to_string()));
        }
    };
    match execute(&cli) {
        Ok((manifest, stdout)) => Outcome {
            code: 0,
            manifest,
            stdout,
            stderr: String::new(),
        },
        Err(f) => failure_outcome(f),
    }
}

fn failure_outcome(f: Failure) -> Outcome {
    let v = json!({"error": {"code": f.code, "kind": f.kind, "message": f.message}});
    Outcome {
        code: f.code,
        manifest: None,
        stdout: String::new(),
        stderr: String::from_utf8(json_bytes(&v)).expect("utf-8"),
    }
}

fn execute(cli: &Cli) -> Stage {
    if cli.jobs == 0 {
        return Err(usage("--jobs must be at least 1".into()));
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(usage(format!("--tol must lie in (0, 1), got {t}")));
        }
    }
    match &cli.command {
        Command::Validate { microstructure } => validate(cli, microstructure),
        Command::Cell { microstructure } => cell(cli, microstructure),
        Command::Tensors { cell_dir } => tensors(cli, cell_dir),
        Command::Macro { config } => macro_stage(cli, config),
        Command::Micro { config } => micro_stage(cli, config),
        Command::Compare {
            macro_run,
            micro_runs,
            cell,
        } => compare(cli, macro_run, micro_runs, cell.as_deref()),
        Command::Generate { dimension, resolution } => generate(cli, *dimension, resolution),
    }
}

/// `<config dir>/<stem>.<suffix>` unless `-o` is given.
fn output_dir(cli: &Cli, input: &Path, suffix: &str) -> PathBuf {
    cli.output_dir.clone().unwrap_or_else(|| {
        let stem = input.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        input.parent().unwrap_or(Path::new(".")).join(format!("{stem}.{suffix}"))
    })
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

fn validate(cli: &Cli, path: &Path) -> Stage {
    let spec = MicrostructureSpec::read(path)?;
    let report = validate_geometry(&build_cell_mesh(&spec));
    let v = serde_json::to_value(&report).expect("serializable");
    let text = String::from_utf8(json_bytes(&v)).expect("utf-8");
    let manifest = match &cli.output_dir {
        Some(dir) => {
            let mut w = ArtifactWriter::create(dir, RunManifest::new("validate", &[path], dir, &spec.hash()))?;
            w.json("validation.json", &v)?;
            Some(w.finish()?)
        }
        None => None,
    };
    if !report.is_ok() {
        return Err(Failure {
            code: 4,
            kind: "geometry",
            message: report.errors.join("; "),
        });
    }
    Ok((manifest, text))
}

fn cell(cli: &Cli, path: &Path) -> Stage {
    let dir = cli
        .output_dir
        .clone()
        .ok_or_else(|| usage("cell needs -o <dir>".into()))?;
    let spec = MicrostructureSpec::read(path)?;
    let mut manifest = RunManifest::new("cell", &[path], &dir, &spec.hash());
    let t0 = Instant::now();
    let mesh = build_cell_mesh(&spec);
    let op = CellOperator::new(&mesh)?;
    manifest.timings.insert("assemble".into(), t0.elapsed().as_secs_f64());
    let solve_cfg = cli.tol.map_or_else(SolveConfig::default, |t| SolveConfig::default().with_tolerance(t));
    let t1 = Instant::now();
    let sols = op.solve_all(&solve_cfg, cli.jobs)?;
    manifest.timings.insert("solve".into(), t1.elapsed().as_secs_f64());
    let diags: Vec<CellDiagnostics> = sols.iter().map(|s| op.residual_check(s)).collect::<Result<_, _>>()?;
    for s in &sols {
        manifest.solver.insert(
            s.case.label(),
            json!({"iterations": s.iterations, "residual": s.residual, "tolerance": s.tolerance}),
        );
    }
    let mut w = ArtifactWriter::create(&dir, manifest)?;
    runs::save_cell(&mut w, &spec, &op.mesh, &sols, &diags)?;
    let m = w.finish()?;
    let summary = format!("solved {} cell problems into {}\n", sols.len(), dir.display());
    Ok((Some(m), summary))
}

fn tensors(cli: &Cli, cell_dir: &Path) -> Stage {
    let dir = cli.output_dir.clone().unwrap_or_else(|| cell_dir.to_path_buf());
    let (spec, sols) = runs::load_cell(cell_dir)?;
    let mut manifest = RunManifest::new("tensors", &[cell_dir], &dir, &spec.hash());
    let t0 = Instant::now();
    let op = CellOperator::new(&build_cell_mesh(&spec))?;
    let cor = CellCorrectors::new(op, sols)?;
    let t = compute_tensors(&cor.op, &cor.solutions)?;
    let audit = audit_tensors(&t);
    manifest.timings.insert("tensors".into(), t0.elapsed().as_secs_f64());
    let mut w = ArtifactWriter::create(&dir, manifest)?;
    runs::save_tensors(&mut w, &t, &audit)?;
    let m = w.finish()?;
    if !audit.passed {
        return Err(Failure {
            code: 6,
            kind: "audit",
            message: format!(
                "symmetry defect {:.3e}, minimum eigenvalue {:.3e}",
                audit.relative_symmetry_defect, audit.min_eigenvalue
            ),
        });
    }
    let (a, b, c) = t.slice_coefficients();
    Ok((Some(m), format!("a1111 = {a:.12e}\nb1111 = {b:.12e}\nc1111 = {c:.12e}\n")))
}

fn macro_stage(cli: &Cli, path: &Path) -> Stage {
    let cfg = MacroConfig::read(path)?;
    let dir = output_dir(cli, path, "macro");
    let canonical = cfg.to_json();
    let mut manifest = RunManifest::new("macro", &[path], &dir, &config_hash(&canonical));
    let t0 = Instant::now();
    let run = run_macro(&cfg)?;
    manifest.timings.insert("run".into(), t0.elapsed().as_secs_f64());
    let sys = MacroSystem::operators(&cfg)?;
    if let Some(a) = &sys.audit {
        manifest.solver.insert("tensor_audit".into(), serde_json::to_value(a).expect("serializable"));
    }
    let mut w = ArtifactWriter::create(&dir, manifest)?;
    runs::save_macro_run(&mut w, &sys, &run)?;
    let m = w.finish()?;
    Ok((Some(m), format!("{} macro steps written to {}\n", run.states.len() - 1, dir.display())))
}

fn micro_stage(cli: &Cli, path: &Path) -> Stage {
    let cfg = MicroConfig::read(path)?;
    let dir = output_dir(cli, path, "micro");
    let canonical = cfg.to_json();
    let mut manifest = RunManifest::new("micro", &[path], &dir, &config_hash(&canonical));
    let t0 = Instant::now();
    let run = run_micro(&cfg)?;
    manifest.timings.insert("run".into(), t0.elapsed().as_secs_f64());
    let rep = apriori_report(&run.system, &run.states);
    let mut warnings = run.system.cfg.warnings.clone();
    warnings.dedup();
    manifest.solver.insert("warnings".into(), json!(warnings));
    let mut w = ArtifactWriter::create(&dir, manifest)?;
    runs::save_micro_run(&mut w, &run, &rep)?;
    let m = w.finish()?;
    Ok((
        Some(m),
        format!("{} micro steps (eps = {}) written to {}\n", run.states.len() - 1, rep.epsilon, dir.display()),
    ))
}

fn compare(cli: &Cli, macro_dir: &Path, micro_dirs: &[PathBuf], cell_dir: Option<&Path>) -> Stage {
    let dir = cli.output_dir.clone().unwrap_or_else(|| macro_dir.join("compare"));
    let (sys, mrun) = runs::load_macro_run(macro_dir)?;
    let correctors = cell_dir.map(runs::load_correctors).transpose()?;
    let t0 = Instant::now();
    let micro: Vec<MicroRun> = pool(cli.jobs).install(|| {
        micro_dirs
            .par_iter()
            .map(|d| runs::load_micro_run(d))
            .collect::<Result<_, _>>()
    })?;
    let recs: Vec<Reconstruction> = micro
        .iter()
        .map(|r| Reconstruction::new(&sys, &mrun, correctors.as_ref(), r.system.mesh.epsilon))
        .collect();
    let pairs: Vec<_> = micro.iter().zip(&recs).collect();
    let table = compare_runs(&pairs)?;
    let mut hashes = vec![config_hash(&runs::stored_config(macro_dir)?)];
    for d in micro_dirs {
        hashes.push(config_hash(&runs::stored_config(d)?));
    }
    let combined = lamina_core::geometry::spec::sha256_hex(hashes.join("\n").as_bytes());
    let mut inputs: Vec<&Path> = vec![macro_dir];
    inputs.extend(micro_dirs.iter().map(PathBuf::as_path));
    inputs.extend(cell_dir);
    let mut manifest = RunManifest::new("compare", &inputs, &dir, &combined);
    manifest.timings.insert("compare".into(), t0.elapsed().as_secs_f64());
    let mut w = ArtifactWriter::create(&dir, manifest)?;
    w.csv("compare.csv", &runs::comparison_table_csv(&table))?;
    w.json("compare.json", &serde_json::to_value(&table).expect("serializable"))?;
    let m = w.finish()?;
    let mut text = String::new();
    for r in &table.rows {
        text.push_str(&format!("{:<8.5} {:<30} {:.4e}\n", r.epsilon, r.quantity, r.value));
    }
    for s in &table.slopes {
        text.push_str(&format!("slope {:<30} {:.3}\n", s.quantity, s.slope));
    }
    if let Some(n) = &table.notice {
        text.push_str(n);
        text.push('\n');
    }
    Ok((Some(m), text))
}

const GENERATE_ATTEMPTS: u64 = 1000;

fn generate(cli: &Cli, dimension: usize, resolution: &[usize]) -> Stage {
    let seed = cli.seed.ok_or_else(|| usage("generate needs --seed".into()))?;
    let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    // draws that fail validation move on to the next seed
    let (used, spec) = (seed..seed.saturating_add(GENERATE_ATTEMPTS))
        .find_map(|s| {
            let spec = MicrostructureSpec::random_layer(dimension, resolution.to_vec(), s).ok()?;
            validate_geometry(&build_cell_mesh(&spec)).is_ok().then_some((s, spec))
        })
        .ok_or_else(|| Failure {
            code: 4,
            kind: "geometry",
            message: format!(
                "no valid {dimension}D layer at resolution {resolution:?} for seeds {seed}..{}",
                seed.saturating_add(GENERATE_ATTEMPTS)
            ),
        })?;
    let mut w = ArtifactWriter::create(&dir, RunManifest::new("generate", &[], &dir, &spec.hash()))?;
    w.manifest.solver.insert("seed".into(), Value::from(seed));
    w.manifest.solver.insert("seed_used".into(), Value::from(used));
    let path = w.json(&format!("random_{used}.json"), &spec.to_json())?;
    let m = w.finish()?;
    Ok((Some(m), format!("{}\n", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let f = Failure::from(Error::Audit("x".into()));
        assert_eq!((f.code, f.kind), (6, "audit"));
        let f = Failure::from(Error::Mismatch("x".into()));
        assert_eq!((f.code, f.kind), (3, "mismatch"));
        let f = Failure::from(Error::Geometry("x".into()));
        assert_eq!((f.code, f.kind), (4, "geometry"));
    }

    #[test]
    fn default_output_sits_next_to_the_config() {
        let cli = Cli::try_parse_from(["lamina", "macro", "runs/a.json"]).unwrap();
        assert_eq!(output_dir(&cli, Path::new("runs/a.json"), "macro"), Path::new("runs/a.macro"));
        let cli = Cli::try_parse_from(["lamina", "-o", "elsewhere", "macro", "runs/a.json"]).unwrap();
        assert_eq!(output_dir(&cli, Path::new("runs/a.json"), "macro"), Path::new("elsewhere"));
    }

    #[test]
    fn tolerance_outside_the_unit_interval_is_a_usage_error() {
        let out = run_command(["lamina", "--tol", "2", "validate", "x.json"]);
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("--tol"));
    }
}
