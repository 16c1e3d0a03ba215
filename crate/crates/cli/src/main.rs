//! `heatpencil`: simulate boundary traces, identify diffusivity and initial state, certify.
//!
//! Exit codes: 0 success, 1 reproduction mismatch, 2 input error, 3 certificate unavailable.

mod manifest;
mod plot;
mod repro;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatpencil_core::io::{read_json, read_problem, read_trace, write_json, write_trace};
use heatpencil_core::pencil::PencilEstimate;
use heatpencil_core::pipeline::{self, IdentificationResult, PipelineConfig, Priors, Traces};
use heatpencil_core::{benchmark, bounds, Error, ErrorCertificate};
use serde::Deserialize;
use serde_json::{json, Value};

use manifest::{manifest_path_for, with_manifest, RunManifest};
use plot::{Chart, Series};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} field(s) outside tolerance, see the report")]
    Mismatch(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Mismatch(_) => 1,
            CliError::Core(e) if matches!(e.root(), Error::CertificateUnavailable(_)) => 3,
            CliError::Input(_) | CliError::Core(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "heatpencil",
    version,
    about = "Identify diffusivity and initial state from a boundary trace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample free.csv, step.csv and rec.csv from a problem file.
    Simulate {
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline configuration JSON (grid sizes, T0); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the identification pipeline on a traces directory.
    Identify {
        traces: PathBuf,
        /// Priors JSON `{"M0": .., "alpha0": ..}`; enables the error certificate.
        #[arg(long)]
        priors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for gcv.svg, u0.svg, gcv.csv and u0.csv.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Problem JSON whose initial state is drawn as the reference in u0.svg.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compute an error certificate from a result file or raw free-window diagnostics.
    Bounds {
        input: PathBuf,
        priors: PathBuf,
        /// Write the certificate here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the reference configuration and compare against the tabulated values.
    ReproPaper {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            problem,
            out,
            config,
        } => simulate(&problem, &out, config.as_deref()),
        Command::Identify {
            traces,
            priors,
            out,
            plot,
            reference,
            config,
        } => identify(
            &traces,
            priors.as_deref(),
            &out,
            plot.as_deref(),
            reference.as_deref(),
            config.as_deref(),
        ),
        Command::Bounds { input, priors, out } => cmd_bounds(&input, &priors, out.as_deref()),
        Command::ReproPaper { out } => repro_paper(&out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heatpencil: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

const TRACE_FILES: [&str; 3] = ["free.csv", "step.csv", "rec.csv"];

fn write_traces(dir: &Path, traces: &Traces, m: &mut RunManifest) -> Result<(), CliError> {
    create_dir(dir)?;
    for (name, trace) in TRACE_FILES
        .iter()
        .zip([&traces.free, &traces.step, &traces.rec])
    {
        let path = dir.join(name);
        write_trace(&path, trace)?;
        m.outputs.push(path);
    }
    Ok(())
}

fn simulate(problem: &Path, out: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let p = read_problem(problem)?;
    let cfg = load_config(config)?;
    let traces = pipeline::simulate_traces(&p, &cfg)?;
    let mut m = RunManifest::new("simulate", json!({ "problem": p, "config": cfg }));
    m.inputs.push(problem.to_path_buf());
    m.config_paths.extend(config.map(Path::to_path_buf));
    write_traces(out, &traces, &mut m)?;
    m.write(&out.join("manifest.json"))
}

fn read_traces(dir: &Path, m: &mut RunManifest) -> Result<Traces, CliError> {
    let mut read = |name: &str| -> Result<_, CliError> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(CliError::Input(format!(
                "missing trace file {}",
                path.display()
            )));
        }
        let t = read_trace(&path)?;
        m.inputs.push(path);
        Ok(t)
    };
    Ok(Traces {
        free: read("free.csv")?,
        step: read("step.csv")?,
        rec: read("rec.csv")?,
    })
}

fn identify(
    traces_dir: &Path,
    priors: Option<&Path>,
    out: &Path,
    plot_dir: Option<&Path>,
    reference: Option<&Path>,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let priors_value: Option<Priors> = priors.map(read_json).transpose()?;
    let reference_problem = reference.map(read_problem).transpose()?;
    let mut m = RunManifest::new("identify", json!({ "config": cfg, "priors": priors_value }));
    m.config_paths.extend(config.map(Path::to_path_buf));
    let traces = read_traces(traces_dir, &mut m)?;
    m.inputs.extend(priors.map(Path::to_path_buf));
    m.inputs.extend(reference.map(Path::to_path_buf));

    let res = pipeline::identify(&traces, &cfg, priors_value)?;
    if let Some(e) = &res.diagnostics.certificate_error {
        eprintln!("heatpencil: no certificate: {e}");
    }

    let manifest_path = manifest_path_for(out);
    write_json(out, &with_manifest(&res, &manifest_path)?)?;
    m.outputs.push(out.to_path_buf());
    if let Some(dir) = plot_dir {
        let reference_u0 = reference_problem.map(|p| move |x: f64| p.initial_state(x));
        write_plots(dir, &res, reference_u0, &manifest_path, &mut m)?;
    }
    m.write(&manifest_path)
}

fn write_plots(
    dir: &Path,
    res: &IdentificationResult,
    reference: Option<impl Fn(f64) -> f64>,
    manifest_path: &Path,
    m: &mut RunManifest,
) -> Result<(), CliError> {
    create_dir(dir)?;
    let description = format!("heatpencil identify; manifest {}", manifest_path.display());

    let gcv: Vec<(f64, f64)> = res
        .gcv_curve
        .iter()
        .enumerate()
        .map(|(i, &g)| ((i + 1) as f64, g))
        .collect();
    let mut csv = String::from("k,G\n");
    for &(k, g) in &gcv {
        csv.push_str(&format!("{},{g:.16e}\n", k as usize));
    }
    let gcv_svg = Chart {
        title: &format!("GCV function, selected k = {}", res.gcv_k),
        x_label: "truncation level k",
        y_label: "G(k)",
        log_y: true,
        description: description.clone(),
    }
    .render(&[Series {
        label: "G(k)",
        points: gcv,
        color: "#1f77b4",
        markers: true,
        dashed: false,
    }]);

    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let hat: Vec<(f64, f64)> = grid.iter().map(|&x| (x, res.initial_state(x))).collect();
    let truth: Option<Vec<(f64, f64)>> = reference
        .as_ref()
        .map(|f| grid.iter().map(|&x| (x, f(x))).collect());
    let mut u0_csv = String::from(if truth.is_some() {
        "x,u0_hat,u0_reference\n"
    } else {
        "x,u0_hat\n"
    });
    for (i, &(x, y)) in hat.iter().enumerate() {
        match &truth {
            Some(t) => u0_csv.push_str(&format!("{x:.16e},{y:.16e},{:.16e}\n", t[i].1)),
            None => u0_csv.push_str(&format!("{x:.16e},{y:.16e}\n")),
        }
    }
    let mut series = vec![Series {
        label: "reconstructed",
        points: hat,
        color: "#d62728",
        markers: false,
        dashed: false,
    }];
    if let Some(t) = truth {
        series.insert(
            0,
            Series {
                label: "reference",
                points: t,
                color: "#333333",
                markers: false,
                dashed: true,
            },
        );
    }
    let u0_svg = Chart {
        title: &format!("Initial state, alpha_hat = {:.6}", res.alpha_hat),
        x_label: "x",
        y_label: "u0(x)",
        log_y: false,
        description,
    }
    .render(&series);

    for (name, text) in [
        ("gcv.svg", gcv_svg),
        ("gcv.csv", csv),
        ("u0.svg", u0_svg),
        ("u0.csv", u0_csv),
    ] {
        let path = dir.join(name);
        write_text(&path, &text)?;
        m.outputs.push(path);
    }
    Ok(())
}

/// Free-window pencil diagnostics plus what the certificate needs beyond them.
#[derive(Deserialize)]
struct RawDiagnostics {
    #[serde(flatten)]
    pencil: PencilEstimate,
    alpha_hat: f64,
    /// `(mode index, pole)` pairs.
    modes: Vec<(usize, f64)>,
}

fn certificate_from(input: &Path, priors: Priors) -> Result<ErrorCertificate, CliError> {
    let value: Value = read_json(input)?;
    let parse_err = |e: serde_json::Error| CliError::Input(format!("{}: {e}", input.display()));
    let is_result = value.get("diagnostics").is_some() && value.get("free_modes").is_some();
    if is_result {
        let res: IdentificationResult = serde_json::from_value(value).map_err(parse_err)?;
        let inputs = res.bound_inputs(priors)?;
        Ok(bounds::certificate(
            &inputs,
            res.alpha_hat,
            &res.indexed_poles(),
        )?)
    } else {
        let raw: RawDiagnostics = serde_json::from_value(value).map_err(parse_err)?;
        let inputs = pipeline::bound_inputs(&raw.pencil, priors)?;
        Ok(bounds::certificate(&inputs, raw.alpha_hat, &raw.modes)?)
    }
}

fn cmd_bounds(input: &Path, priors_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    if !priors_path.is_file() {
        return Err(CliError::Input(format!(
            "missing priors file {}",
            priors_path.display()
        )));
    }
    let priors: Priors = read_json(priors_path)?;
    let cert = certificate_from(input, priors)?;
    match out {
        Some(path) => {
            let manifest_path = manifest_path_for(path);
            let mut m = RunManifest::new("bounds", json!({ "priors": priors }));
            m.inputs
                .extend([input.to_path_buf(), priors_path.to_path_buf()]);
            write_json(path, &with_manifest(&cert, &manifest_path)?)?;
            m.outputs.push(path.to_path_buf());
            m.write(&manifest_path)
        }
        None => {
            let mut text =
                serde_json::to_string_pretty(&cert).map_err(|e| CliError::Input(e.to_string()))?;
            text.push('\n');
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Input(format!("stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn repro_paper(out: &Path) -> Result<(), CliError> {
    let problem = benchmark::problem();
    let cfg = benchmark::config();
    let priors = benchmark::priors();
    let mut m = RunManifest::new(
        "repro-paper",
        json!({ "problem": problem, "config": cfg, "priors": priors }),
    );
    let traces = pipeline::simulate_traces(&problem, &cfg)?;
    write_traces(out, &traces, &mut m)?;
    let res = pipeline::identify(&traces, &cfg, Some(priors))?;

    let manifest_path = out.join("manifest.json");
    let result_path = out.join("result.json");
    write_json(&result_path, &with_manifest(&res, &manifest_path)?)?;
    m.outputs.push(result_path);
    if let Some(cert) = &res.certificate {
        let cert_path = out.join("certificate.json");
        write_json(&cert_path, &with_manifest(cert, &manifest_path)?)?;
        m.outputs.push(cert_path);
    }

    let rows = repro::rows(&res);
    let report_path = out.join("report.md");
    write_text(&report_path, &repro::report(&rows, &res, "manifest.json"))?;
    m.outputs.push(report_path);
    m.write(&manifest_path)?;

    let failed = rows.iter().filter(|r| !r.passes()).count();
    if failed > 0 {
        for r in rows.iter().filter(|r| !r.passes()) {
            eprintln!(
                "mismatch: {} {}: reference {}, computed {}",
                r.table,
                r.field,
                r.fmt(r.reference),
                r.fmt(r.rounded())
            );
        }
        return Err(CliError::Mismatch(failed));
    }
    Ok(())
}
