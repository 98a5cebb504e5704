use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use warpbank::analysis::{self, AnalysisDesign};
use warpbank::metrics::{self, SarReport};
use warpbank::model::SourceModel;
use warpbank::reproduce::{self, ReferenceCoefficients, ReproduceOptions};
use warpbank::sim::{self, NamedDesign, SignalKind, SimConfig};
use warpbank::solver::LpResiduals;
use warpbank::synthesis::{self, SynthesisDesign};
use warpbank::warp::{self, BankSpec, PrototypeFilter};
use warpbank::{io, Error};

use crate::config::{Method, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Acceptance(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Acceptance(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Acceptance(m) => write!(f, "acceptance failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

pub type Outcome = Result<(), Failure>;

/// Effective configuration plus the directory relative paths resolve from.
pub struct Context {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Context {
    fn out_dir(&self) -> Result<PathBuf, Failure> {
        let dir = self.config.output.directory.clone();
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        std::fs::write(dir.join("config.json"), self.config.to_json() + "\n")?;
        Ok(dir)
    }

    fn spec(&self) -> Result<BankSpec, Failure> {
        Ok(self.config.bank.spec()?)
    }

    fn model(&self) -> Result<SourceModel, Failure> {
        Ok(self.config.model.load(&self.base)?)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn bands(ctx: &Context) -> Outcome {
    let spec = ctx.spec()?;
    let edges = warp::all_band_edges(&spec)?;
    let out = ctx.out_dir()?;
    println!("{:>4}  {:>10}  {:>10}", "band", "omega_l", "omega_h");
    for e in &edges {
        let [i, l, h] = io::format_band_row(e);
        println!("{i:>4}  {l:>10}  {h:>10}");
    }
    io::write_bands(&out.join("bands.csv"), &edges)?;
    Ok(())
}

fn design_analysis(
    spec: &BankSpec,
    model: &SourceModel,
    ctx: &Context,
    method: Method,
) -> Result<AnalysisDesign, Failure> {
    let options = ctx.config.design.options();
    Ok(match method {
        Method::Proposed => analysis::solve_analysis(spec, model, &options)?,
        Method::MethodB => analysis::solve_analysis_method_b(spec, model, &options)?,
    })
}

fn design_synthesis(
    spec: &BankSpec,
    h: &PrototypeFilter,
    ctx: &Context,
) -> Result<SynthesisDesign, Failure> {
    let d = &ctx.config.design;
    let qp = synthesis::build_synthesis_qp(spec, h, d.synthesis_grid, d.delta)?;
    Ok(synthesis::solve_synthesis(&qp)?)
}

#[derive(Serialize)]
struct DesignReport {
    method: Method,
    lp_objective: f64,
    lp_iterations: usize,
    lp_residuals: LpResiduals,
    positivity_rounds: usize,
    magnitude_error: f64,
    synthesis_alias_power: f64,
    synthesis_stationarity: f64,
    synthesis_feasibility: f64,
    sar: SarReport,
}

pub fn design(ctx: &Context) -> Outcome {
    let spec = ctx.spec()?;
    let model = ctx.model()?;
    let method = ctx.config.design.method;
    let a = design_analysis(&spec, &model, ctx, method)?;
    let d = &ctx.config.design;
    let qp = synthesis::build_synthesis_qp(&spec, &a.prototype, d.synthesis_grid, d.delta)?;
    let s = synthesis::solve_synthesis(&qp)?;
    let sar = metrics::sar(&spec, &a.prototype, &model, metrics::DEFAULT_SAR_GRID)?;

    let out = ctx.out_dir()?;
    io::write_coefficients(&out.join("analysis.csv"), "h", a.prototype.coeffs())?;
    io::write_coefficients(&out.join("synthesis.csv"), "g", s.prototype.coeffs())?;
    let report = DesignReport {
        method,
        lp_objective: a.lp_objective,
        lp_iterations: a.lp_iterations,
        lp_residuals: a.lp_residuals,
        positivity_rounds: a.cut_rounds,
        magnitude_error: a.magnitude_error,
        synthesis_alias_power: qp.alias_power(&s.raw),
        synthesis_stationarity: s.solution.stationarity,
        synthesis_feasibility: s.solution.feasibility,
        sar,
    };
    write_json(&out.join("design_report.json"), &report)?;
    println!("{:>4}  {:>18}  {:>18}", "n", "h(n)", "g(n)");
    for (n, (h, g)) in a
        .prototype
        .coeffs()
        .iter()
        .zip(s.prototype.coeffs())
        .enumerate()
    {
        println!("{n:>4}  {h:>18.15}  {g:>18.15}");
    }
    println!(
        "overall SAR {:.2} dB, written to {}",
        report.sar.overall_sar_db,
        out.display()
    );
    Ok(())
}

fn coefficient_path(explicit: Option<&Path>, out: &Path, default: &str) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join(default))
}

pub fn evaluate(ctx: &Context, analysis: Option<&Path>, synthesis: Option<&Path>) -> Outcome {
    let spec = ctx.spec()?;
    let model = ctx.model()?;
    let dir = ctx.config.output.directory.clone();
    let h = PrototypeFilter::analysis(io::read_coefficients(&coefficient_path(
        analysis,
        &dir,
        "analysis.csv",
    ))?)?;
    let g_path = coefficient_path(synthesis, &dir, "synthesis.csv");
    let g = if synthesis.is_some() || g_path.exists() {
        Some(PrototypeFilter::synthesis(io::read_coefficients(&g_path)?)?)
    } else {
        None
    };

    let report = metrics::sar(&spec, &h, &model, metrics::DEFAULT_SAR_GRID)?;
    let out = ctx.out_dir()?;
    write_json(&out.join("sar.json"), &report)?;
    let rows: Vec<Vec<f64>> = (0..spec.bands())
        .map(|i| {
            vec![
                i as f64,
                report.sigma2[i],
                report.alias2[i],
                report.sar_db[i],
            ]
        })
        .collect();
    io::write_table(
        &out.join("sar_bands.csv"),
        &["band", "sigma2", "alias2", "sar_db"],
        &rows,
    )?;
    println!("{:>4}  {:>10}", "band", "SAR (dB)");
    for (i, v) in report.sar_db.iter().enumerate() {
        println!("{i:>4}  {v:>10.2}");
    }
    println!("overall SAR {:.2} dB", report.overall_sar_db);

    if let Some(g) = g {
        // Unit-sum prototypes leave the overall gain arbitrary; curves are
        // reported for hᵀg = 1.
        let hg: f64 = h.coeffs().iter().zip(g.coeffs()).map(|(a, b)| a * b).sum();
        if hg == 0.0 {
            return Err(Failure::Config(
                "analysis and synthesis prototypes are orthogonal".into(),
            ));
        }
        let g = PrototypeFilter::synthesis(g.coeffs().iter().map(|v| v / hg).collect())?;
        let omega = warp::uniform_grid(1024, -std::f64::consts::PI, 2.0 * std::f64::consts::PI);
        let t = warp::overall_transfer(&spec, &h, &g, &omega)?;
        let responses: Vec<_> = (0..t.phases()).map(|l| t.phase_response(l)).collect();
        let db = |v: f64| 20.0 * v.log10();
        let rows: Vec<Vec<f64>> = (0..omega.len())
            .map(|k| {
                let mut row = vec![omega[k], db(t.distortion[k].norm())];
                row.extend(responses.iter().map(|r| db(r[k].norm())));
                row
            })
            .collect();
        let mut header = vec!["omega".to_string(), "distortion_db".to_string()];
        header.extend((0..t.phases()).map(|l| format!("t{l}_db")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_table(&out.join("transfer.csv"), &header, &rows)?;
        println!("max |T_l| deviation {:.3e} dB", t.max_deviation_db());
    }
    Ok(())
}

fn designs_for(
    ctx: &Context,
    spec: &BankSpec,
    model: &SourceModel,
    method: Method,
) -> Result<(PrototypeFilter, PrototypeFilter), Failure> {
    let a = design_analysis(spec, model, ctx, method)?;
    let s = design_synthesis(spec, &a.prototype, ctx)?;
    Ok((a.prototype, s.prototype))
}

fn sim_params(ctx: &Context, signal_file: Option<&Path>) -> Result<sim::SimParams, Failure> {
    let mut params = ctx.config.sim.clone();
    if let Some(path) = signal_file {
        params.signal = SignalKind::File {
            samples: io::read_samples(path)?,
        };
    }
    Ok(params)
}

#[derive(Serialize)]
struct SimulateSummary {
    steady_state_db: f64,
    reference_db: f64,
    diverged: bool,
    eigenvalue_spread: f64,
}

pub fn simulate(
    ctx: &Context,
    analysis: Option<&Path>,
    synthesis: Option<&Path>,
    signal_file: Option<&Path>,
) -> Outcome {
    let spec = ctx.spec()?;
    let (h, g) = match (analysis, synthesis) {
        (Some(a), Some(s)) => (
            PrototypeFilter::analysis(io::read_coefficients(a)?)?,
            PrototypeFilter::synthesis(io::read_coefficients(s)?)?,
        ),
        (None, None) => designs_for(ctx, &spec, &ctx.model()?, ctx.config.design.method)?,
        _ => {
            return Err(Failure::Config(
                "--analysis and --synthesis must be given together".into(),
            ))
        }
    };
    let cfg = SimConfig::new(spec, h, g, sim_params(ctx, signal_file)?);
    let trace = sim::run_simulation(&cfg)?;
    let out = ctx.out_dir()?;
    io::write_trace(&out.join("erle.csv"), &trace)?;
    write_json(
        &out.join("simulate_summary.json"),
        &SimulateSummary {
            steady_state_db: trace.steady_state_db,
            reference_db: trace.reference_db,
            diverged: trace.diverged,
            eigenvalue_spread: trace.eigenvalue_spread,
        },
    )?;
    println!("steady-state ERLE {:.2} dB", trace.steady_state_db);
    if trace.diverged {
        return Err(Failure::Solver("adaptive filter diverged".into()));
    }
    Ok(())
}

pub fn compare(ctx: &Context, signal_file: Option<&Path>) -> Outcome {
    let spec = ctx.spec()?;
    let model = ctx.model()?;
    let mut designs = Vec::new();
    for (name, method) in [
        ("proposed", Method::Proposed),
        ("method_b", Method::MethodB),
    ] {
        let (h, g) = designs_for(ctx, &spec, &model, method)?;
        designs.push(NamedDesign {
            name: name.into(),
            h,
            g,
        });
    }
    let cmp = sim::compare_designs(&spec, &sim_params(ctx, signal_file)?, &designs)?;
    let out = ctx.out_dir()?;
    let rows: Vec<Vec<f64>> = (0..cmp.traces[0].time.len())
        .map(|k| {
            let mut row = vec![cmp.traces[0].time[k]];
            row.extend(cmp.traces.iter().map(|t| t.erle_db[k]));
            row
        })
        .collect();
    io::write_table(
        &out.join("compare.csv"),
        &["t_seconds", "erle_proposed_db", "erle_method_b_db"],
        &rows,
    )?;
    write_json(&out.join("compare.json"), &cmp)?;
    for (name, v) in cmp.names.iter().zip(&cmp.steady_state_db) {
        println!("{name:<10} steady-state ERLE {v:.2} dB");
    }
    println!(
        "difference {:.2} dB",
        cmp.steady_state_db[0] - cmp.steady_state_db[1]
    );
    if cmp.traces.iter().any(|t| t.diverged) {
        return Err(Failure::Solver("adaptive filter diverged".into()));
    }
    Ok(())
}

pub fn reproduce(
    ctx: &Context,
    only: Option<&str>,
    reference_dir: Option<&Path>,
    export: Option<&Path>,
    seed: Option<u64>,
) -> Outcome {
    let reference = match reference_dir {
        Some(dir) => ReferenceCoefficients::with_overrides(dir)?,
        None => ReferenceCoefficients::default(),
    };
    if let Some(dir) = export {
        std::fs::create_dir_all(dir)?;
        reference.write_to(dir)?;
        println!("reference coefficients written to {}", dir.display());
        return Ok(());
    }
    let mut options = ReproduceOptions {
        reference,
        ..ReproduceOptions::default()
    };
    if let Some(s) = only {
        options.criteria = reproduce::parse_selection(s)?;
    }
    if let Some(s) = seed {
        options.seed = s;
    }
    let checks = reproduce::run(&options, |c| println!("{}", c.line()));
    let out = ctx.out_dir()?;
    write_json(&out.join("reproduce.json"), &checks)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.id.as_str())
        .collect();
    println!("{} checks, {} failed", checks.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!(
            "failed: {}",
            failed.join(", ")
        )))
    }
}
