use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use resonance::config::{EpSeed, GreensPoint, Region, RunConfig};
use resonance::degeneracy::{find_double_zero, split_pair, DegeneracyOptions, DegeneracyResult, EpReport, Family, FnFamily, ParamPoint};
use resonance::gamow::{build_jordan_chain, chain_report, ChainOptions};
use resonance::grid::GridSpec;
use resonance::output::{check_schema, fmt17, write_csv_preamble, Cx};
use resonance::propagation::{propagate_survival, CnOptions};
use resonance::regulated::RegOptions;
use resonance::solver::{JostSolver, SolverOptions};
use resonance::spectral::{
    build_basis, evolve_survival, greens_direct, resolvent_expansion, write_survival, BasisSet, GreenQuery, SurvivalOptions, TestFunction,
};
use resonance::verify::{run_all, survival_window, Tolerances, VerifyInputs};
use resonance::zeros::{find_zeros, write_census, SearchBox};
use resonance::{Error, PotentialSpec, Result};

#[derive(Parser)]
#[command(name = "resonance", version, about = "Jost-function resonances, double zeros and Jordan-chain expansions")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every verb. Values in the config file take precedence.
#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Potential document (JSON).
    #[arg(long, global = true)]
    potential: Option<PathBuf>,
    /// Partial wave.
    #[arg(long, global = true)]
    l: Option<u32>,
    /// Largest radial step.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Double-zero result written by `ep`.
    #[arg(long, global = true)]
    fixture: Option<PathBuf>,
    /// Tolerance override `name=value`; `all=value` sets every tolerance.
    #[arg(long = "tolerance", global = true, value_parser = parse_tolerance)]
    tolerances: Vec<(String, f64)>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Zero census and |f| on a grid over the region.
    Scan {
        #[arg(long, num_args = 4, value_names = ["RE0", "RE1", "IM0", "IM1"], allow_negative_numbers = true)]
        region: Option<Vec<f64>>,
        #[arg(long)]
        field_points: Option<usize>,
    },
    /// Locate the double zero and build its Jordan chain.
    Ep,
    /// Jordan chain at the double zero of the fixture.
    Chain {
        #[arg(long, allow_negative_numbers = true)]
        x_re: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        x_im: Option<f64>,
    },
    /// Green's function, direct and by the complex-basis expansion.
    Greens,
    /// Survival amplitude, spectral and by direct propagation.
    Evolve,
    /// Run the acceptance checks.
    Verify,
}

fn parse_tolerance(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.parse().map_err(|e| format!("{e}"))?;
    Ok((k.to_string(), v))
}

fn flags_config(c: &Common, cmd: &Cmd) -> RunConfig {
    let mut cfg = RunConfig {
        potential: c.potential.clone(),
        l: c.l,
        grid: c.h.map(|h| GridSpec { h, ..GridSpec::default() }),
        seed: c.seed,
        output_dir: c.output_dir.clone(),
        fixture: c.fixture.clone(),
        tolerances: c.tolerances.iter().cloned().collect(),
        ..RunConfig::default()
    };
    match cmd {
        Cmd::Scan { region, field_points } => {
            cfg.region = region.as_ref().map(|v| Region { re: [v[0], v[1]], im: [v[2], v[3]] });
            cfg.field_points = *field_points;
        }
        Cmd::Chain { x_re, x_im } if x_re.is_some() || x_im.is_some() => {
            cfg.x_m = Some(Cx { re: x_re.unwrap_or(1.0), im: x_im.unwrap_or(0.0) });
        }
        _ => {}
    }
    cfg
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Schema(_) | Error::InvalidSpec(_) => 2,
        Error::NoConvergence { .. } => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let flags = flags_config(&cli.common, &cli.cmd);
    let cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?.over(flags),
        None => flags,
    };
    for (name, v) in &cfg.tolerances {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::Config(format!("tolerance {name} must be positive")));
        }
    }
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out)?;
    match &cli.cmd {
        Cmd::Scan { .. } => scan(&cfg, &out),
        Cmd::Ep => ep(&cfg, &out),
        Cmd::Chain { .. } => chain(&cfg, &out),
        Cmd::Greens => greens(&cfg, &out),
        Cmd::Evolve => evolve(&cfg, &out),
        Cmd::Verify => verify(&cfg, &out),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn chain_options(cfg: &RunConfig) -> ChainOptions {
    let mut reg = RegOptions::default();
    if let Some(nu) = &cfg.nu_sequence {
        reg.nu = nu.clone();
    }
    ChainOptions { reg, ..ChainOptions::default() }
}

fn degeneracy_options(cfg: &RunConfig) -> DegeneracyOptions {
    DegeneracyOptions { grid: cfg.grid(), ..DegeneracyOptions::default() }
}

fn scan(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let spec = cfg.potential_spec()?;
    let solver = JostSolver::new(&spec, cfg.l(), &cfg.grid(), SolverOptions::default())?;
    let region = cfg.region.unwrap_or(Region { re: [0.05, 6.0], im: [-2.0, -0.01] });
    let zeros = find_zeros(&solver, &SearchBox::new((region.re[0], region.re[1]), (region.im[0], region.im[1])))?;
    write_census(create(out, "zeros.csv")?, &zeros)?;

    let n = cfg.field_points.unwrap_or(41).max(2);
    let mut w = create(out, "jost_field.csv")?;
    write_csv_preamble(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["re_k", "im_k", "abs_f"])?;
    for i in 0..n {
        for j in 0..n {
            let x = region.re[0] + (region.re[1] - region.re[0]) * i as f64 / (n - 1) as f64;
            let y = region.im[0] + (region.im[1] - region.im[0]) * j as f64 / (n - 1) as f64;
            let f = solver.jost(C::new(x, y))?;
            wr.write_record([fmt17(x), fmt17(y), fmt17(f.norm())])?;
        }
    }
    wr.flush()?;
    Ok(0)
}

/// The potential as a parameter family; a potential with no free
/// parameters is a constant family.
fn family(spec: PotentialSpec) -> Box<dyn Family> {
    if spec.free_params.is_empty() {
        Box::new(FnFamily(move |_: &[f64]| Ok(spec.clone())))
    } else {
        Box::new(spec)
    }
}

fn ep_seed(cfg: &RunConfig, spec: &PotentialSpec) -> Result<ParamPoint> {
    if let Some(EpSeed { p, k }) = &cfg.ep_seed {
        return Ok(ParamPoint { p: p.clone(), k: (*k).into() });
    }
    if cfg.fixture.is_some() {
        let f = read_fixture(cfg)?;
        return Ok(ParamPoint { p: f.p_star, k: f.k_m.into() });
    }
    let p = if spec.free_params.is_empty() { vec![0.0, 0.0] } else { spec.params()? };
    Err(Error::Config(format!("no ep_seed given (parameters {p:?})")))
}

fn read_fixture(cfg: &RunConfig) -> Result<EpReport> {
    let path = cfg.fixture()?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("fixture {}: {e}", path.display())))?;
    let report: EpReport = serde_json::from_str(&text)?;
    check_schema(&report.schema)?;
    Ok(report)
}

fn locate(cfg: &RunConfig) -> Result<(PotentialSpec, DegeneracyResult)> {
    let spec = cfg.potential_spec()?;
    let seed = ep_seed(cfg, &spec)?;
    let fam = family(spec);
    let deg = find_double_zero(fam.as_ref(), cfg.l(), &seed, &degeneracy_options(cfg))?;
    let at = fam.spec_at(&deg.p_star)?;
    Ok((at, deg))
}

fn x_m(cfg: &RunConfig) -> C {
    cfg.x_m.map_or(C::new(1.0, 0.0), C::from)
}

fn write_chain(cfg: &RunConfig, out: &Path, spec: &PotentialSpec, deg: &DegeneracyResult) -> Result<()> {
    let solver = JostSolver::new(spec, cfg.l(), &cfg.grid(), SolverOptions::default())?;
    let opts = chain_options(cfg);
    let chain = build_jordan_chain(&solver, deg, x_m(cfg), &opts)?;
    write_json(out, "chain.json", &chain_report(&solver, &chain, &opts)?)
}

fn ep(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let (spec, deg) = locate(cfg)?;
    write_json(out, "ep.json", &deg.to_json())?;
    write_chain(cfg, out, &spec, &deg)?;

    // the two zeros split off along the first parameter direction
    let fam = family(cfg.potential_spec()?);
    let mut dir = vec![0.0; deg.p_star.len()];
    dir[0] = 1.0;
    let mut w = create(out, "trajectory.csv")?;
    write_csv_preamble(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["eps", "re_k1", "im_k1", "re_k2", "im_k2"])?;
    for i in 0..=12 {
        let eps = 10f64.powf(-6.0 + 0.25 * i as f64);
        let (a, b) = split_pair(fam.as_ref(), cfg.l(), &deg, &dir, eps, &degeneracy_options(cfg))?;
        wr.write_record([fmt17(eps), fmt17(a.re), fmt17(a.im), fmt17(b.re), fmt17(b.im)])?;
    }
    wr.flush()?;
    Ok(0)
}

fn chain(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let (spec, deg) = locate(cfg)?;
    write_chain(cfg, out, &spec, &deg)?;
    Ok(0)
}

/// Basis for the spectral verbs; the fixture, when given, supplies the
/// double zero and its parameters.
fn basis(cfg: &RunConfig) -> Result<BasisSet> {
    let opts = chain_options(cfg);
    if cfg.fixture.is_some() || cfg.ep_seed.is_some() {
        let (spec, deg) = locate(cfg)?;
        build_basis(&spec, cfg.l(), &cfg.grid(), &cfg.contour(), Some(&deg), x_m(cfg), &opts)
    } else {
        build_basis(&cfg.potential_spec()?, cfg.l(), &cfg.grid(), &cfg.contour(), None, x_m(cfg), &opts)
    }
}

fn greens(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let points: Vec<GreensPoint> = cfg.greens_points.clone().ok_or_else(|| Error::Config("no greens_points given".to_string()))?;
    let b = basis(cfg)?;
    let spec = b.solver.spec.clone();
    let queries: Vec<GreenQuery> = points
        .iter()
        .map(|p| {
            let k = C::from(p.k);
            GreenQuery { e: (k * k).into(), r: p.r, rp: p.rp }
        })
        .collect();
    let expansion = resolvent_expansion(&b, &queries)?;
    let mut w = create(out, "greens.csv")?;
    write_csv_preamble(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["re_k", "im_k", "r", "rp", "re_G", "im_G", "re_G_expansion", "im_G_expansion"])?;
    for (p, e) in points.iter().zip(&expansion) {
        let g = greens_direct(&spec, cfg.l(), p.k.into(), p.r, p.rp)?;
        wr.write_record([fmt17(p.k.re), fmt17(p.k.im), fmt17(p.r), fmt17(p.rp), fmt17(g.re), fmt17(g.im), fmt17(e.re), fmt17(e.im)])?;
    }
    wr.flush()?;
    Ok(0)
}

fn evolve(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let chi = cfg.test_function.clone().unwrap_or_else(|| TestFunction::gaussian(1.6, 0.1));
    let times = cfg.times.clone().unwrap_or_else(survival_window);
    let b = basis(cfg)?;
    let spectral = evolve_survival(&b, &chi, &times, &SurvivalOptions::default())?;
    let pts: Vec<(f64, C)> = spectral.iter().map(|p| (p.t, p.amplitude.into())).collect();
    write_survival(create(out, "survival.csv")?, &pts)?;
    let direct = propagate_survival(&b.solver.spec, cfg.l(), &chi, &times, &CnOptions::default())?;
    let pts: Vec<(f64, C)> = times.iter().copied().zip(direct).collect();
    write_survival(create(out, "survival_cn.csv")?, &pts)?;
    Ok(0)
}

fn verify(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let fixture = read_fixture(cfg)?;
    let mut inp = VerifyInputs::new(cfg.potential_spec()?, fixture)?;
    inp.grid = cfg.grid();
    if let Some(c) = &cfg.contour {
        inp.contour = c.clone();
    }
    if let Some(nu) = &cfg.nu_sequence {
        inp.nu = nu.clone();
    }
    if let Some(chi) = &cfg.test_function {
        inp.test_function = chi.clone();
    }
    inp.seed = cfg.seed();
    let overrides: BTreeMap<String, f64> = cfg.tolerances.clone();
    inp.tolerances = Tolerances::with_overrides(&overrides)?;
    let report = run_all(&inp);
    write_json(out, "verify.json", &report)?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    Ok(if report.passed { 0 } else { 1 })
}
