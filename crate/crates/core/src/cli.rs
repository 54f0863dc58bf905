//! Command-line front end: argument and config resolution, golden suites and
//! report emission.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{
    node_count_detailed, sigma_degree, ContactError, CountReport, Exact, Family, Method,
    SingularityType,
};
use crate::ring::{rat, Coeff};
use crate::spaces::{base_surface_model, SpaceError, SurfaceInvariants};
use crate::surfaces::{tg_closed, worked_correction, Preset, SurfaceError, WORKED_CORRECTIONS};
use crate::threefolds::{
    quartic_fano_check, quintic_binodal_residual, quintic_rational_planar, tg6_planes_closed,
    tg6_planes_coefficients, tg6_planes_derived, tg6_planes_derived_polynomial, ThreefoldError,
    FANO_ORDERINGS,
};

/// Version of the JSON output layout.
pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_OUT_OF_VALIDITY: i32 = 3;

/// Status attached to counts that are not integers.
pub const OUT_OF_VALIDITY: &str = "OUT_OF_VALIDITY";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {source}")]
    ConfigIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    ConfigParse { path: String, message: String },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Threefold(#[from] ThreefoldError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot encode output: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "nodal-enum",
    version,
    about = "Exact counts of nodal curves on surfaces and multi-tangent planes to threefolds",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Count n-nodal curves in a general n-dimensional subsystem on a surface.
    Tg(TgArgs),
    /// Count planes 6-fold tangent to a general hypersurface in P^4.
    Threefold(ThreefoldArgs),
    /// Check every stored golden value.
    VerifyPaper(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetName {
    #[value(name = "p2")]
    P2,
    #[value(name = "p1xp1")]
    P1xP1,
    #[value(name = "k3")]
    K3,
    #[value(name = "deg9")]
    Deg9,
    #[value(name = "delpezzo5")]
    DelPezzo5,
    #[value(name = "abelian")]
    Abelian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    #[default]
    Closed,
    Derived,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Route {
    #[default]
    Closed,
    Derived,
    Fano,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    #[default]
    Quick,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Md,
}

#[derive(Args, Debug)]
pub struct TgArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    /// Degree for the p2 preset.
    #[arg(long)]
    pub m: Option<i64>,
    #[arg(long)]
    pub m1: Option<i64>,
    #[arg(long)]
    pub m2: Option<i64>,
    /// Curve genus for the k3 preset.
    #[arg(long)]
    pub g: Option<i64>,
    /// Sectional genus for the deg9 preset.
    #[arg(long)]
    pub pa: Option<i64>,
    #[arg(long)]
    pub chi: Option<i64>,
    /// L^2
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<i64>,
    /// K.L
    #[arg(long, allow_negative_numbers = true)]
    pub k1: Option<i64>,
    /// K^2
    #[arg(long, allow_negative_numbers = true)]
    pub k2: Option<i64>,
    /// Topological Euler number.
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<i64>,
    /// Number of nodes, 1..=6.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// TOML file with [surface] d/k1/k2/c2 and [run] n/method.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ThreefoldArgs {
    /// Degree of the hypersurface.
    #[arg(long, allow_negative_numbers = true)]
    pub m: i64,
    #[arg(long, value_enum, default_value = "closed")]
    pub route: Route,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub suite: Suite,
    #[arg(long, value_enum, default_value = "md")]
    pub format: Format,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    surface: SurfaceSection,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceSection {
    d: Option<i64>,
    k1: Option<i64>,
    k2: Option<i64>,
    c2: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    n: Option<u32>,
    method: Option<MethodArg>,
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigIo {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| CliError::ConfigParse {
        path: path.display().to_string(),
        message: e.message().to_string(),
    })
}

fn need(v: Option<i64>, flag: &str, preset: &str) -> Result<i64> {
    v.ok_or_else(|| CliError::Usage(format!("preset {preset} needs --{flag}")))
}

fn resolve_preset(args: &TgArgs) -> Result<Option<Preset>> {
    let Some(name) = args.preset else {
        return Ok(None);
    };
    let p = match name {
        PresetName::P2 => Preset::P2 {
            m: need(args.m, "m", "p2")?,
        },
        PresetName::P1xP1 => Preset::P1xP1 {
            m1: need(args.m1, "m1", "p1xp1")?,
            m2: need(args.m2, "m2", "p1xp1")?,
        },
        PresetName::K3 => Preset::K3 {
            g: need(args.g, "g", "k3")?,
        },
        PresetName::Deg9 => Preset::Deg9 {
            pa: need(args.pa, "pa", "deg9")?,
            chi: need(args.chi, "chi", "deg9")?,
        },
        PresetName::DelPezzo5 => Preset::DelPezzo5,
        PresetName::Abelian => Preset::Abelian,
    };
    Ok(Some(p))
}

/// Fully resolved `tg` request: config, then preset, then explicit flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TgRequest {
    pub label: String,
    pub preset: Option<Preset>,
    pub invariants: SurfaceInvariants,
    pub n: u32,
    pub method: MethodArg,
}

pub fn resolve_tg(args: &TgArgs) -> Result<TgRequest> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let preset = resolve_preset(args)?;
    let base = preset.map(|p| p.invariants());
    let pick = |flag: Option<i64>, from_preset: Option<i64>, from_cfg: Option<i64>, name: &str| {
        flag.or(from_preset).or(from_cfg).ok_or_else(|| {
            CliError::Usage(format!(
                "missing invariant {name}: give --preset or --{name}"
            ))
        })
    };
    let d = pick(args.d, base.map(|b| b.d), cfg.surface.d, "d")?;
    let k1 = pick(args.k1, base.map(|b| b.k1), cfg.surface.k1, "k1")?;
    let k2 = pick(args.k2, base.map(|b| b.k2), cfg.surface.k2, "k2")?;
    let c2 = pick(args.c2, base.map(|b| b.c2), cfg.surface.c2, "c2")?;
    let n = args
        .n
        .or(cfg.run.n)
        .ok_or_else(|| CliError::Usage("missing --n".to_string()))?;
    let invariants = SurfaceInvariants::new(d, k1, k2, c2);
    let label = match preset {
        Some(p) if p.invariants() == invariants => p.label(),
        _ => "custom".to_string(),
    };
    Ok(TgRequest {
        label,
        preset,
        invariants,
        n,
        method: args.method.or(cfg.run.method).unwrap_or_default(),
    })
}

fn invariant_map(inv: &SurfaceInvariants) -> BTreeMap<String, i64> {
    [("d", inv.d), ("k1", inv.k1), ("k2", inv.k2), ("c2", inv.c2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// Stored surface counts: preset, number of nodes, value.
pub const SURFACE_GOLDENS: [(Preset, u32, i64); 28] = [
    (Preset::P2 { m: 4 }, 4, 666),
    (Preset::P2 { m: 4 }, 5, 378),
    (Preset::P2 { m: 4 }, 6, 105),
    (Preset::P1xP1 { m1: 2, m2: 2 }, 1, 12),
    (Preset::P1xP1 { m1: 2, m2: 3 }, 1, 20),
    (Preset::P1xP1 { m1: 2, m2: 2 }, 4, 6),
    (Preset::P1xP1 { m1: 2, m2: 3 }, 4, 133),
    (Preset::P1xP1 { m1: 2, m2: 4 }, 4, 1261),
    (Preset::P1xP1 { m1: 3, m2: 3 }, 3, 1944),
    (Preset::P1xP1 { m1: 3, m2: 3 }, 4, 4115),
    (Preset::P1xP1 { m1: 3, m2: 3 }, 5, 3702),
    (Preset::P1xP1 { m1: 3, m2: 3 }, 6, 2224),
    (Preset::P1xP1 { m1: 2, m2: 5 }, 4, 7038),
    (Preset::P1xP1 { m1: 3, m2: 4 }, 6, 122865),
    (Preset::DelPezzo5, 4, 40),
    (Preset::Deg9 { pa: 6, chi: 1 }, 4, 15645),
    (Preset::Deg9 { pa: 7, chi: 1 }, 4, 57162),
    (Preset::Deg9 { pa: 7, chi: 2 }, 4, 107646),
    (Preset::Deg9 { pa: 8, chi: 2 }, 4, 248671),
    (Preset::Deg9 { pa: 8, chi: 3 }, 4, 388846),
    (Preset::Deg9 { pa: 9, chi: 4 }, 4, 1022595),
    (Preset::Deg9 { pa: 10, chi: 5 }, 4, 2222868),
    (Preset::Deg9 { pa: 12, chi: 9 }, 4, 10957224),
    (Preset::K3 { g: 3 }, 3, 3200),
    (Preset::K3 { g: 4 }, 4, 25650),
    (Preset::K3 { g: 5 }, 5, 176256),
    (Preset::K3 { g: 6 }, 6, 1073720),
    (Preset::Abelian, 4, 150),
];

/// Known value for a preset count, if stored.
pub fn known_surface_value(preset: &Preset, n: u32) -> Option<i64> {
    SURFACE_GOLDENS
        .iter()
        .find(|(p, k, _)| p == preset && *k == n)
        .map(|&(_, _, v)| v)
}

/// Derived count on the surface family, with all σ-degrees.
pub fn derived_surface_report(label: &str, inv: SurfaceInvariants, n: u32) -> Result<CountReport> {
    let space = base_surface_model(inv, n)?;
    let family = Family::from_space(&space)?;
    let (count, sigmas) = node_count_detailed(n, &family)?;
    let mut r = CountReport::new(label, n, count, Method::Derived);
    r.sigma_degrees = sigmas.into_iter().map(|(k, v)| (k, Exact(v))).collect();
    r.invariants = invariant_map(&inv);
    Ok(r)
}

pub fn cmd_tg(args: &TgArgs) -> Result<CountReport> {
    let req = resolve_tg(args)?;
    let mut report = match req.method {
        MethodArg::Closed => {
            let mut r = CountReport::new(
                req.label.clone(),
                req.n,
                tg_closed(req.n, &req.invariants)?,
                Method::ClosedForm,
            );
            r.invariants = invariant_map(&req.invariants);
            r
        }
        MethodArg::Derived => derived_surface_report(&req.label, req.invariants, req.n)?,
    };
    if let Some(p) = req.preset.filter(|p| p.invariants() == req.invariants) {
        report.expected = known_surface_value(&p, req.n);
    }
    Ok(report)
}

fn planes_expected(m: i64) -> Option<i64> {
    match m {
        4 => Some(5600),
        5 => Some(21_617_125),
        _ => None,
    }
}

pub fn cmd_threefold(args: &ThreefoldArgs) -> Result<CountReport> {
    let m = args.m;
    if m < 1 {
        return Err(CliError::Usage(format!("--m must be at least 1, got {m}")));
    }
    let label = format!("planes(m={m})");
    let mut report = match args.route {
        Route::Closed => CountReport::new(label, 6, tg6_planes_closed(m)?, Method::ClosedForm),
        Route::Derived => CountReport::new(label, 6, tg6_planes_derived(m)?, Method::Derived),
        Route::Fano => {
            if m != 4 {
                return Err(CliError::Usage(format!("route fano needs --m 4, got {m}")));
            }
            let f = quartic_fano_check()?;
            let mut r = CountReport::new(label, 6, f.count.0, Method::Fano);
            r.breakdown.insert("raw integral".into(), f.raw);
            r.breakdown
                .insert("orderings".into(), Exact(rat(FANO_ORDERINGS)));
            r
        }
    };
    report.invariants.insert("m".into(), m);
    report.expected = planes_expected(m);
    if m == 5 && args.route != Route::Fano {
        let q = quintic_rational_planar()?;
        let b = &mut report.breakdown;
        b.insert("conics".into(), q.conic_planes);
        b.insert("lines".into(), q.lines);
        b.insert("binodal residual".into(), q.binodal_residual);
        b.insert("line planes".into(), q.line_planes);
        b.insert("rational plane quintics".into(), q.count);
    }
    Ok(report)
}

type Probe = Box<dyn Fn() -> std::result::Result<Coeff, String> + Send + Sync>;

/// One stored value and the computation that should reproduce it.
pub struct GoldenCase {
    pub name: String,
    pub expected: Coeff,
    probe: Probe,
}

impl GoldenCase {
    pub fn new<F, E>(name: impl Into<String>, expected: Coeff, f: F) -> Self
    where
        F: Fn() -> std::result::Result<Coeff, E> + Send + Sync + 'static,
        E: std::fmt::Display,
    {
        GoldenCase {
            name: name.into(),
            expected,
            probe: Box::new(move || f().map_err(|e| e.to_string())),
        }
    }

    pub fn run(&self) -> GoldenOutcome {
        let (got, error) = match (self.probe)() {
            Ok(v) => (Some(Exact(v)), None),
            Err(e) => (None, Some(e)),
        };
        let pass = got.as_ref().is_some_and(|g| g.0 == self.expected);
        GoldenOutcome {
            name: self.name.clone(),
            expected: Exact(self.expected.clone()),
            got,
            error,
            pass,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GoldenOutcome {
    pub name: String,
    pub expected: Exact,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub got: Option<Exact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

/// Closed-form surface counts, worked corrections and threefold values.
pub fn quick_cases() -> Vec<GoldenCase> {
    let mut cases = Vec::new();
    for (p, n, v) in SURFACE_GOLDENS {
        cases.push(GoldenCase::new(
            format!("tg{n} {}", p.label()),
            rat(v),
            move || tg_closed(n, &p.invariants()),
        ));
    }
    for name in WORKED_CORRECTIONS {
        let expected = worked_correction(name)
            .ok()
            .and_then(|r| r.expected)
            .unwrap_or_default();
        cases.push(GoldenCase::new(
            format!("correction {name}"),
            rat(expected),
            move || worked_correction(name).map(|r| r.count.0),
        ));
    }
    cases.push(GoldenCase::new("planes m=4", rat(5600), || {
        tg6_planes_closed(4)
    }));
    cases.push(GoldenCase::new("planes m=5", rat(21_617_125), || {
        tg6_planes_closed(5)
    }));
    cases.push(GoldenCase::new("fano raw integral", rat(134_400), || {
        quartic_fano_check().map(|f| f.raw.0)
    }));
    cases.push(GoldenCase::new("fano coplanar lines", rat(5600), || {
        quartic_fano_check().map(|f| f.count.0)
    }));
    cases.push(GoldenCase::new(
        "binodal residual quartics",
        rat(1185),
        quintic_binodal_residual,
    ));
    cases.push(GoldenCase::new(
        "rational plane quintics",
        rat(17_601_000),
        || quintic_rational_planar().map(|q| q.count.0),
    ));
    cases
}

/// Presets compared engine-versus-closed-form for every `n` in the full suite.
pub fn equivalence_presets(n: u32) -> Vec<Preset> {
    vec![
        Preset::P2 { m: 4 },
        Preset::P2 { m: 5 },
        Preset::P1xP1 { m1: 3, m2: 3 },
        Preset::K3 { g: n as i64 },
        Preset::Abelian,
    ]
}

/// Σ(3) on the abelian surface family of 4-dimensional systems.
pub fn abelian_triple_point_degree() -> std::result::Result<Coeff, CliError> {
    let space = base_surface_model(Preset::Abelian.invariants(), 4)?;
    let family = Family::from_space(&space)?;
    Ok(sigma_degree(&SingularityType::flat(&[3]), &family)?)
}

/// Number of coefficients of the engine's plane polynomial equal to the stored ones.
pub fn plane_polynomial_agreement() -> std::result::Result<Coeff, ThreefoldError> {
    let derived = tg6_planes_derived_polynomial()?;
    let stored = tg6_planes_coefficients();
    let same = derived.len() == stored.len();
    let hits = derived.iter().zip(&stored).filter(|(a, b)| a == b).count();
    Ok(rat(if same { hits as i64 } else { -1 }))
}

/// Quick cases plus every engine-versus-closed-form equality.
pub fn full_cases() -> Vec<GoldenCase> {
    let mut cases = quick_cases();
    for n in 1..=6u32 {
        for p in equivalence_presets(n) {
            let expected = match tg_closed(n, &p.invariants()) {
                Ok(v) => v,
                Err(_) => continue,
            };
            cases.push(GoldenCase::new(
                format!("engine tg{n} {}", p.label()),
                expected,
                move || derived_surface_report("", p.invariants(), n).map(|r| r.count.0),
            ));
        }
    }
    cases.push(GoldenCase::new(
        "engine abelian sigma(3)",
        rat(150),
        abelian_triple_point_degree,
    ));
    cases.push(GoldenCase::new("engine planes m=4", rat(5600), || {
        tg6_planes_derived(4)
    }));
    cases.push(GoldenCase::new(
        "engine plane polynomial coefficients",
        rat(tg6_planes_coefficients().len() as i64),
        plane_polynomial_agreement,
    ));
    cases
}

pub fn suite_cases(suite: Suite) -> Vec<GoldenCase> {
    match suite {
        Suite::Quick => quick_cases(),
        Suite::Full => full_cases(),
    }
}

/// Runs cases on a worker pool; results keep declaration order.
pub fn run_cases(cases: &[GoldenCase]) -> Vec<GoldenOutcome> {
    let slots: Vec<Mutex<Option<GoldenOutcome>>> = cases.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cases.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(case) = cases.get(i) else { break };
                let outcome = case.run();
                *slots[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("case ran"))
        .collect()
}

pub fn cmd_verify_paper(suite: Suite) -> Vec<GoldenOutcome> {
    run_cases(&suite_cases(suite))
}

#[derive(Serialize)]
struct ReportEnvelope<'a> {
    schema: u32,
    #[serde(flatten)]
    report: &'a CountReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<&'static str>,
}

#[derive(Serialize)]
struct SuiteEnvelope<'a> {
    schema: u32,
    suite: Suite,
    passed: bool,
    total: usize,
    failures: usize,
    cases: &'a [GoldenOutcome],
}

fn method_name(m: Method) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Markdown rendering of a report as a two-column table.
pub fn report_markdown(r: &CountReport) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("label".into(), r.label.clone()),
        ("n".into(), r.n.to_string()),
    ];
    rows.extend(r.invariants.iter().map(|(k, v)| (k.clone(), v.to_string())));
    rows.extend(
        r.sigma_degrees
            .iter()
            .map(|(k, v)| (format!("sigma {k}"), v.to_string())),
    );
    rows.extend(r.breakdown.iter().map(|(k, v)| (k.clone(), v.to_string())));
    rows.push(("count".into(), r.count.to_string()));
    if let Some(e) = r.expected {
        rows.push(("expected".into(), e.to_string()));
    }
    rows.push(("method".into(), method_name(r.method)));
    if !r.is_integral() {
        rows.push(("status".into(), OUT_OF_VALIDITY.into()));
    }
    let mut s = String::from("| field | value |\n|---|---|\n");
    for (k, v) in rows {
        s.push_str(&format!("| {k} | {v} |\n"));
    }
    s
}

pub fn report_json(r: &CountReport) -> Result<String> {
    let env = ReportEnvelope {
        schema: SCHEMA,
        report: r,
        status: (!r.is_integral()).then_some(OUT_OF_VALIDITY),
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn suite_markdown(outcomes: &[GoldenOutcome]) -> String {
    let mut s = String::from("| case | expected | got | status |\n|---|---|---|---|\n");
    for o in outcomes {
        let got = match (&o.got, &o.error) {
            (Some(g), _) => g.to_string(),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => String::new(),
        };
        let status = if o.pass { "pass" } else { "FAIL" };
        s.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            o.name, o.expected, got, status
        ));
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    s.push_str(&format!("\n{passed}/{} passed\n", outcomes.len()));
    s
}

pub fn suite_json(suite: Suite, outcomes: &[GoldenOutcome]) -> Result<String> {
    let failures = outcomes.iter().filter(|o| !o.pass).count();
    let env = SuiteEnvelope {
        schema: SCHEMA,
        suite,
        passed: failures == 0,
        total: outcomes.len(),
        failures,
        cases: outcomes,
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

fn subcommand_usage(name: &str) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match cmd.find_subcommand_mut(name) {
        Some(sub) => sub.render_help().to_string(),
        None => cmd.render_help().to_string(),
    }
}

fn emit_report(
    r: &CountReport,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    match format {
        Format::Json => writeln!(out, "{}", report_json(r)?)?,
        Format::Md => write!(out, "{}", report_markdown(r))?,
    }
    if r.is_integral() {
        Ok(EXIT_OK)
    } else {
        writeln!(
            err,
            "{OUT_OF_VALIDITY}: count {} is not an integer",
            r.count
        )?;
        Ok(EXIT_OUT_OF_VALIDITY)
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Tg(a) => emit_report(&cmd_tg(a)?, a.format, out, err),
        Command::Threefold(a) => emit_report(&cmd_threefold(a)?, a.format, out, err),
        Command::VerifyPaper(a) => {
            let outcomes = cmd_verify_paper(a.suite);
            match a.format {
                Format::Json => writeln!(out, "{}", suite_json(a.suite, &outcomes)?)?,
                Format::Md => write!(out, "{}", suite_markdown(&outcomes))?,
            }
            let failed: Vec<_> = outcomes.iter().filter(|o| !o.pass).collect();
            for o in &failed {
                let got = o
                    .got
                    .as_ref()
                    .map(|g| g.to_string())
                    .or_else(|| o.error.clone())
                    .unwrap_or_default();
                writeln!(
                    err,
                    "MISMATCH {}: expected {}, got {}",
                    o.name, o.expected, got
                )?;
            }
            Ok(if failed.is_empty() {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Usage(_) = e {
                let name = match cli.command {
                    Command::Tg(_) => "tg",
                    Command::Threefold(_) => "threefold",
                    Command::VerifyPaper(_) => "verify-paper",
                };
                let _ = write!(err, "\n{}", subcommand_usage(name));
            }
            EXIT_USAGE
        }
    }
}
