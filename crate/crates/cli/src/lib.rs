//! Front end for the `opdyn` binary: loads a system file, runs the requested
//! analysis and renders the result as text, JSON or CSV.
//!
//! Machine-readable output is deterministic: reports are built from ordered
//! structures only, and every random check is driven by the configured seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use opdyn_core::cfs::{analyze_cfs, SpaceKind};
use opdyn_core::conjugacy::{
    build_conjugacy, build_conjugacy_on, run_verification, verify_shift_factor, ConjugacyPackage, Distortion,
    DistortionReport, FactorReport, NuTotal, VerificationReport,
};
use opdyn_core::growth::Metric;
use opdyn_core::hopf::{hopf_decompose, OrbitDecomposition};
use opdyn_core::io::{parse_document, parse_rational};
use opdyn_core::lp::analyze_lp;
use opdyn_core::plot::profile_csv;
use opdyn_core::verdict::{orbit_representatives, Partition};
use opdyn_core::{validate, AnalysisConfig, AtomId, AtomicSystem, BoundednessCertificate, Notion, Scalar, Verdict};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Hopf,
    Expansivity,
    Cfs,
    Conjugate,
    Verify,
    Classify,
    ReportAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Hopf => "hopf",
            Command::Expansivity => "expansivity",
            Command::Cfs => "cfs",
            Command::Conjugate => "conjugate",
            Command::Verify => "verify",
            Command::Classify => "classify",
            Command::ReportAll => "report-all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Lp,
    Sequence(SpaceKind),
}

impl Space {
    pub fn parse(s: &str) -> Option<Space> {
        Some(match s {
            "lp" => Space::Lp,
            "lb" => Space::Sequence(SpaceKind::BoundedFunctions),
            "c0" => Space::Sequence(SpaceKind::VanishingAtInfinity),
            "compact" => Space::Sequence(SpaceKind::CompactConvergence),
            "pointwise" => Space::Sequence(SpaceKind::PointwiseConvergence),
            _ => return None,
        })
    }

    fn metric(self, system: &AtomicSystem) -> Metric {
        match self {
            Space::Lp => Metric::Lp(system.p()),
            Space::Sequence(_) => Metric::Sup,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub system_path: PathBuf,
    /// `None` means the command's default: `lp`, or `c0` for `cfs`.
    pub space: Option<Space>,
    /// `None` runs every notion.
    pub notion: Option<Notion>,
    pub horizon: u32,
    pub threshold: f64,
    pub samples: usize,
    pub seed: u64,
    pub exact: bool,
    pub output: OutputFormat,
    pub package: Option<PathBuf>,
    pub atom: Option<AtomId>,
}

impl RunConfig {
    pub fn new(command: Command, system_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            system_path: system_path.into(),
            space: None,
            notion: None,
            horizon: opdyn_core::verdict::DEFAULT_HORIZON,
            threshold: opdyn_core::verdict::DEFAULT_THRESHOLD,
            samples: 100,
            seed: 0,
            exact: false,
            output: OutputFormat::Text,
            package: None,
            atom: None,
        }
    }

    fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            horizon: self.horizon,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Input {
        path: String,
        #[source]
        source: opdyn_core::Error,
    },
    #[error("{0}")]
    Analysis(#[from] opdyn_core::Error),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("malformed package file: {0}")]
    Package(String),
}

/// What a run produced: the rendered report, or a message for stderr.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(config: &RunConfig) -> Outcome {
    match execute(config) {
        Ok((report, code)) => Outcome {
            exit_code: code,
            stdout: report,
            stderr: String::new(),
        },
        Err(e) => Outcome {
            exit_code: match e {
                CliError::Analysis(opdyn_core::Error::VerificationFailed { .. }) => EXIT_VERIFICATION,
                _ => EXIT_INPUT,
            },
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

pub fn load_system(path: &Path, exact: bool) -> Result<(Option<String>, AtomicSystem), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let input = |source| CliError::Input {
        path: path.display().to_string(),
        source,
    };
    let doc = parse_document(&text).map_err(input)?;
    let system = if exact { doc.system.to_exact().map_err(input)? } else { doc.system };
    validate(&system).map_err(input)?;
    Ok((doc.comment, system))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn execute(config: &RunConfig) -> Result<(String, i32), CliError> {
    if config.horizon < 1 {
        return Err(CliError::Usage("horizon must be at least 1".into()));
    }
    if config.samples < 1 {
        return Err(CliError::Usage("samples must be at least 1".into()));
    }
    let (comment, system) = load_system(&config.system_path, config.exact)?;
    let file = config
        .system_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    if config.output == OutputFormat::Csv && !matches!(config.command, Command::Expansivity | Command::Cfs) {
        return Err(CliError::Usage(format!(
            "CSV output is only available for expansivity and cfs, not {}",
            config.command.name()
        )));
    }
    match config.command {
        Command::Validate => {
            let cert = validate(&system)?;
            Ok((render(config, &cert, || validate_text(&cert)), EXIT_OK))
        }
        Command::Hopf => {
            let dec = hopf_decompose(&system)?;
            Ok((render(config, &dec, || hopf_text(&dec)), EXIT_OK))
        }
        Command::Expansivity | Command::Cfs => expansivity(config, &system),
        Command::Conjugate => {
            let pk = build_conjugacy(&system, &hopf_decompose(&system)?)?;
            Ok((render(config, &pk, || package_text(&pk)), EXIT_OK))
        }
        Command::Verify => verify(config, &system),
        Command::Classify => {
            let pk = build_conjugacy(&system, &hopf_decompose(&system)?)?;
            let report = ClassifyReport::from_package(&pk);
            Ok((render(config, &report, || classify_text(&report)), EXIT_OK))
        }
        Command::ReportAll => {
            let report = report_all(config, &file, comment, &system);
            Ok((render(config, &report, || report_all_text(&report)), EXIT_OK))
        }
    }
}

fn render<T: Serialize>(config: &RunConfig, value: &T, text: impl FnOnce() -> String) -> String {
    match config.output {
        OutputFormat::Json => json(value),
        _ => text(),
    }
}

fn space_for(config: &RunConfig) -> Result<Space, CliError> {
    match (config.command, config.space) {
        (Command::Cfs, None) => Ok(Space::Sequence(SpaceKind::VanishingAtInfinity)),
        (Command::Cfs, Some(Space::Lp)) => Err(CliError::Usage("cfs needs a sequence space, not lp".into())),
        (_, Some(s)) => Ok(s),
        (_, None) => Ok(Space::Lp),
    }
}

fn analyze(system: &AtomicSystem, space: Space, notion: Notion, cfg: &AnalysisConfig) -> opdyn_core::Result<Verdict> {
    match space {
        Space::Lp => analyze_lp(system, notion, cfg),
        Space::Sequence(kind) => analyze_cfs(system, kind, notion, cfg),
    }
}

fn expansivity(config: &RunConfig, system: &AtomicSystem) -> Result<(String, i32), CliError> {
    let space = space_for(config)?;
    if config.output == OutputFormat::Csv {
        let atom = match config.atom {
            Some(a) if system.contains(a) => a,
            Some(a) => return Err(CliError::Usage(format!("atom {a} is not in the system"))),
            None => orbit_representatives(system)[0],
        };
        return Ok((
            profile_csv(system, atom, space.metric(system), i64::from(config.horizon)),
            EXIT_OK,
        ));
    }
    let notions: Vec<Notion> = match config.notion {
        Some(n) => vec![n],
        None => Notion::ALL.to_vec(),
    };
    let cfg = config.analysis();
    let verdicts = notions
        .iter()
        .map(|&n| analyze(system, space, n, &cfg))
        .collect::<opdyn_core::Result<Vec<_>>>()?;
    let text = || verdicts.iter().map(verdict_text).collect::<Vec<_>>().join("\n");
    Ok((render(config, &verdicts, text), EXIT_OK))
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub conjugacy: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_factor: Option<FactorReport>,
    pub passed: bool,
}

fn verify(config: &RunConfig, system: &AtomicSystem) -> Result<(String, i32), CliError> {
    let package = match &config.package {
        Some(path) => read_package(path, system)?,
        None => build_conjugacy(system, &hopf_decompose(system)?)?,
    };
    let conjugacy = run_verification(&package, system, config.samples, config.seed)?;
    let shift_factor = match package.distortion.k {
        Distortion::Bounded(_) => Some(verify_shift_factor(&package, system, config.samples, config.seed)?),
        Distortion::Unbounded => None,
    };
    let passed = conjugacy.passed && shift_factor.as_ref().is_none_or(|f| f.passed);
    let report = VerifyReport {
        conjugacy,
        shift_factor,
        passed,
    };
    let code = if passed { EXIT_OK } else { EXIT_VERIFICATION };
    Ok((render(config, &report, || verify_text(&report)), code))
}

fn scalar_from_json(v: &Value) -> Option<Scalar> {
    match v {
        Value::String(s) => parse_rational(s).map(Scalar::Exact),
        Value::Number(n) => n.as_f64().map(Scalar::real),
        Value::Object(m) => Some(Scalar::complex(m.get("re")?.as_f64()?, m.get("im")?.as_f64()?)),
        _ => None,
    }
}

/// Rebuilds a package from its wandering set and keeps any tabulated
/// transport value that disagrees with the closed form, so a tampered file
/// fails verification instead of being silently repaired.
pub fn read_package(path: &Path, system: &AtomicSystem) -> Result<ConjugacyPackage, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Package(e.to_string()))?;
    let atom = |v: &Value| -> Result<AtomId, CliError> {
        v.as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Package(format!("`{v}` is not an atom id")))
    };
    let wandering = value
        .get("wandering_set")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Package("missing `wandering_set`".into()))?
        .iter()
        .map(atom)
        .collect::<Result<Vec<_>, _>>()?;
    let mut package = build_conjugacy_on(system, &wandering)?;
    let table = value.get("nu_window").and_then(Value::as_array).cloned().unwrap_or_default();
    for entry in table {
        let x = atom(entry.get("atom").unwrap_or(&Value::Null))?;
        let t = entry
            .get("transport")
            .and_then(scalar_from_json)
            .ok_or_else(|| CliError::Package(format!("bad transport for atom {x}")))?;
        let closed = package.transport(system, x)?;
        let differs = match (&t, &closed) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a != b,
            _ => Scalar::relative_deviation(&t, &closed) > 1e-12,
        };
        if differs {
            package = package.with_transport_override(x, t);
        }
    }
    Ok(package)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyReport {
    pub nu_total: NuTotal,
    pub distortion: DistortionReport,
    pub chaos: opdyn_core::conjugacy::ChaosClassification,
}

impl ClassifyReport {
    fn from_package(pk: &ConjugacyPackage) -> Self {
        ClassifyReport {
            nu_total: pk.nu_total.clone(),
            distortion: pk.distortion.clone(),
            chaos: pk.chaos.clone(),
        }
    }
}

/// Either a section's result or the reason it does not apply.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Section<T> {
    Done(T),
    Skipped { skipped: String },
}

impl<T> Section<T> {
    fn from(result: opdyn_core::Result<T>) -> Self {
        match result {
            Ok(v) => Section::Done(v),
            Err(e) => Section::Skipped { skipped: e.to_string() },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceVerdicts {
    pub space: String,
    pub verdicts: Vec<Section<Verdict>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullReport {
    pub system: String,
    pub comment: Option<String>,
    pub horizon: u32,
    #[serde(serialize_with = "opdyn_core::io::serialize_real")]
    pub threshold: f64,
    pub seed: u64,
    pub samples: usize,
    pub boundedness: Section<BoundednessCertificate>,
    pub decomposition: Section<OrbitDecomposition>,
    pub expansivity: Vec<SpaceVerdicts>,
    pub conjugacy: Section<ConjugacyPackage>,
    pub verification: Section<VerifyReport>,
}

fn report_all(config: &RunConfig, file: &str, comment: Option<String>, system: &AtomicSystem) -> FullReport {
    let cfg = config.analysis();
    let spaces = ["lp", "lb", "c0", "compact", "pointwise"];
    let expansivity = spaces
        .iter()
        .map(|name| {
            let space = Space::parse(name).expect("known space");
            SpaceVerdicts {
                space: name.to_string(),
                verdicts: Notion::ALL
                    .iter()
                    .map(|&n| Section::from(analyze(system, space, n, &cfg)))
                    .collect(),
            }
        })
        .collect();
    let decomposition = hopf_decompose(system);
    let package = decomposition
        .clone()
        .and_then(|d| build_conjugacy(system, &d));
    let verification = package.clone().and_then(|pk| {
        let conjugacy = run_verification(&pk, system, config.samples, config.seed)?;
        let shift_factor = match pk.distortion.k {
            Distortion::Bounded(_) => Some(verify_shift_factor(&pk, system, config.samples, config.seed)?),
            Distortion::Unbounded => None,
        };
        let passed = conjugacy.passed && shift_factor.as_ref().is_none_or(|f| f.passed);
        Ok(VerifyReport {
            conjugacy,
            shift_factor,
            passed,
        })
    });
    FullReport {
        system: file.to_string(),
        comment,
        horizon: config.horizon,
        threshold: config.threshold,
        seed: config.seed,
        samples: config.samples,
        boundedness: Section::from(validate(system)),
        decomposition: Section::from(decomposition),
        expansivity,
        conjugacy: Section::from(package),
        verification: Section::from(verification),
    }
}

fn validate_text(cert: &BoundednessCertificate) -> String {
    let mut s = format!("c = {} (attained at {})\n", magnitude(&cert.c), cert.c_witness);
    match (&cert.c_tilde, cert.c_tilde_witness) {
        (Some(c), Some(at)) => writeln!(s, "c~ = {} (attained at {at})", magnitude(c)).unwrap(),
        _ => s.push_str("c~ undefined: the map is not invertible\n"),
    }
    s
}

fn magnitude(m: &opdyn_core::Magnitude) -> String {
    serde_json::to_value(m)
        .map(|v| match v {
            Value::String(s) => s,
            other => other.to_string(),
        })
        .unwrap_or_default()
}

fn hopf_text(dec: &OrbitDecomposition) -> String {
    let list = |v: &[usize]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
        }
    };
    let wandering = dec.wandering_set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    format!(
        "conservative orbits: {}\ndissipative orbits: {}\nwandering set: {{{}}}\nwandering mass: {}\n",
        list(&dec.conservative_orbits),
        list(&dec.dissipative_orbits),
        wandering,
        dec.wandering_mass
    )
}

fn verdict_text(v: &Verdict) -> String {
    let mut s = format!("{} on {}: {} (horizon {})\n", v.notion, v.space, v.status, v.horizon);
    if let Some(w) = &v.witness {
        writeln!(s, "  witness: atom {}, n = {}, log10 value = {:.4}", w.atom, w.n, w.log10_value).unwrap();
    }
    s.push_str("  orbit  kind        forward rate  sign        backward rate  sign\n");
    for r in &v.rates {
        writeln!(
            s,
            "  {:<5}  {:<10}  {:>12.6}  {:<10}  {:>13.6}  {:?}",
            r.orbit, r.kind, r.forward_rate, format!("{:?}", r.forward_sign), r.backward_rate, r.backward_sign
        )
        .unwrap();
    }
    let parts = v.partition();
    if !parts.is_empty() {
        s.push_str("  partition:\n");
        for (orbit, p) in parts {
            let desc = match p {
                Partition::AllForward => "every atom in the forward class".to_string(),
                Partition::AllBackward => "every atom in the backward class".to_string(),
                Partition::Split { first_backward } => {
                    format!("positions < {first_backward} forward, positions >= {first_backward} backward")
                }
            };
            writeln!(s, "    orbit {orbit}: {desc}").unwrap();
        }
    }
    s
}

fn nu_total_text(t: &NuTotal) -> String {
    match t {
        NuTotal::Finite(m) => magnitude(m),
        NuTotal::Infinite => "infinite".into(),
        NuTotal::Undetermined => "undetermined".into(),
    }
}

fn distortion_text(d: &DistortionReport) -> String {
    let mut s = match d.k {
        Distortion::Bounded(k) => format!("distortion constant K = {k}\n"),
        Distortion::Unbounded => "distortion unbounded\n".to_string(),
    };
    if let Some(w) = &d.witness {
        writeln!(s, "  extreme ratio at k = {}, atom {}: log10 = {:.4}", w.k, w.atom, w.log10_ratio).unwrap();
    }
    s
}

fn package_text(pk: &ConjugacyPackage) -> String {
    let mut s = format!(
        "wandering set: {{{}}}\nnu(X) = {}\n",
        pk.wandering_set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "),
        nu_total_text(&pk.nu_total)
    );
    for t in &pk.orbit_totals {
        writeln!(s, "  orbit {}: nu = {}", t.orbit, nu_total_text(&t.total)).unwrap();
    }
    s.push_str("  atom      nu                      transport\n");
    for e in &pk.nu_window {
        let transport = serde_json::to_value(&e.transport).map(|v| v.to_string()).unwrap_or_default();
        writeln!(s, "  {:<8}  {:<22}  {}", e.atom.to_string(), magnitude(&e.nu), transport).unwrap();
    }
    s.push_str("  k     u_k\n");
    for u in &pk.u_window {
        writeln!(s, "  {:<4}  {:.12}", u.k, u.u).unwrap();
    }
    s.push_str(&distortion_text(&pk.distortion));
    s.push_str(&chaos_text(&pk.chaos));
    s
}

fn chaos_text(c: &opdyn_core::conjugacy::ChaosClassification) -> String {
    format!(
        "nu finite: {}\ndevaney: {}\nmixing: {}\nfrequently hypercyclic: {}\nfrequently recurrent: {}\n",
        c.nu_finite, c.devaney, c.mixing, c.frequently_hypercyclic, c.frequently_recurrent
    )
}

fn classify_text(r: &ClassifyReport) -> String {
    format!(
        "nu(X) = {}\n{}{}",
        nu_total_text(&r.nu_total),
        distortion_text(&r.distortion),
        chaos_text(&r.chaos)
    )
}

fn verify_text(r: &VerifyReport) -> String {
    let c = &r.conjugacy;
    let mut s = format!(
        "{} samples (seed {}, {} arithmetic)\n  isometry max deviation: {:e}\n  intertwining max deviation: {:e}\n  inverse max deviation: {:e}\n",
        c.samples,
        c.seed,
        if c.exact { "exact" } else { "float" },
        c.isometry_max_deviation,
        c.intertwining_max_deviation,
        c.inverse_max_deviation
    );
    if let Some(f) = &c.failure {
        writeln!(s, "  FAILED: {} check at atom {} (deviation {:e})", f.check, f.atom, f.deviation).unwrap();
    }
    if let Some(f) = &r.shift_factor {
        writeln!(
            s,
            "  shift factor deviations: {:e} (Gamma), {:e} (Gamma o Pi)",
            f.gamma_max_deviation, f.gamma_pi_max_deviation
        )
        .unwrap();
    }
    s.push_str(if r.passed { "passed\n" } else { "failed\n" });
    s
}

fn report_all_text(r: &FullReport) -> String {
    let mut s = format!("system: {}\n", r.system);
    if let Some(c) = &r.comment {
        writeln!(s, "{c}").unwrap();
    }
    s.push_str("\n[boundedness]\n");
    match &r.boundedness {
        Section::Done(c) => s.push_str(&validate_text(c)),
        Section::Skipped { skipped } => writeln!(s, "skipped: {skipped}").unwrap(),
    }
    s.push_str("\n[decomposition]\n");
    match &r.decomposition {
        Section::Done(d) => s.push_str(&hopf_text(d)),
        Section::Skipped { skipped } => writeln!(s, "skipped: {skipped}").unwrap(),
    }
    s.push_str("\n[expansivity]\n");
    for sv in &r.expansivity {
        let cells: Vec<String> = sv
            .verdicts
            .iter()
            .zip(Notion::ALL)
            .map(|(v, n)| match v {
                Section::Done(v) => format!("{n}={}", v.status),
                Section::Skipped { .. } => format!("{n}=n/a"),
            })
            .collect();
        writeln!(s, "{:<9} {}", sv.space, cells.join(" ")).unwrap();
    }
    s.push_str("\n[conjugacy]\n");
    match &r.conjugacy {
        Section::Done(pk) => {
            writeln!(s, "nu(X) = {}", nu_total_text(&pk.nu_total)).unwrap();
            s.push_str(&distortion_text(&pk.distortion));
            s.push_str(&chaos_text(&pk.chaos));
        }
        Section::Skipped { skipped } => writeln!(s, "skipped: {skipped}").unwrap(),
    }
    s.push_str("\n[verification]\n");
    match &r.verification {
        Section::Done(v) => s.push_str(&verify_text(v)),
        Section::Skipped { skipped } => writeln!(s, "skipped: {skipped}").unwrap(),
    }
    s
}
