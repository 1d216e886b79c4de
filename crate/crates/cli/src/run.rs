//! Command dispatch and reports.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use pwnorm::envelope::{
    distortion_certificate, envelope_norm_exact_with, has_envelope_property, CheckMode, EnvelopeCaps, Witness,
};
use pwnorm::experiments::{rosenthal_mc, yn_report, ThreePoint, YnParams};
use pwnorm::spaces::{classify_rosenthal, classify_single};
use pwnorm::{family_norm_with, Family, RestrictOptions, SparseVector, WeightDescriptor};

use crate::config::{parse_config, Config, ConfigError, SpaceExpr};
use crate::vector::{parse_vector, VectorError};

pub const COMMANDS: [&str; 7] = [
    "norm",
    "envelope",
    "distortion",
    "classify",
    "check-envelope-property",
    "experiment-yn",
    "experiment-rosenthal",
];

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "pwnorm", version, about = "Partition-weight norms, envelopes and experiments")]
pub struct Cli {
    /// One of: norm, envelope, distortion, classify, check-envelope-property,
    /// experiment-yn, experiment-rosenthal
    #[arg(value_name = "COMMAND")]
    pub positional: Option<String>,
    #[arg(long, value_name = "NAME", conflicts_with = "positional")]
    pub command: Option<String>,
    /// Space-expression config
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Vector file
    #[arg(long, value_name = "FILE")]
    pub vector: Option<PathBuf>,
    /// Write a CSV report here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Most assignments the exact envelope search may enumerate
    #[arg(long, value_name = "N")]
    pub cap_assignments: Option<u128>,
    /// Most restricted members for envelope search and property checks
    #[arg(long, value_name = "N")]
    pub cap_members: Option<usize>,
    #[arg(long, value_name = "X")]
    pub eps: Option<f64>,
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,
    /// Monte Carlo samples, or sampled refinements for the property check
    #[arg(long, value_name = "N")]
    pub samples: Option<u64>,
}

impl Cli {
    pub fn command_name(&self) -> Option<&str> {
        self.command.as_deref().or(self.positional.as_deref())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("vector file: {0}")]
    Vector(#[from] VectorError),
    #[error("{0}")]
    Compute(#[from] pwnorm::Error),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(e) if e.is_capacity() => 3,
            CliError::Io { .. } => 4,
            _ => 2,
        }
    }
}

/// Human-readable text plus one CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub header: Vec<String>,
    pub row: Vec<String>,
}

impl Report {
    fn new(header: &[&str]) -> Self {
        Report { text: String::new(), header: header.iter().map(|s| s.to_string()).collect(), row: Vec::new() }
    }

    fn line(&mut self, key: &str, value: impl AsRef<str>) {
        self.text.push_str(&format!("{key}: {}\n", value.as_ref()));
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        w.write_record(&self.row).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Formats like `%.15g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.14e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..15).contains(&exp) {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (14 - exp) as usize, x))
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), msg: e.to_string() })
}

fn load_config(cli: &Cli) -> Result<Option<Config>, CliError> {
    match &cli.config {
        Some(path) => Ok(Some(parse_config(&read(path)?)?)),
        None => Ok(None),
    }
}

fn need_space(cli: &Cli) -> Result<(Config, SpaceExpr, Family), CliError> {
    let config = load_config(cli)?.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let space = config.space.clone().ok_or_else(|| CliError::Usage("config has no 'space' statement".into()))?;
    let family = space.build(config.p)?;
    Ok((config, space, family))
}

fn need_vector(cli: &Cli) -> Result<SparseVector, CliError> {
    let path = cli.vector.as_ref().ok_or_else(|| CliError::Usage("--vector is required".into()))?;
    Ok(parse_vector(&read(path)?)?)
}

fn caps(cli: &Cli) -> EnvelopeCaps {
    let mut caps = EnvelopeCaps::default();
    if let Some(m) = cli.cap_members {
        caps.max_members = m;
    }
    if let Some(a) = cli.cap_assignments {
        caps.max_assignments = a;
    }
    caps
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let name = cli
        .command_name()
        .ok_or_else(|| CliError::Usage(format!("no command given; expected one of {}", COMMANDS.join(", "))))?;
    match name {
        "norm" => norm(cli),
        "envelope" => envelope(cli),
        "distortion" => distortion(cli),
        "classify" => classify(cli),
        "check-envelope-property" => check_property(cli),
        "experiment-yn" => experiment_yn(cli),
        "experiment-rosenthal" => experiment_rosenthal(cli),
        other => Err(CliError::Usage(format!("unknown command '{other}'; expected one of {}", COMMANDS.join(", ")))),
    }
}

/// Runs and writes the CSV record to `--out` when given.
pub fn run_and_write(cli: &Cli) -> Result<Report, CliError> {
    let report = run(cli)?;
    if let Some(out) = &cli.out {
        fs::write(out, report.csv()).map_err(|e| CliError::Io { path: out.clone(), msg: e.to_string() })?;
    }
    Ok(report)
}

const NORM_HEADER: [&str; 5] = ["command", "space", "p", "norm", "argmax_member"];

fn norm(cli: &Cli) -> Result<Report, CliError> {
    let (config, space, family) = need_space(cli)?;
    let x = need_vector(cli)?;
    let r = family_norm_with(&x, &family, &RestrictOptions::default())?;
    let mut rep = Report::new(&NORM_HEADER);
    rep.line("space", space.to_string());
    rep.line("p", fmt_num(config.p));
    rep.line("norm", fmt_num(r.value));
    rep.line("argmax member", &r.argmax_member);
    rep.line("members evaluated", r.candidates_evaluated.to_string());
    rep.row = vec!["norm".into(), space.to_string(), fmt_num(config.p), fmt_num(r.value), r.argmax_member];
    Ok(rep)
}

fn envelope(cli: &Cli) -> Result<Report, CliError> {
    let (config, space, family) = need_space(cli)?;
    let x = need_vector(cli)?;
    let r = envelope_norm_exact_with(&x, &family, &caps(cli), &RestrictOptions::default())?;
    let mut rep = Report::new(&NORM_HEADER);
    rep.line("space", space.to_string());
    rep.line("p", fmt_num(config.p));
    rep.line("envelope norm", fmt_num(r.norm.value));
    rep.line("assignment", r.assignment.to_string());
    rep.line("assignments searched", r.norm.candidates_evaluated.to_string());
    rep.row = vec!["envelope".into(), space.to_string(), fmt_num(config.p), fmt_num(r.norm.value), r.norm.argmax_member];
    Ok(rep)
}

fn distortion(cli: &Cli) -> Result<Report, CliError> {
    let (config, space, family) = need_space(cli)?;
    let x = need_vector(cli)?;
    let r = distortion_certificate(&x, &family, &Witness::Exact(caps(cli)))?;
    let mut rep =
        Report::new(&["command", "space", "p", "given_norm", "envelope_lb", "ratio", "distance_lb", "witness"]);
    rep.line("space", space.to_string());
    rep.line("p", fmt_num(config.p));
    rep.line("given norm", fmt_num(r.given_norm));
    rep.line("envelope lower bound", fmt_num(r.envelope_lb));
    rep.line("ratio", fmt_num(r.ratio));
    rep.line("distance lower bound", fmt_num(r.distance_lb));
    rep.line("witness", r.witness.to_string());
    rep.row = vec![
        "distortion".into(),
        space.to_string(),
        fmt_num(config.p),
        fmt_num(r.given_norm),
        fmt_num(r.envelope_lb),
        fmt_num(r.ratio),
        fmt_num(r.distance_lb),
        r.witness.to_string(),
    ];
    Ok(rep)
}

fn classify(cli: &Cli) -> Result<Report, CliError> {
    let config = load_config(cli)?.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let (subject, iso, reason) = match (&config.space, &config.profile) {
        (Some(SpaceExpr::Xp(w)), _) => {
            let c = classify_rosenthal(w, config.p)?;
            (SpaceExpr::Xp(w.clone()).to_string(), c.iso, c.reason)
        }
        (None, Some(profile)) => {
            let iso = classify_single(profile)?;
            (config.to_string().lines().nth(1).unwrap_or("profile").to_string(), iso, "single partition".into())
        }
        _ => return Err(CliError::Usage("classify needs 'space = xp(w)' or a 'profile' statement".into())),
    };
    let mut rep = Report::new(&["command", "space", "p", "isomorphic_to", "reason"]);
    rep.line("space", &subject);
    rep.line("p", fmt_num(config.p));
    rep.line("isomorphic to", iso.to_string());
    rep.line("reason", &reason);
    rep.row = vec!["classify".into(), subject, fmt_num(config.p), iso.to_string(), reason];
    Ok(rep)
}

fn check_property(cli: &Cli) -> Result<Report, CliError> {
    let (config, space, family) = need_space(cli)?;
    let x = need_vector(cli)?;
    let (support, _) = x.to_atoms()?;
    let mode = match cli.samples {
        Some(samples) => CheckMode::Sampled { samples, seed: cli.seed.unwrap_or(0) },
        None => {
            let CheckMode::Exhaustive { max_points, max_members } = CheckMode::default() else { unreachable!() };
            CheckMode::Exhaustive { max_points, max_members: cli.cap_members.unwrap_or(max_members) }
        }
    };
    let r = has_envelope_property(&family, &support, mode)?;
    let counterexample = match &r.counterexample {
        None => String::new(),
        Some(c) => {
            let atoms = c.refined.support().atoms();
            let cells: Vec<String> = c
                .q
                .cells()
                .iter()
                .map(|cell| {
                    let pts: Vec<String> = cell.iter().map(|&a| atoms[a].to_string()).collect();
                    format!("{{{}}}", pts.join(" "))
                })
                .collect();
            format!("Q=[{}] T=[{}]", cells.join(", "), c.t.join(", "))
        }
    };
    let mut rep = Report::new(&[
        "command",
        "space",
        "p",
        "holds",
        "probabilistic",
        "refinements_checked",
        "members",
        "counterexample",
    ]);
    rep.line("space", space.to_string());
    rep.line("p", fmt_num(config.p));
    rep.line("envelope property", if r.holds { "holds" } else { "fails" });
    if r.probabilistic {
        rep.line("note", "sampled check; a pass is not a proof");
    }
    rep.line("refinements checked", r.refinements_checked.to_string());
    rep.line("restricted members", r.members.to_string());
    if !counterexample.is_empty() {
        rep.line("counterexample", &counterexample);
    }
    rep.row = vec![
        "check-envelope-property".into(),
        space.to_string(),
        fmt_num(config.p),
        r.holds.to_string(),
        r.probabilistic.to_string(),
        r.refinements_checked.to_string(),
        r.members.to_string(),
        counterexample,
    ];
    Ok(rep)
}

fn join(v: &[u64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn experiment_yn(cli: &Cli) -> Result<Report, CliError> {
    let (p, n, w) = match load_config(cli)? {
        Some(Config { p, space: Some(SpaceExpr::Yn { n, w }), .. }) => (p, cli.n.unwrap_or(n), w),
        Some(Config { space: Some(_), .. }) => {
            return Err(CliError::Usage("experiment-yn needs 'space = yn(n, w)' or no config".into()));
        }
        Some(Config { p, .. }) => (p, cli.n.unwrap_or(3), WeightDescriptor::PowerDecay(0.25)),
        None => (4.0, cli.n.unwrap_or(3), WeightDescriptor::PowerDecay(0.25)),
    };
    let eps = cli.eps.unwrap_or(1.0);
    let params = YnParams::auto(p, n, w, eps)?;
    let r = yn_report(&params)?;
    let mut header: Vec<String> = ["n", "p", "eps", "m", "K"].iter().map(|s| s.to_string()).collect();
    header.extend((0..r.sums.len()).map(|i| format!("S_{i}")));
    header.extend(["given_norm", "envelope_lb", "ratio", "distance_lb"].iter().map(|s| s.to_string()));
    let mut rep = Report { text: String::new(), header, row: Vec::new() };
    rep.line("n", n.to_string());
    rep.line("p", fmt_num(p));
    rep.line("eps", fmt_num(eps));
    rep.line("w", params.w().to_string());
    rep.line("m", join(params.m()));
    rep.line("K", join(params.k()));
    for (i, (s, l)) in r.sums.iter().zip(&r.labels).enumerate() {
        rep.line(&format!("S_{i} {l}"), fmt_num(*s));
    }
    rep.line("given norm", fmt_num(r.given_norm));
    rep.line("envelope lower bound", fmt_num(r.envelope_lb));
    rep.line("block assignment", r.assignment.join(" "));
    rep.line("ratio", fmt_num(r.ratio));
    rep.line("distance lower bound", fmt_num(r.distance_lb));
    rep.row = vec![n.to_string(), fmt_num(p), fmt_num(eps), join(params.m()), join(params.k())];
    rep.row.extend(r.sums.iter().map(|s| fmt_num(*s)));
    rep.row.extend([r.given_norm, r.envelope_lb, r.ratio, r.distance_lb].iter().map(|v| fmt_num(*v)));
    Ok(rep)
}

fn experiment_rosenthal(cli: &Cli) -> Result<Report, CliError> {
    let (p, vars) = match load_config(cli)? {
        Some(c) => (c.p, c.variables.unwrap_or_else(|| vec![ThreePoint::rademacher(); 10])),
        None => (4.0, vec![ThreePoint::rademacher(); 10]),
    };
    let samples = cli.samples.unwrap_or(1_000_000);
    let seed = cli.seed.unwrap_or(0);
    let r = rosenthal_mc(&vars, p, samples, seed)?;
    let mut rep = Report::new(&["N", "p", "samples", "seed", "lhs_est", "stderr", "rhs", "ratio"]);
    rep.line("variables", vars.len().to_string());
    rep.line("p", fmt_num(p));
    rep.line("samples", samples.to_string());
    rep.line("seed", seed.to_string());
    rep.line("lhs estimate", fmt_num(r.lhs_est));
    rep.line("standard error", fmt_num(r.stderr));
    rep.line("rhs", fmt_num(r.rhs));
    rep.line("ratio", fmt_num(r.ratio));
    rep.row = vec![
        vars.len().to_string(),
        fmt_num(p),
        samples.to_string(),
        seed.to_string(),
        fmt_num(r.lhs_est),
        fmt_num(r.stderr),
        fmt_num(r.rhs),
        fmt_num(r.ratio),
    ];
    Ok(rep)
}
