mod file;

use clap::{Parser, Subcommand, ValueEnum};
use file::{FileError, MubFile};
use mub_product::constructions::{canonical_qubit_triple, canonical_qutrit_quadruple};
use mub_product::entanglement::{audit_mu_vector, find_mu_vectors};
use mub_product::equivalence::{equivalent, Verdict};
use mub_product::fixtures::{
    direct_triple_2x5, domino_3x3, indirect_d4, indirect_triple_2x5, product_triple_2x3,
};
use mub_product::mu::verify_set;
use mub_product::search::{
    bound_probe, extend_set, find_mu_product_set, persist_violation, SearchBudget,
    SearchReport,
};
use mub_product::structure::{
    classify, factor_grouping, extract_ortho_subset, grouping_counterexample, mu_product_bound,
};
use mub_product::{DimensionSignature, MubSet};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "mubp",
    version,
    about = "Mutually unbiased product bases: construct, verify, classify, search"
)]
struct Cli {
    /// Tolerance on squared overlaps.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Restarts for stochastic searches.
    #[arg(long, global = true, default_value_t = 200)]
    restarts: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Rescale non-normalized factors when loading instead of rejecting them.
    #[arg(long, global = true)]
    normalize: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    QubitTriple,
    QutritQuadruple,
    ProductTriple2x3,
    DirectTriple2x5,
    IndirectTriple2x5,
    IndirectD4,
    Domino3x3,
}

#[derive(Clone, Debug)]
struct SignatureArg(Vec<usize>);

impl FromStr for SignatureArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(SignatureArg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a known basis set to a file (or standard output).
    Construct {
        #[arg(long, value_enum)]
        family: Family,
        /// Number of subsystems for the tensor-power families.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check orthonormality of every basis and unbiasedness of every pair.
    Verify { file: PathBuf },
    /// Direct/indirect classification with factor-basis counts.
    Classify { file: PathBuf },
    /// Orthonormal factor subsets anchored at each vector.
    ExtractOrtho {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        basis: usize,
        #[arg(long, default_value_t = 0)]
        subsystem: usize,
        /// Single anchor; all anchors when omitted.
        #[arg(long)]
        kappa: Option<usize>,
    },
    /// Group first and second factors into orthonormal bases.
    Group {
        file: PathBuf,
        /// Directory for counterexample files.
        #[arg(long)]
        artifact_dir: Option<PathBuf>,
    },
    /// Decide equivalence of two basis sets.
    Equiv {
        first: PathBuf,
        second: PathBuf,
        /// Maximum number of global candidate checks.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
    },
    /// Search for vectors unbiased to the set and audit their entanglement.
    Entangle {
        file: PathBuf,
        /// Write found vectors as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend a set (FILE), find a set (--signature, --size) or probe the bound (--probe-bound).
    Search {
        file: Option<PathBuf>,
        #[arg(long)]
        signature: Option<SignatureArg>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        probe_bound: bool,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        wall_clock: Option<f64>,
        /// Write the first found set here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for bound violation reports.
        #[arg(long)]
        artifact_dir: Option<PathBuf>,
    },
    /// Upper bound on the number of MU product bases.
    Bound {
        #[arg(long)]
        signature: SignatureArg,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{0}")]
    Core(#[from] mub_product::Error),
    #[error("{0}")]
    Usage(String),
}

struct Report {
    pass: bool,
    fields: Map<String, Value>,
    lines: Vec<String>,
}

impl Report {
    fn new(pass: bool) -> Self {
        Self {
            pass,
            fields: Map::new(),
            lines: Vec::new(),
        }
    }

    fn field(mut self, key: &str, value: impl serde::Serialize) -> Self {
        self.fields.insert(
            key.into(),
            serde_json::to_value(value).expect("serializable"),
        );
        self
    }

    fn line(mut self, line: impl Into<String>) -> Self {
        self.lines.push(line.into());
        self
    }
}

struct Ctx {
    tol: f64,
    seed: u64,
    restarts: usize,
    normalize: bool,
}

impl Ctx {
    fn load(&self, path: &Path) -> Result<MubSet, CliError> {
        Ok(MubFile::load(path)?.to_set(&path.display().to_string(), self.normalize)?)
    }

    fn save(&self, set: &MubSet, path: &Path) -> Result<(), CliError> {
        Ok(MubFile::from_set(set, Some(self.seed), self.tol).save(path)?)
    }
}

fn sig(arg: &SignatureArg) -> Result<DimensionSignature, CliError> {
    DimensionSignature::new(arg.0.clone()).map_err(|e| CliError::Usage(e.to_string()))
}

fn construct(
    ctx: &Ctx,
    family: Family,
    n: usize,
    out: Option<&Path>,
) -> Result<Option<Report>, CliError> {
    let single = |name: &str, b| MubSet::with_names(vec![b], vec![name.to_string()], name, ctx.tol);
    let set = match family {
        Family::QubitTriple => canonical_qubit_triple(n)?,
        Family::QutritQuadruple => canonical_qutrit_quadruple(n)?,
        Family::ProductTriple2x3 => product_triple_2x3(),
        Family::DirectTriple2x5 => direct_triple_2x5(),
        Family::IndirectTriple2x5 => indirect_triple_2x5(),
        Family::IndirectD4 => single("indirect-d4", indirect_d4())?,
        Family::Domino3x3 => single("domino-3x3", domino_3x3())?,
    };
    let Some(out) = out else {
        let text = serde_json::to_string_pretty(&MubFile::from_set(&set, Some(ctx.seed), ctx.tol))
            .expect("serializable");
        println!("{text}");
        return Ok(None);
    };
    ctx.save(&set, out)?;
    Ok(Some(
        Report::new(true)
            .field("path", out.display().to_string())
            .field("signature", set.signature().dims())
            .field("bases", set.len())
            .line(format!(
                "wrote {} bases on {} to {}",
                set.len(),
                set.signature(),
                out.display()
            )),
    ))
}

fn verify(ctx: &Ctx, path: &Path) -> Result<Report, CliError> {
    let set = ctx.load(path)?;
    let rep = verify_set(&set, ctx.tol);
    let mut r = Report::new(rep.pass)
        .line(format!("{} bases on {}", set.len(), set.signature()))
        .line(format!(
            "max orthonormality deviation {:e}",
            rep.max_orthonormality_deviation
        ))
        .line(format!("max MU deviation {:e}", rep.max_mu_deviation));
    if let Some((a, b, (i, j))) = rep.worst_pair {
        r = r.line(format!(
            "worst pair: {} vector {i} vs {} vector {j}",
            set.names()[a],
            set.names()[b]
        ));
    }
    Ok(r.field("report", rep))
}

fn classify_cmd(ctx: &Ctx, path: &Path) -> Result<Report, CliError> {
    let set = ctx.load(path)?;
    let mut r = Report::new(true);
    let mut classes = Vec::new();
    for (name, b) in set.names().iter().zip(set.bases()) {
        let c = classify(b, ctx.tol);
        r = r.line(format!(
            "{name}: {:?}, factor bases per subsystem {:?}, distinct factor rays {:?}",
            c.kind, c.per_subsystem_basis_count, c.per_subsystem_ray_count
        ));
        classes.push(json!({ "name": name, "class": c }));
    }
    Ok(r.field("classes", classes))
}

fn extract(
    ctx: &Ctx,
    path: &Path,
    basis: usize,
    r: usize,
    kappa: Option<usize>,
) -> Result<Report, CliError> {
    let set = ctx.load(path)?;
    let b = set.bases().get(basis).ok_or_else(|| {
        CliError::Usage(format!("basis {basis} out of range ({} bases)", set.len()))
    })?;
    let anchors: Vec<usize> = match kappa {
        Some(k) => vec![k],
        None => (0..b.len()).collect(),
    };
    let mut rep = Report::new(true);
    let mut subsets = Vec::new();
    for k in anchors {
        match extract_ortho_subset(b, r, k, ctx.tol) {
            Ok(s) => {
                rep = rep.line(format!("anchor {k}: {:?}", s.indices));
                subsets.push(json!({ "kappa": k, "indices": s.indices }));
            }
            Err(e @ mub_product::Error::StructuralViolation(_)) => {
                rep.pass = false;
                rep = rep.line(format!("anchor {k}: {e}"));
                subsets.push(json!({ "kappa": k, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rep
        .field("basis", basis)
        .field("subsystem", r)
        .field("subsets", subsets))
}

fn group(ctx: &Ctx, path: &Path, artifact_dir: Option<&Path>) -> Result<Report, CliError> {
    let set = ctx.load(path)?;
    let mut rep = Report::new(true);
    let mut results = Vec::new();
    for (name, b) in set.names().iter().zip(set.bases()) {
        let g = factor_grouping(b, ctx.tol);
        let mut entry = json!({ "name": name, "result": g });
        if let Some(cx) = grouping_counterexample(b, &g, ctx.tol) {
            rep.pass = false;
            rep = rep.line(format!(
                "{name}: grouping failed (first factors {}, second factors {})",
                if cx.first_failed { "failed" } else { "ok" },
                if cx.second_failed { "failed" } else { "ok" }
            ));
            if let Some(dir) = artifact_dir {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
                let file = dir.join(format!("grouping-counterexample-{name}.json"));
                std::fs::write(
                    &file,
                    serde_json::to_string_pretty(&cx).expect("serializable"),
                )
                .map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
                entry["artifact"] = json!(file.display().to_string());
                rep = rep.line(format!("  counterexample written to {}", file.display()));
            }
        } else {
            rep = rep.line(format!(
                "{name}: first factors {:?}; second factors {:?}",
                g.first.as_ref().unwrap(),
                g.second.as_ref().unwrap()
            ));
        }
        results.push(entry);
    }
    Ok(rep.field("groupings", results))
}

fn equiv(ctx: &Ctx, a: &Path, b: &Path, budget: usize) -> Result<Report, CliError> {
    let (sa, sb) = (ctx.load(a)?, ctx.load(b)?);
    let verdict = equivalent(&sa, &sb, budget)?;
    let (pass, line) = match &verdict {
        Verdict::Equivalent { witness } => (
            true,
            format!("Equivalent, witness of {} moves", witness.len()),
        ),
        Verdict::Inequivalent { separation } => (
            false,
            format!(
                "Inequivalent: {} differs ({})",
                separation.component, separation.detail
            ),
        ),
        Verdict::Unknown {
            candidates,
            exhausted,
        } => (
            false,
            format!(
                "Unknown after {candidates} candidates{}",
                if *exhausted {
                    ", search space exhausted"
                } else {
                    ""
                }
            ),
        ),
    };
    Ok(Report::new(pass)
        .line(line)
        .field("budget", budget)
        .field("verdict", verdict))
}

fn entangle(ctx: &Ctx, path: &Path, out: Option<&Path>) -> Result<Report, CliError> {
    let set = ctx.load(path)?;
    let found = find_mu_vectors(&set, ctx.restarts, ctx.seed, ctx.tol)?;
    let mut rep = Report::new(true).line(format!(
        "{} vectors unbiased to all {} bases over {} restarts; best objective {:e}",
        found.vectors.len(),
        set.len(),
        found.restarts,
        found.best_objective
    ));
    let mut audits = Vec::new();
    for (k, v) in found.vectors.iter().enumerate() {
        for a in audit_mu_vector(v, &set, ctx.tol)? {
            if a.hypothesis_holds && !a.maximally_entangled {
                rep.pass = false;
            }
            rep = rep.line(format!(
                "vector {k}, subsystem {}: |rho - I/d| = {:e}, maximally entangled: {}, complete factor set present: {}",
                a.subsystem, a.mixedness_deviation, a.maximally_entangled, a.hypothesis_holds
            ));
            audits.push(a);
        }
    }
    if let Some(out) = out {
        let coords: Vec<Vec<[f64; 2]>> = found
            .vectors
            .iter()
            .map(|v| v.coords().iter().map(|c| [c.re, c.im]).collect())
            .collect();
        std::fs::write(
            out,
            serde_json::to_string_pretty(&coords).expect("serializable"),
        )
        .map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    }
    Ok(rep
        .field("vectors_found", found.vectors.len())
        .field("best_objective", found.best_objective)
        .field("median_objective", found.median_objective)
        .field("worst_objective", found.worst_objective)
        .field("audits", audits))
}

#[allow(clippy::too_many_arguments)]
fn search(
    ctx: &Ctx,
    file: Option<&Path>,
    signature: Option<&SignatureArg>,
    size: Option<usize>,
    probe_bound: bool,
    wall_clock: Option<f64>,
    out: Option<&Path>,
    artifact_dir: Option<&Path>,
) -> Result<Report, CliError> {
    let budget = SearchBudget {
        restarts: ctx.restarts,
        wall_clock: wall_clock.map(Duration::from_secs_f64),
        ..SearchBudget::default()
    };
    let report: SearchReport = match (file, signature, probe_bound) {
        (Some(f), None, false) => extend_set(&ctx.load(f)?, &budget, ctx.seed, ctx.tol)?,
        (None, Some(s), true) => bound_probe(&sig(s)?, &budget, ctx.seed, ctx.tol)?,
        (None, Some(s), false) => {
            let n = size.ok_or_else(|| CliError::Usage("--size is required with --signature".into()))?;
            find_mu_product_set(&sig(s)?, n, &budget, ctx.seed, ctx.tol)?
        }
        _ => {
            return Err(CliError::Usage(
                "give either FILE (extend), --signature with --size (find) or --signature with --probe-bound (probe)".into(),
            ))
        }
    };
    let mut rep = Report::new(if probe_bound {
        !report.bound_violation
    } else {
        !report.found.is_empty()
    })
    .line(format!(
        "target {:?}: {} bases on {}",
        report.target, report.set_size, report.signature
    ))
    .line(format!(
        "{} of {} restarts, best objective {:e}, {} sets found{}",
        report.restarts_completed,
        report.restarts,
        report.best_objective,
        report.found.len(),
        if report.bounded_away() {
            " (bounded away from zero)"
        } else {
            ""
        }
    ));
    if probe_bound && report.bound_violation {
        rep = rep.line("bound violated: more MU product bases than the bound");
        if let Some(dir) = artifact_dir {
            if let Ok(Some(p)) = persist_violation(&report, dir) {
                rep = rep.line(format!("report written to {}", p.display()));
            }
        }
    }
    if let (Some(out), Some(first)) = (out, report.found.first()) {
        ctx.save(first, out)?;
        rep = rep.line(format!("first set written to {}", out.display()));
    }
    Ok(rep.field("search", report))
}

fn bound(arg: &SignatureArg) -> Result<Report, CliError> {
    let b = mu_product_bound(&sig(arg)?);
    Ok(Report::new(true)
        .line(format!("{} {:?}", b.bound, b.status))
        .line(format!("limiting subsystem {}", b.limiting_subsystem))
        .field("bound", b))
}

fn run(cli: &Cli) -> Result<Option<Report>, CliError> {
    let ctx = Ctx {
        tol: cli.tol,
        seed: cli.seed,
        restarts: cli.restarts,
        normalize: cli.normalize,
    };
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(CliError::Usage(format!(
            "--tol must be positive, got {}",
            cli.tol
        )));
    }
    Ok(Some(match &cli.command {
        Command::Construct { family, n, out } => {
            return construct(&ctx, *family, *n, out.as_deref())
        }
        Command::Verify { file } => verify(&ctx, file)?,
        Command::Classify { file } => classify_cmd(&ctx, file)?,
        Command::ExtractOrtho {
            file,
            basis,
            subsystem,
            kappa,
        } => extract(&ctx, file, *basis, *subsystem, *kappa)?,
        Command::Group { file, artifact_dir } => group(&ctx, file, artifact_dir.as_deref())?,
        Command::Equiv {
            first,
            second,
            budget,
        } => equiv(&ctx, first, second, *budget)?,
        Command::Entangle { file, out } => entangle(&ctx, file, out.as_deref())?,
        Command::Search {
            file,
            signature,
            size,
            probe_bound,
            wall_clock,
            out,
            artifact_dir,
        } => search(
            &ctx,
            file.as_deref(),
            signature.as_ref(),
            *size,
            *probe_bound,
            *wall_clock,
            out.as_deref(),
            artifact_dir.as_deref(),
        )?,
        Command::Bound { signature } => bound(signature)?,
    }))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Construct { .. } => "construct",
        Command::Verify { .. } => "verify",
        Command::Classify { .. } => "classify",
        Command::ExtractOrtho { .. } => "extract-ortho",
        Command::Group { .. } => "group",
        Command::Equiv { .. } => "equiv",
        Command::Entangle { .. } => "entangle",
        Command::Search { .. } => "search",
        Command::Bound { .. } => "bound",
    }
}

fn emit(cli: &Cli, report: Report) {
    let name = command_name(&cli.command);
    let status = if report.pass { "pass" } else { "fail" };
    match cli.format {
        Format::Text => {
            println!(
                "mubp {VERSION} {name}: tol {:e}, seed {}",
                cli.tol, cli.seed
            );
            for l in &report.lines {
                println!("{l}");
            }
            println!("{status}");
        }
        Format::Structured => {
            let mut m = Map::new();
            m.insert("command".into(), json!(name));
            m.insert("tool_version".into(), json!(VERSION));
            m.insert("tol".into(), json!(cli.tol));
            m.insert("seed".into(), json!(cli.seed));
            m.insert("restarts".into(), json!(cli.restarts));
            m.insert("status".into(), json!(status));
            m.extend(report.fields);
            println!(
                "{}",
                serde_json::to_string_pretty(&Value::Object(m)).expect("serializable")
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            let pass = report.pass;
            emit(&cli, report);
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
