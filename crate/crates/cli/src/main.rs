//! Command line front end: formula generation, refutation, checking,
//! branching-program analysis and the Monte-Carlo experiments.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use reslin::experiments::{self, Csv, ExperimentError};
use reslin::formulas::{random_obfuscation, pyramid, stone_formula, CnfFormula, FormulaError, LiftedFormula, Metadata};
use reslin::gadgets::{Gadget, GadgetError};
use reslin::lbp::{proof_to_lbp_blocks, LbpError};
use reslin::proofs::{
    derive_semantic, refute_lifted_into, refute_stone, write_step, AxiomSource, CheckError, Checker, Mode, ProofError,
    ProofSink, ProofStep, ProofTrace, SemanticError, TraceError, MAX_SEMANTIC_VARS,
};

/// Lifted formulas with more clauses than this are not written as DIMACS.
const DIMACS_CLAUSE_LIMIT: u64 = 1 << 26;

#[derive(Debug, Error)]
enum CliError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", .path.display())]
    Formula { path: PathBuf, source: FormulaError },
    #[error("{}: {source}", .path.display())]
    Trace { path: PathBuf, source: TraceError },
    #[error(transparent)]
    Generate(#[from] FormulaError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Lbp(#[from] LbpError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "reslin", version, about = "Stone formulas, lifted refutations and their verification")]
struct Cli {
    /// Worker threads for Monte-Carlo trials.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a stone formula as DIMACS plus a metadata sidecar.
    Gen(GenArgs),
    /// Refute a generated formula; small formulas of any origin get a tree-like ResLin proof.
    Prove(ProveArgs),
    /// Verify an RLIN trace; exit 1 with the failing step on rejection.
    Check(CheckArgs),
    /// Convert a trace to a branching program and report its regularity.
    Lbp(LbpArgs),
    /// Run an experiment and print CSV.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Stone formula over a pyramid.
    #[arg(long, required = true)]
    stone: bool,
    /// Pyramid levels.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gadget to lift with: xor<b>, and<b>, ip<b>, id.
    #[arg(long)]
    lift: Option<String>,
    /// Output prefix; writes PREFIX.cnf and PREFIX.meta. DIMACS goes to stdout otherwise.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProveArgs {
    /// DIMACS file, or a .meta file describing a generated formula.
    formula: PathBuf,
    /// RLIN output; stdout otherwise.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// DIMACS file, or a .meta file describing a generated formula.
    formula: PathBuf,
    proof: PathBuf,
    #[arg(long, default_value_t = Mode::ResLin)]
    mode: Mode,
    /// Accept traces that stop short of the empty clause.
    #[arg(long)]
    allow_partial: bool,
}

#[derive(Args, Debug)]
struct LbpArgs {
    formula: PathBuf,
    proof: PathBuf,
    /// Also write the program in dump format.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ExperimentCmd {
    /// Sanity of the hard distribution on several pyramid sizes.
    Mu {
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 4, 5])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Conditioned random walk against the 1/(c₂t) bound.
    Walk {
        #[arg(long, default_value_t = 400)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        t: usize,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Error of colour-querying decision trees on the hard distribution.
    Dt {
        #[arg(long, default_value_t = 25)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        height: usize,
        #[arg(long, default_value_t = 20)]
        trees: usize,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Probability that a lifted sample lands in a random rank-r system.
    RankFooling {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        b: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fraction of foolable nodes along traces of a lifted refutation.
    Foolability {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value = "xor2")]
        gadget: String,
        #[arg(long, default_value_t = 8)]
        t_max: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Prove(a) => prove(a),
        Command::Check(a) => check(a),
        Command::Lbp(a) => lbp(a),
        Command::Experiment(e) => experiment(e, cli.jobs),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    if a.n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    let dag = pyramid(a.n)?;
    let rho = random_obfuscation(dag.len(), a.seed);
    let mut f = stone_formula(&dag, &rho)?;
    let mut meta = f.metadata.take().expect("stone formulas carry metadata");
    meta.seed = Some(a.seed);
    let gadget = a.lift.as_deref().map(Gadget::named).transpose()?;
    if let Some(g) = &gadget {
        meta.kind = "lifted".into();
        meta.gadget_arity = Some(g.arity());
        meta.gadget_table = Some(g.table_string());
    }
    let write_cnf = |w: &mut dyn Write| -> io::Result<()> {
        match &gadget {
            Some(g) => LiftedFormula::new(&f, g).expect("gadget checked").write_dimacs(w),
            None => f.write_dimacs(w),
        }
    };
    if let Some(prefix) = &a.output {
        let meta_path = prefix.with_extension("meta");
        fs::write(&meta_path, meta.to_toml()).map_err(CliError::io(&meta_path))?;
    }
    if let Some(g) = &gadget {
        let clauses = LiftedFormula::new(&f, g)?.num_clauses();
        if clauses > DIMACS_CLAUSE_LIMIT {
            return Err(CliError::Unsupported(format!(
                "lifted formula has {clauses} clauses, more than {DIMACS_CLAUSE_LIMIT}; DIMACS not written, prove and check accept the .meta file"
            )));
        }
    }
    match &a.output {
        Some(prefix) => {
            let cnf_path = prefix.with_extension("cnf");
            let mut w = create(&cnf_path)?;
            write_cnf(&mut w).and_then(|_| w.flush()).map_err(CliError::io(&cnf_path))
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            write_cnf(&mut w).and_then(|_| w.flush()).map_err(CliError::io(Path::new("<stdout>")))
        }
    }
}

/// A formula read from disk: plain clauses, or a stone formula regenerated
/// from its metadata and possibly lifted.
struct Loaded {
    formula: CnfFormula,
    meta: Option<Metadata>,
    gadget: Option<Gadget>,
    /// The file held the lifted clauses themselves.
    materialized: bool,
}

impl Loaded {
    fn read(path: &Path) -> Result<Loaded, CliError> {
        let ferr = |source| CliError::Formula {
            path: path.to_path_buf(),
            source,
        };
        if path.extension().is_some_and(|e| e == "meta") {
            let text = fs::read_to_string(path).map_err(CliError::io(path))?;
            let meta = Metadata::from_toml(&text).map_err(ferr)?;
            let formula = meta.stone_formula().map_err(ferr)?;
            let gadget = meta.gadget().map_err(ferr)?;
            return Ok(Loaded {
                formula,
                meta: Some(meta),
                gadget,
                materialized: false,
            });
        }
        let file = File::open(path).map_err(CliError::io(path))?;
        let mut formula = CnfFormula::parse_dimacs(BufReader::new(file)).map_err(ferr)?;
        let sidecar = path.with_extension("meta");
        let meta = match fs::read_to_string(&sidecar) {
            Ok(text) => Some(Metadata::from_toml(&text).map_err(|source| CliError::Formula { path: sidecar, source })?),
            Err(_) => None,
        };
        if let Some(m) = &meta {
            formula = formula.with_metadata(m.clone()).map_err(ferr)?;
        }
        let gadget = meta.as_ref().map(|m| m.gadget()).transpose().map_err(ferr)?.flatten();
        Ok(Loaded {
            formula,
            meta,
            gadget,
            materialized: true,
        })
    }

    /// Runs `f` with the clauses the proof refers to.
    fn with_axioms<T>(&self, f: impl FnOnce(&dyn AxiomSource, usize) -> Result<T, CliError>) -> Result<T, CliError> {
        match (&self.gadget, self.materialized) {
            (Some(g), false) => f(&LiftedFormula::new(&self.formula, g)?, g.arity()),
            (Some(g), true) => f(&self.formula, g.arity()),
            (None, _) => f(&self.formula, 1),
        }
    }
}

/// Writes steps as they are generated; the header needs the final count,
/// so the body is spooled first.
struct RlinSpool<W: Write> {
    body: W,
    count: usize,
}

impl<W: Write> ProofSink for RlinSpool<W> {
    fn push_step(&mut self, step: ProofStep) -> Result<usize, CheckError> {
        // I/O errors surface when the spool is flushed
        let _ = write_step(&mut self.body, &step);
        self.count += 1;
        Ok(self.count - 1)
    }
}

fn prove(a: ProveArgs) -> Result<(), CliError> {
    let loaded = Loaded::read(&a.formula)?;
    let stone = loaded.meta.as_ref().filter(|m| m.kind == "stone" || m.kind == "lifted");
    let Some(meta) = stone else {
        let f = &loaded.formula;
        if f.nvars > MAX_SEMANTIC_VARS {
            return Err(CliError::Unsupported(format!(
                "no generator metadata and {} variables; only formulas with at most {MAX_SEMANTIC_VARS} variables are refuted by search",
                f.nvars
            )));
        }
        let p = derive_semantic(&f.clauses, &[])?;
        let p = ProofTrace { nvars: f.nvars, ..p };
        return emit(&a.output, |w| p.write_rlin(w));
    };
    let dag = meta.dag()?;
    let rho = meta.rho()?;
    let base_proof = refute_stone(&dag, &rho)?;
    let Some(g) = &loaded.gadget else {
        return emit(&a.output, |w| base_proof.write_rlin(w));
    };
    let base = meta.stone_formula()?;
    let nvars = base.nvars * g.arity();
    match &a.output {
        Some(path) => {
            let spool_path = path.with_extension("rlin.body");
            let mut spool = RlinSpool {
                body: create(&spool_path)?,
                count: 0,
            };
            refute_lifted_into(&base, &base_proof, g, &mut spool)?;
            spool.body.flush().map_err(CliError::io(&spool_path))?;
            drop(spool.body);
            let count = spool.count;
            let mut w = create(path)?;
            let mut body = File::open(&spool_path).map_err(CliError::io(&spool_path))?;
            writeln!(w, "p rlin {nvars} {count}")
                .and_then(|_| io::copy(&mut body, &mut w))
                .and_then(|_| w.flush())
                .map_err(CliError::io(path))?;
            fs::remove_file(&spool_path).map_err(CliError::io(&spool_path))
        }
        None => {
            let mut spool = RlinSpool {
                body: Vec::new(),
                count: 0,
            };
            refute_lifted_into(&base, &base_proof, g, &mut spool)?;
            let mut out = io::stdout().lock();
            writeln!(out, "p rlin {nvars} {}", spool.count)
                .and_then(|_| out.write_all(&spool.body))
                .map_err(CliError::io(Path::new("<stdout>")))
        }
    }
}

fn emit(output: &Option<PathBuf>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    match output {
        Some(path) => {
            let mut w = create(path)?;
            f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(Path::new("<stdout>")))
        }
    }
}

fn read_trace(path: &Path) -> Result<ProofTrace, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    ProofTrace::parse_rlin(BufReader::new(file)).map_err(|source| CliError::Trace {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a trace through the checker, releasing clauses after their last use.
fn check_trace(f: &dyn AxiomSource, path: &Path, mode: Mode) -> Result<(usize, usize, bool), CliError> {
    let trace = read_trace(path)?;
    if trace.nvars != f.nvars() {
        return Err(CliError::Rejected(format!(
            "trace is over {} variables, formula has {}",
            trace.nvars,
            f.nvars()
        )));
    }
    let last = trace.last_uses();
    let mut releases: Vec<Vec<usize>> = vec![Vec::new(); trace.len()];
    for (s, l) in last.iter().enumerate() {
        if let Some(l) = l {
            releases[*l].push(s);
        }
    }
    let mut c = Checker::new(f, mode);
    for (i, s) in trace.steps.iter().enumerate() {
        c.push(s).map_err(|e| CliError::Rejected(e.to_string()))?;
        for &r in &releases[i] {
            c.release(r);
        }
    }
    let stats = c.stats();
    Ok((stats.length, stats.width, stats.refutation))
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    let loaded = Loaded::read(&a.formula)?;
    let (length, width, refutation) = loaded.with_axioms(|f, _| check_trace(f, &a.proof, a.mode))?;
    if !refutation && !a.allow_partial {
        return Err(CliError::Rejected(format!("step {length}: the last step is not the empty clause")));
    }
    println!("accepted: mode {} length {length} width {width} refutation {refutation}", a.mode);
    Ok(())
}

fn lbp(a: LbpArgs) -> Result<(), CliError> {
    let loaded = Loaded::read(&a.formula)?;
    let trace = read_trace(&a.proof)?;
    let program = loaded.with_axioms(|f, b| Ok(proof_to_lbp_blocks(f, &trace, b)?))?;
    let r = program.regularity();
    let depth = program.query_depths().into_iter().flatten().max().unwrap_or(0);
    println!("nodes {}", program.len());
    println!("variables {}", program.nvars);
    println!("max_query_depth {depth}");
    print!("{}", r.report());
    if let Some(path) = &a.dump {
        let mut w = create(path)?;
        w.write_all(program.to_dump().as_bytes())
            .and_then(|_| w.flush())
            .map_err(CliError::io(path))?;
    }
    Ok(())
}

fn experiment(e: ExperimentCmd, jobs: usize) -> Result<(), CliError> {
    let csv: Csv = match e {
        ExperimentCmd::Mu { n, samples, seed } => experiments::experiment_mu(&n, samples, seed, jobs)?,
        ExperimentCmd::Walk { k, t, c2, samples, seed } => {
            if c2 <= 0.0 {
                return Err(CliError::Usage("--c2 must be positive".into()));
            }
            experiments::experiment_walk(k, t, c2, samples, seed, jobs)?
        }
        ExperimentCmd::Dt {
            n,
            height,
            trees,
            trials,
            seed,
        } => experiments::experiment_dt(n, height, trees, trials, seed, jobs)?,
        ExperimentCmd::RankFooling { r, b, samples, seed } => {
            if r == 0 || b == 0 || b % 2 == 1 {
                return Err(CliError::Usage("--r must be positive and --b even and positive".into()));
            }
            experiments::experiment_rank_fooling(r, b, samples, seed, jobs)?
        }
        ExperimentCmd::Foolability {
            n,
            gadget,
            t_max,
            trials,
            seed,
        } => experiments::experiment_foolability(n, &gadget, t_max, trials, seed, jobs)?,
    };
    let mut out = io::stdout().lock();
    write!(out, "{csv}").map_err(CliError::io(Path::new("<stdout>")))
}
