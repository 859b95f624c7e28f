//! `nullcqa`: integrity checking, repairs and consistent query answering for
//! databases with null values.

mod text;

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nullcqa_core::asp::{self, EngineError, GroundOptions, SolveOptions};
use nullcqa_core::compiler::{
    compile, extract_database, CompileError, CompileOptions, PredicateNames, ProgramRepairError,
};
use nullcqa_core::constraints::{
    bilateral_predicates, contracted_graph, dependency_graph, hcf_sufficient, is_ric_acyclic,
    non_conflicting, parse_constraints, ConstraintSet,
};
use nullcqa_core::cqa::{consistent_answers, consistent_answers_via_program, parse_query, CqaError};
use nullcqa_core::lexer::ParseError;
use nullcqa_core::relational::{parse_instance, EvalError, Instance, Schema};
use nullcqa_core::repair::{repairs, RepairError, RepairOptions, DEFAULT_MAX_CANDIDATES};
use nullcqa_core::satisfaction::{is_consistent, satisfies_all};
use serde_json::{json, Value as Json};

#[derive(Parser)]
#[command(name = "nullcqa", version, about = "Null-aware integrity constraints, repairs and consistent query answers")]
struct Cli {
    #[command(flatten)]
    inputs: Inputs,
    /// Human-readable tables instead of JSON.
    #[arg(long, global = true)]
    text: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Schema file: `R/2: A, B.` per predicate.
    #[arg(long, global = true, value_name = "FILE")]
    schema: Option<PathBuf>,
    /// Constraint file.
    #[arg(long, global = true, value_name = "FILE")]
    constraints: Option<PathBuf>,
    /// Facts file.
    #[arg(long, global = true, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Bound on candidate atoms during repair enumeration.
    #[arg(long, global = true, env = "NULLCQA_MAX_CANDIDATES", default_value_t = DEFAULT_MAX_CANDIDATES,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    max_candidates: usize,
    /// Bound on ground atoms when solving programs.
    #[arg(long, global = true, default_value_t = GroundOptions::default().max_atoms,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    max_ground_atoms: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check the data against the constraints.
    Check,
    /// Dependency graph, RIC-acyclicity and related analyses of the constraints.
    Graph {
        /// Merge the components of the universal constraints.
        #[arg(long)]
        contracted: bool,
        /// Emit Graphviz DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Enumerate the repairs of the data.
    Repairs,
    /// Compile the repair program.
    Compile {
        /// Compile even when the referential constraints are cyclic.
        #[arg(long)]
        allow_cyclic: bool,
        /// Precede each group of rules with a comment naming its origin.
        #[arg(long)]
        annotate_provenance: bool,
        /// Write the program text to FILE.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Compute stable models of a program (the compiled repair program by default).
    Solve {
        /// Program file; without it the repair program of the inputs is solved.
        #[arg(long, value_name = "FILE")]
        program: Option<PathBuf>,
        /// Solve the shifted, disjunction-free program (head-cycle-free programs only).
        #[arg(long)]
        shifted: bool,
        /// Report the databases encoded by the models instead of the models.
        #[arg(long)]
        extract: bool,
        #[arg(long)]
        allow_cyclic: bool,
    },
    /// Consistent answers to a query.
    Cqa {
        /// Query, e.g. `ans(X) <- R(X,Y), not S(Y,X).`
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value_t = Route::Enum)]
        route: Route,
        /// Drop answer tuples that contain null.
        #[arg(long)]
        no_nulls: bool,
        #[arg(long)]
        allow_cyclic: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    /// Intersect the answers over the enumerated repairs.
    Enum,
    /// Cautious reasoning over the repair program.
    Program,
    /// Both, reporting whether they agree.
    Both,
}

/// A failed run: exit code, error kind and message, reported as JSON on stderr.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    detail: Json,
}

impl Failure {
    fn new(code: u8, kind: &'static str, message: impl Display) -> Self {
        Failure {
            code,
            kind,
            message: message.to_string(),
            detail: Json::Null,
        }
    }

    fn usage(message: impl Display) -> Self {
        Failure::new(2, "usage", message)
    }

    fn parse(file: &Path, e: &ParseError) -> Self {
        let span = e.span();
        Failure {
            detail: json!({ "file": file.display().to_string(), "line": span.line, "column": span.column }),
            ..Failure::new(2, "parse", format!("{}: {e}", file.display()))
        }
    }
}

impl From<RepairError> for Failure {
    fn from(e: RepairError) -> Self {
        match &e {
            RepairError::ConflictingIcSet(_) => Failure::new(3, "conflicting", e),
            RepairError::CandidateSpaceTooLarge { .. } => Failure::new(3, "cap_exceeded", e),
            RepairError::Eval(inner) => inner.clone().into(),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::new(2, "evaluation", e)
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        let kind = match &e {
            CompileError::ConflictingIcSet(_) => "conflicting",
            CompileError::CyclicRicSet { .. } => "cyclic",
            CompileError::UnsupportedConstraintForm { .. } => "unsupported",
            CompileError::PredicateNameClash { .. } | CompileError::InvalidPredicateName(_) => "naming",
        };
        Failure::new(3, kind, e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match &e {
            EngineError::GroundingTooLarge { .. } | EngineError::SearchLimit { .. } => Failure::new(3, "cap_exceeded", e),
            EngineError::NotHcf { .. } => Failure::new(3, "not_hcf", e),
            EngineError::UnsafeRule { .. } | EngineError::ConstantOutsideUniverse(_) => Failure::new(2, "program", e),
            EngineError::MixedComparison { .. } => Failure::new(2, "evaluation", e),
        }
    }
}

impl From<ProgramRepairError> for Failure {
    fn from(e: ProgramRepairError) -> Self {
        match e {
            ProgramRepairError::Compile(e) => e.into(),
            ProgramRepairError::Engine(e) => e.into(),
        }
    }
}

impl From<CqaError> for Failure {
    fn from(e: CqaError) -> Self {
        match e {
            CqaError::Repair(e) => e.into(),
            CqaError::Program(e) => e.into(),
            CqaError::Eval(e) => e.into(),
            CqaError::Engine(e) => e.into(),
        }
    }
}

/// What a successful run prints, and its exit code (0 or 1).
struct Outcome {
    code: u8,
    json: Json,
    text: String,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        detail: json!({ "file": path.display().to_string() }),
        ..Failure::new(2, "io", format!("{}: {e}", path.display()))
    })
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    path.as_deref().ok_or_else(|| Failure::usage(format!("--{flag} is required for this command")))
}

impl Inputs {
    fn schema(&self) -> Result<Schema, Failure> {
        let path = required(&self.schema, "schema")?;
        Schema::parse(&read(path)?).map_err(|e| Failure::parse(path, &e))
    }

    fn constraints(&self, schema: &Schema) -> Result<ConstraintSet, Failure> {
        let path = required(&self.constraints, "constraints")?;
        parse_constraints(&read(path)?, schema).map_err(|e| Failure::parse(path, &e))
    }

    fn data(&self, schema: &Schema) -> Result<Instance, Failure> {
        let path = required(&self.data, "data")?;
        parse_instance(&read(path)?, schema).map_err(|e| Failure::parse(path, &e))
    }

    fn all(&self) -> Result<(Schema, ConstraintSet, Instance), Failure> {
        let schema = self.schema()?;
        let ic = self.constraints(&schema)?;
        let d = self.data(&schema)?;
        Ok((schema, ic, d))
    }

    fn repair_options(&self) -> RepairOptions {
        RepairOptions {
            max_candidates: self.max_candidates,
        }
    }
}

fn verdict(ok: bool) -> u8 {
    if ok {
        0
    } else {
        1
    }
}

fn check(inputs: &Inputs) -> Result<Outcome, Failure> {
    let (_, ic, d) = inputs.all()?;
    let report = satisfies_all(&d, &ic)?;
    Ok(Outcome {
        code: verdict(report.consistent),
        text: text::check(&report),
        json: json!({
            "consistent": report.consistent,
            "constraints": report.constraints,
            "non_conflicting": non_conflicting(&ic),
        }),
    })
}

fn graph(inputs: &Inputs, contracted: bool, dot: bool) -> Result<Outcome, Failure> {
    let schema = inputs.schema()?;
    let ic = inputs.constraints(&schema)?;
    let g = if contracted { contracted_graph(&ic) } else { dependency_graph(&ic) };
    let acyclic = is_ric_acyclic(&ic);
    let text = if dot { g.to_dot() } else { text::graph(&g, &acyclic) };
    Ok(Outcome {
        code: 0,
        json: if dot {
            Json::String(g.to_dot())
        } else {
            json!({
                "contracted": contracted,
                "graph": g,
                "ric_acyclic": acyclic,
                "non_conflicting": non_conflicting(&ic),
                "bilateral": bilateral_predicates(&ic),
                "hcf_sufficient": hcf_sufficient(&ic),
            })
        },
        text,
    })
}

fn repair_cmd(inputs: &Inputs) -> Result<Outcome, Failure> {
    let (schema, ic, d) = inputs.all()?;
    let consistent = is_consistent(&d, &ic)?;
    let reps = repairs(&d, &ic, &inputs.repair_options())?;
    Ok(Outcome {
        code: verdict(consistent),
        text: text::repairs(&schema, &reps),
        json: json!({
            "consistent": consistent,
            "count": reps.len(),
            "candidate_atoms": reps.candidate_atoms,
            "repairs": reps.repairs,
        }),
    })
}

fn compile_cmd(inputs: &Inputs, allow_cyclic: bool, annotate: bool, output: Option<&Path>) -> Result<Outcome, Failure> {
    let (schema, ic, d) = inputs.all()?;
    let p = compile(&schema, &d, &ic, &CompileOptions { allow_cyclic })?;
    let program = p.emit_text(annotate);
    if let Some(path) = output {
        std::fs::write(path, &program)
            .map_err(|e| Failure::new(2, "io", format!("{}: {e}", path.display())))?;
    }
    let mut text = if output.is_some() { String::new() } else { program.clone() };
    for w in &p.warnings {
        text.push_str(&format!("% warning: {w}\n"));
    }
    Ok(Outcome {
        code: 0,
        text,
        json: json!({
            "program": program,
            "facts": p.facts().count(),
            "rules": p.rules().count(),
            "denials": p.denials().count(),
            "hcf_sufficient": hcf_sufficient(&ic),
            "warnings": p.warnings,
        }),
    })
}

fn solve_cmd(inputs: &Inputs, program: Option<&Path>, shifted: bool, extract: bool, allow_cyclic: bool) -> Result<Outcome, Failure> {
    let (parsed, mut ground_opts, names) = match program {
        Some(path) => {
            let parsed = asp::parse_program(&read(path)?).map_err(|e| Failure::parse(path, &e))?;
            let names = if extract {
                Some(PredicateNames::from_schema(&inputs.schema()?)?)
            } else {
                None
            };
            (parsed, GroundOptions::default(), names)
        }
        None => {
            let (schema, ic, d) = inputs.all()?;
            let p = compile(&schema, &d, &ic, &CompileOptions { allow_cyclic })?;
            let opts = p.ground_options();
            (p.program, opts, Some(p.names))
        }
    };
    ground_opts.max_atoms = inputs.max_ground_atoms;
    let g = asp::ground(&parsed, &ground_opts)?;
    let hcf = asp::is_hcf(&g);
    let models = if shifted {
        asp::stable_models(&asp::shift(&g)?, &SolveOptions::default())?
    } else {
        asp::stable_models(&g, &SolveOptions::default())?
    };
    let rendered: Vec<Vec<String>> = models.iter().map(|m| m.iter().map(|a| a.to_string()).collect()).collect();
    let mut json = json!({ "hcf": hcf, "count": models.len(), "models": rendered });
    let text = match (&names, extract) {
        (Some(names), true) => {
            let dbs: std::collections::BTreeSet<Instance> = models.iter().map(|m| extract_database(m, names)).collect();
            let t = text::databases(&dbs);
            json = json!({ "hcf": hcf, "count": dbs.len(), "databases": dbs });
            t
        }
        _ => text::models(&rendered),
    };
    Ok(Outcome { code: 0, json, text })
}

fn cqa_cmd(inputs: &Inputs, query: &str, route: Route, no_nulls: bool, allow_cyclic: bool) -> Result<Outcome, Failure> {
    let (schema, ic, d) = inputs.all()?;
    let q = parse_query(query, &schema).map_err(|e| Failure {
        detail: json!({ "line": e.span().line, "column": e.span().column }),
        ..Failure::new(2, "parse", format!("query: {e}"))
    })?;
    let finish = |a: nullcqa_core::cqa::AnswerSet| if no_nulls { a.without_nulls() } else { a };
    let enumerated = match route {
        Route::Enum | Route::Both => Some(finish(consistent_answers(&d, &ic, &q, &inputs.repair_options())?)),
        Route::Program => None,
    };
    let programmed = match route {
        Route::Program | Route::Both => Some(finish(consistent_answers_via_program(
            &schema,
            &d,
            &ic,
            &q,
            &CompileOptions { allow_cyclic },
        )?)),
        Route::Enum => None,
    };
    Ok(match (enumerated, programmed) {
        (Some(a), Some(b)) => {
            let agree = a == b;
            let mut text = a.render();
            if !agree {
                text = format!("enumeration:\n{}program:\n{}routes disagree\n", a.render(), b.render());
            }
            Outcome {
                code: verdict(agree),
                text,
                json: json!({ "query": q.to_string(), "agree": agree, "enumeration": a, "program": b }),
            }
        }
        (Some(a), None) | (None, Some(a)) => Outcome {
            code: 0,
            text: a.render(),
            json: json!({ "query": q.to_string(), "answers": a }),
        },
        (None, None) => unreachable!("every route evaluates something"),
    })
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let inputs = &cli.inputs;
    match &cli.command {
        Command::Check => check(inputs),
        Command::Graph { contracted, dot } => graph(inputs, *contracted, *dot),
        Command::Repairs => repair_cmd(inputs),
        Command::Compile {
            allow_cyclic,
            annotate_provenance,
            output,
        } => compile_cmd(inputs, *allow_cyclic, *annotate_provenance, output.as_deref()),
        Command::Solve {
            program,
            shifted,
            extract,
            allow_cyclic,
        } => solve_cmd(inputs, program.as_deref(), *shifted, *extract, *allow_cyclic),
        Command::Cqa {
            query,
            route,
            no_nulls,
            allow_cyclic,
        } => cqa_cmd(inputs, query, *route, *no_nulls, *allow_cyclic),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let dot = matches!(cli.command, Command::Graph { dot: true, .. });
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let written = if cli.text || dot {
                stdout.write_all(out.text.as_bytes())
            } else {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&out.json).expect("serializable output"))
            };
            // a closed pipe is not worth a panic
            let _ = written.and_then(|_| stdout.flush());
            ExitCode::from(out.code)
        }
        Err(f) => {
            let mut error = json!({ "kind": f.kind, "message": f.message });
            if let Json::Object(detail) = f.detail {
                error.as_object_mut().expect("object").extend(detail);
            }
            eprintln!("{}", json!({ "error": error }));
            ExitCode::from(f.code)
        }
    }
}
