//! Command-line driver: check files, run entries, REPL, corpus runner.
//!
//! Exit codes: `check` returns 0 when every file elaborates, 1 on type
//! errors, 2 on I/O or parse errors. `run` additionally returns 3 on
//! primitive failures. Diagnostics go to standard error; values to standard
//! output. `ROWO_COLOR={auto,never,always}` controls diagnostic coloring.

use std::io::{BufRead, IsTerminal, Write};

/// Prints a line to stdout, exiting quietly when the consumer closed the
/// pipe (e.g. `rowo check --trace | head`).
fn outln(line: std::fmt::Arguments) {
    use std::io::ErrorKind;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Err(e) = writeln!(lock, "{line}") {
        if e.kind() == ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

macro_rules! outln {
    ($($arg:tt)*) => { outln(format_args!($($arg)*)) };
}
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use rowo_core::ast::free_vars;
use rowo_core::eval::{eval, prelude_env, print_value, EvalError, RtEnv, Value};
use rowo_core::surface::{
    parse, parse_repl, print_type, Mode, Program, ReplInput, ReplScope, TheoryName,
};
use rowo_core::typecheck::{elaborate_program, prelude_ctx, Checker, Ctx, ElabOutput};
use rowo_core::Theory;

#[derive(Parser)]
#[command(
    name = "rowo",
    about = "Typechecker and interpreter for a row-typed core calculus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryArg {
    Minimal,
    Simple,
    Scoped,
}

impl From<TheoryArg> for TheoryName {
    fn from(t: TheoryArg) -> TheoryName {
        match t {
            TheoryArg::Minimal => TheoryName::Minimal,
            TheoryArg::Simple => TheoryName::Simple,
            TheoryArg::Scoped => TheoryName::Scoped,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck files; exit 0 if all elaborate.
    Check {
        paths: Vec<PathBuf>,
        /// Override the files' theory pragmas.
        #[arg(long, value_enum)]
        theory: Option<TheoryArg>,
        /// Enable the stratified level lint.
        #[arg(long)]
        stratified: bool,
        /// Print the derivation trace, one rule per line.
        #[arg(long)]
        trace: bool,
        /// Print elaborated core terms.
        #[arg(long)]
        print_core: bool,
    },
    /// Typecheck a file and evaluate an entry.
    Run {
        path: PathBuf,
        /// The declaration to evaluate.
        #[arg(long, default_value = "main")]
        entry: String,
        #[arg(long, value_enum)]
        theory: Option<TheoryArg>,
        #[arg(long)]
        stratified: bool,
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        print_core: bool,
    },
    /// Interactive session.
    Repl {
        #[arg(long, value_enum)]
        theory: Option<TheoryArg>,
        #[arg(long)]
        stratified: bool,
    },
    /// Check every `.ro` file under a directory, run `test_*` entries, and
    /// compare with adjacent `.expected` files byte-exactly.
    Corpus {
        dir: PathBuf,
        #[arg(long, value_enum)]
        theory: Option<TheoryArg>,
        #[arg(long)]
        stratified: bool,
    },
}

struct Colors {
    error: &'static str,
    reset: &'static str,
}

fn colors() -> Colors {
    let mode = std::env::var("ROWO_COLOR").unwrap_or_else(|_| "auto".to_string());
    let on = match mode.as_str() {
        "always" => true,
        "never" => false,
        _ => std::io::stderr().is_terminal(),
    };
    if on {
        Colors {
            error: "\x1b[31merror:\x1b[0m",
            reset: "",
        }
    } else {
        Colors {
            error: "error:",
            reset: "",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check {
            paths,
            theory,
            stratified,
            trace,
            print_core,
        } => cmd_check(&paths, theory, stratified, trace, print_core),
        Command::Run {
            path,
            entry,
            theory,
            stratified,
            trace,
            print_core,
        } => cmd_run(&path, &entry, theory, stratified, trace, print_core),
        Command::Repl { theory, stratified } => cmd_repl(theory, stratified),
        Command::Corpus {
            dir,
            theory,
            stratified,
        } => cmd_corpus(&dir, theory, stratified),
    };
    ExitCode::from(code)
}

fn load(
    path: &Path,
    theory: Option<TheoryArg>,
    stratified: bool,
) -> Result<(Program, Theory, Mode), (u8, String)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| (2u8, format!("{}: {e}", path.display())))?;
    let program = parse(&text)
        .map_err(|e| (2u8, format!("{}:{}: {}", path.display(), e.span, e.message)))?;
    let theory = Theory::of(theory.map(Into::into).unwrap_or(program.theory));
    let mode = if stratified {
        Mode::Stratified
    } else {
        program.mode
    };
    Ok((program, theory, mode))
}

fn elaborate(
    path: &Path,
    program: &Program,
    theory: Theory,
    mode: Mode,
    trace: bool,
) -> Result<ElabOutput, (u8, String)> {
    elaborate_program(program, theory, mode, trace)
        .map_err(|e| (1u8, format!("{}:{}: {}", path.display(), e.error.span, e)))
}

fn cmd_check(
    paths: &[PathBuf],
    theory: Option<TheoryArg>,
    stratified: bool,
    trace: bool,
    print_core: bool,
) -> u8 {
    let c = colors();
    let mut worst = 0u8;
    for path in paths {
        match load(path, theory, stratified)
            .and_then(|(p, t, m)| elaborate(path, &p, t, m, trace))
        {
            Ok(out) => {
                if trace {
                    for line in &out.trace {
                        outln!("{line}");
                    }
                }
                if print_core {
                    for d in &out.decls {
                        outln!("{} : {}", d.name, print_type(&d.signature));
                        outln!("{} = {:?}", d.name, d.core);
                    }
                }
            }
            Err((code, msg)) => {
                eprintln!("{} {msg}{}", c.error, c.reset);
                worst = worst.max(code);
            }
        }
    }
    worst
}

fn cmd_run(
    path: &Path,
    entry: &str,
    theory: Option<TheoryArg>,
    stratified: bool,
    trace: bool,
    print_core: bool,
) -> u8 {
    let c = colors();
    let (program, theory, mode) = match load(path, theory, stratified) {
        Ok(x) => x,
        Err((code, msg)) => {
            eprintln!("{} {msg}{}", c.error, c.reset);
            return code;
        }
    };
    let out = match elaborate(path, &program, theory, mode, trace) {
        Ok(o) => o,
        Err((code, msg)) => {
            eprintln!("{} {msg}{}", c.error, c.reset);
            return code;
        }
    };
    if trace {
        for line in &out.trace {
            outln!("{line}");
        }
    }
    if print_core {
        for d in &out.decls {
            outln!("{} = {:?}", d.name, d.core);
        }
    }
    let Some(target) = out.decls.iter().find(|d| d.name == entry) else {
        eprintln!("{} no entry `{entry}` in {}{}", c.error, path.display(), c.reset);
        return 1;
    };
    let closed = free_vars(&target.signature).is_empty()
        && !matches!(target.signature, rowo_core::Type::Forall(_, _, _))
        && !matches!(target.signature, rowo_core::Type::Qual(_, _));
    if !closed {
        eprintln!(
            "{} cannot run polymorphic entry `{entry}` : {}{}",
            c.error,
            print_type(&target.signature),
            c.reset
        );
        return 1;
    }
    match eval_decls(&out, entry) {
        Ok(v) => {
            outln!("{}", print_value(&v));
            0
        }
        Err(EvalError::PrimError(m)) => {
            eprintln!("{} primitive failure: {m}{}", c.error, c.reset);
            3
        }
        Err(EvalError::Internal(m)) => {
            eprintln!("{} internal: {m}{}", c.error, c.reset);
            3
        }
    }
}

fn eval_decls(out: &ElabOutput, entry: &str) -> Result<Value, EvalError> {
    let mut env = prelude_env();
    for d in &out.decls {
        let v = eval(&env, &d.core)?;
        if d.name == entry {
            return Ok(v);
        }
        let mut frame = RtEnv::with_parent(&env);
        frame.bind(d.name.clone(), v);
        env = Arc::new(frame);
    }
    Err(EvalError::Internal(format!("entry `{entry}` not evaluated")))
}

fn cmd_repl(theory: Option<TheoryArg>, stratified: bool) -> u8 {
    let c = colors();
    let theory = Theory::of(theory.map(Into::into).unwrap_or_default());
    let mode = if stratified {
        Mode::Stratified
    } else {
        Mode::Plain
    };
    let checker = Checker::new(theory, mode);
    let mut cx: Ctx = prelude_ctx();
    let mut scope = ReplScope::default();
    let mut env = prelude_env();
    let mut pending_sigs: Vec<(String, rowo_core::Type)> = Vec::new();
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    print!("rowo> ");
    let _ = out.flush();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        match parse_repl(&line, &scope) {
            Ok(ReplInput::Quit) => return 0,
            Ok(ReplInput::Empty) => {}
            Ok(ReplInput::TypeSyn(name, ty)) => {
                scope.synonyms.insert(name, ty);
            }
            Ok(ReplInput::Sig(name, ty)) => {
                pending_sigs.push((name, ty));
            }
            Ok(ReplInput::Body(name, body)) => {
                match pending_sigs.iter().position(|(n, _)| *n == name) {
                    Some(ix) => {
                        let (_, sig) = pending_sigs.remove(ix);
                        match checker.check_decl(&mut cx, &name, &sig, &body) {
                            Ok((sig, core)) => match eval(&env, &core) {
                                Ok(v) => {
                                    let mut frame = RtEnv::with_parent(&env);
                                    frame.bind(name.clone(), v);
                                    env = Arc::new(frame);
                                    outln!("{name} : {}", print_type(&sig));
                                }
                                Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
                            },
                            Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
                        }
                    }
                    None => eprintln!(
                        "{} no signature for `{name}`; declare `{name} : TYPE;` first{}",
                        c.error, c.reset
                    ),
                }
            }
            Ok(ReplInput::ShowType(term)) => match checker.infer(&cx, &term) {
                Ok((ty, _)) => outln!("{}", print_type(&ty)),
                Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
            },
            Ok(ReplInput::ShowCore(term)) => match checker.infer(&cx, &term) {
                Ok((_, core)) => outln!("{core:?}"),
                Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
            },
            Ok(ReplInput::Expr(term)) => match checker.infer(&cx, &term) {
                Ok((_, core)) => match eval(&env, &core) {
                    Ok(v) => println!("{}", print_value(&v)),
                    Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
                },
                Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
            },
            Err(e) => eprintln!("{} {e}{}", c.error, c.reset),
        }
        print!("rowo> ");
        let _ = out.flush();
    }
    0
}

fn cmd_corpus(dir: &Path, theory: Option<TheoryArg>, stratified: bool) -> u8 {
    let c = colors();
    let mut files: Vec<PathBuf> = Vec::new();
    collect_ro_files(dir, &mut files);
    files.sort();
    if files.is_empty() {
        eprintln!("{} no .ro files under {}{}", c.error, dir.display(), c.reset);
        return 2;
    }
    let mut worst = 0u8;
    for path in &files {
        let (program, th, mode) = match load(path, theory, stratified) {
            Ok(x) => x,
            Err((code, msg)) => {
                eprintln!("{} {msg}{}", c.error, c.reset);
                worst = worst.max(code);
                continue;
            }
        };
        let out = match elaborate(path, &program, th, mode, false) {
            Ok(o) => o,
            Err((code, msg)) => {
                eprintln!("{} {msg}{}", c.error, c.reset);
                worst = worst.max(code);
                continue;
            }
        };
        let mut lines = Vec::new();
        let mut env = prelude_env();
        let mut failed = false;
        for d in &out.decls {
            match eval(&env, &d.core) {
                Ok(v) => {
                    if d.name.starts_with("test_") {
                        lines.push(format!("{} = {}", d.name, print_value(&v)));
                    }
                    let mut frame = RtEnv::with_parent(&env);
                    frame.bind(d.name.clone(), v);
                    env = Arc::new(frame);
                }
                Err(e) => {
                    eprintln!(
                        "{} {}: evaluating `{}`: {e}{}",
                        c.error,
                        path.display(),
                        d.name,
                        c.reset
                    );
                    worst = worst.max(1);
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        let expected_path = path.with_extension("expected");
        if expected_path.exists() {
            let got = if lines.is_empty() {
                String::new()
            } else {
                format!("{}\n", lines.join("\n"))
            };
            match std::fs::read_to_string(&expected_path) {
                Ok(want) => {
                    if got != want {
                        eprintln!(
                            "{} {}: output differs from {}\n--- got ---\n{got}--- want ---\n{want}{}",
                            c.error,
                            path.display(),
                            expected_path.display(),
                            c.reset
                        );
                        worst = worst.max(1);
                        continue;
                    }
                }
                Err(e) => {
                    eprintln!("{} {}: {e}{}", c.error, expected_path.display(), c.reset);
                    worst = worst.max(2);
                    continue;
                }
            }
        }
        outln!("ok {}", path.display());
    }
    worst
}

fn collect_ro_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect_ro_files(&path, out);
        } else if path.extension().map(|e| e == "ro").unwrap_or(false) {
            out.push(path);
        }
    }
}
