use crate::{exit, Cli, Command, FamilyArg, Format, GenArgs, ModelArgs, SolveArgs, SolverArgs, StatsArgs, ValidateArgs, WhatifArgs};
use indexmap::IndexMap;
use optir_core::data::DataStore;
use optir_core::ir::{parse_ir, validate_ir, IrModel};
use optir_core::lp::emit_lp;
use optir_core::model::{compile, compile_to_lp, CompileError, CompileOptions, ModelStats};
use optir_core::solver::{check_solution, solve, summary_json, write_solution, Solution, SolveOptions, SolveStatus};
use optir_core::whatif::{parse_patches, run_scenario, solve_instance, ScenarioErrorKind};
use optir_core::Diagnostic;
use optir_instgen::{generate, Family, GenConfig, GenError, Scale};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Failure {
        Failure { code, message: message.into() }
    }

    pub(crate) fn input(message: impl Into<String>) -> Failure {
        Failure::new(exit::INPUT, message)
    }

    pub(crate) fn error(message: impl Into<String>) -> Failure {
        Failure::new(exit::ERROR, message)
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Failure {
        match &e {
            CompileError::Invalid(r) => Failure::new(exit::INVALID, format!("{e}\n{}", report_text(&r.errors, &r.warnings))),
            CompileError::Data(_) => Failure::input(e.to_string()),
            CompileError::Expand(_) | CompileError::Lp(_) => Failure::error(e.to_string()),
        }
    }
}

/// Runs a parsed command line, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Validate(a) => validate(&a, out),
        Command::Solve(a) => solve_cmd(&a, out),
        Command::Stats(a) => stats_cmd(&a, out),
        Command::Whatif(a) => whatif(&a, out),
        Command::Gen(a) => gen(&a, out),
        Command::Serve(a) => crate::serve::run(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            log::error!("{}", f.message);
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn status_code(s: SolveStatus) -> i32 {
    match s {
        SolveStatus::Optimal => exit::OK,
        SolveStatus::Infeasible => exit::INFEASIBLE,
        SolveStatus::Unbounded => exit::UNBOUNDED,
        SolveStatus::Feasible => exit::LIMIT_FEASIBLE,
        SolveStatus::Error => exit::ERROR,
    }
}

fn report_text(errors: &[Diagnostic], warnings: &[Diagnostic]) -> String {
    let mut s = String::new();
    for d in errors.iter().chain(warnings) {
        let _ = writeln!(s, "{:?} [{}] {}: {}", d.severity, d.code, d.path, d.message);
    }
    s
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure::error(format!("cannot write output: {e}")))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::error(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = read(&a.ir)?;
    let parsed = match parse_ir(&text) {
        Ok(p) => p,
        Err(e) => {
            let msg = match a.format {
                Format::Json => pretty(&serde_json::json!({"ok": false, "parse_error": {"path": e.path(), "message": e.to_string()}})),
                Format::Text => format!("parse error: {e}\n"),
            };
            print(out, &msg)?;
            return Ok(exit::INPUT);
        }
    };
    let mut report = validate_ir(&parsed.model);
    report.warnings.splice(0..0, parsed.warnings);
    let msg = match a.format {
        Format::Json => pretty(&serde_json::json!({"ok": report.is_ok(), "errors": report.errors, "warnings": report.warnings})),
        Format::Text => format!(
            "{}{} error(s), {} warning(s)\n",
            report_text(&report.errors, &report.warnings),
            report.errors.len(),
            report.warnings.len()
        ),
    };
    print(out, &msg)?;
    Ok(if report.is_ok() { exit::OK } else { exit::INVALID })
}

/// A parsed, validated model with its data and compile options.
pub struct Loaded {
    pub text: String,
    pub model: IrModel,
    pub store: DataStore,
    pub copts: CompileOptions,
    /// Parse warnings; validation warnings come back from compilation.
    pub warnings: Vec<Diagnostic>,
}

pub fn load(a: &ModelArgs) -> Result<Loaded, Failure> {
    let text = read(&a.ir)?;
    let parsed = parse_ir(&text).map_err(|e| Failure::input(format!("{}: {e}", a.ir.display())))?;
    let report = validate_ir(&parsed.model);
    if !report.is_ok() {
        return Err(Failure::new(
            exit::INVALID,
            format!("{} has {} validation error(s)\n{}", a.ir.display(), report.errors.len(), report_text(&report.errors, &[])),
        ));
    }
    let store = DataStore::load_tables(&a.data).map_err(|e| Failure::input(e.to_string()))?;
    let labels: IndexMap<String, Vec<String>> = match &a.labels {
        None => IndexMap::new(),
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
    };
    Ok(Loaded { text, model: parsed.model, store, copts: CompileOptions { parallel: !a.serial, labels }, warnings: parsed.warnings })
}

pub fn solve_options(a: &SolverArgs) -> Result<SolveOptions, Failure> {
    for (name, v) in [("feasibility-tol", a.feasibility_tol), ("integrality-tol", a.integrality_tol), ("gap-tol", a.gap_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::input(format!("--{name} must be positive")));
        }
    }
    if a.time_limit.is_some_and(|t| !(t >= 0.0)) {
        return Err(Failure::input("--time-limit must be non-negative"));
    }
    Ok(SolveOptions {
        time_limit: a.time_limit,
        node_limit: a.node_limit,
        feasibility_tol: a.feasibility_tol,
        integrality_tol: a.integrality_tol,
        relative_gap_tol: a.gap_tol,
        log: a.solver_log,
    })
}

fn stats_lines(log: &mut Vec<String>, st: &ModelStats) {
    log.push(format!("variables: {} ({} continuous, {} binary)", st.variables, st.continuous, st.binary));
    for (g, n) in &st.groups {
        log.push(format!("  group {g}: {n}"));
    }
    log.push(format!("rows: {}, nonzeros: {}, findings: {}", st.rows, st.nonzeros, st.findings));
    for (f, n) in &st.families {
        log.push(format!("  family {f}: {n}"));
    }
}

fn warning_lines(log: &mut Vec<String>, warnings: &[Diagnostic]) {
    for w in warnings {
        log.push(format!("warning [{}] {}: {}", w.code, w.path, w.message));
    }
}

/// Writes solution files, or only summary.json when there are no values.
fn write_results(sol: &Solution, cm: &optir_core::model::CanonicalModel, dir: &Path) -> Result<(), Failure> {
    if sol.status.has_values() {
        write_solution(sol, cm, dir).map_err(|e| Failure::error(e.to_string()))?;
    } else {
        write_file(&dir.join("summary.json"), &pretty(&summary_json(sol, cm)))?;
    }
    Ok(())
}

fn solution_lines(log: &mut Vec<String>, sol: &Solution, cm: &optir_core::model::CanonicalModel, tol: f64) {
    log.push(format!("status: {}", sol.status));
    if let Some(v) = sol.objective {
        log.push(format!("objective: {v}"));
    }
    log.push(format!("iterations: {}, nodes: {}", sol.iterations, sol.nodes));
    if let Some(m) = &sol.message {
        log.push(format!("message: {m}"));
    }
    if sol.status.has_values() {
        let rep = check_solution(cm, &sol.values, tol);
        log.push(format!("max violation: {:e}", rep.max_violation));
        if !rep.is_feasible() {
            log::warn!("solution violates constraints by {:e}", rep.max_violation);
        }
    }
}

fn solve_cmd(a: &SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let sopts = solve_options(&a.solver)?;
    let l = load(&a.model)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::error(format!("cannot create {}: {e}", a.out.display())))?;
    write_file(&a.out.join("ir.json"), &l.text)?;
    let lp_path = a.out.join("model.lp");
    let lp_file = || File::create(&lp_path).map(BufWriter::new).map_err(|e| Failure::error(format!("cannot write {}: {e}", lp_path.display())));
    let mut log = vec![format!("problem: {} ({})", l.model.problem_class, l.model.sense.as_str())];
    warning_lines(&mut log, &l.warnings);

    if a.lp_only {
        let (st, warnings) = compile_to_lp(&l.model, &l.store, &l.copts, lp_file()?)?;
        warning_lines(&mut log, &warnings);
        stats_lines(&mut log, &st);
        log.push("solve: skipped".into());
        let text = pretty(&st);
        write_file(&a.out.join("stats.json"), &text)?;
        write_file(&a.out.join("run_log.txt"), &(log.join("\n") + "\n"))?;
        print(out, &text)?;
        return Ok(exit::OK);
    }

    let cm = compile(&l.model, &l.store, &l.copts)?;
    warning_lines(&mut log, &cm.warnings);
    let mut w = emit_lp(&cm, lp_file()?).map_err(|e| Failure::error(e.to_string()))?;
    w.flush().map_err(|e| Failure::error(format!("cannot write {}: {e}", lp_path.display())))?;
    let st = cm.stats();
    stats_lines(&mut log, &st);
    if a.stats {
        let text = pretty(&st);
        write_file(&a.out.join("stats.json"), &text)?;
        print(out, &text)?;
    }
    let sol = solve(&cm, &sopts);
    solution_lines(&mut log, &sol, &cm, sopts.feasibility_tol);
    write_results(&sol, &cm, &a.out)?;
    write_file(&a.out.join("run_log.txt"), &(log.join("\n") + "\n"))?;
    log::info!("{}: status {}", a.out.display(), sol.status);
    if !a.stats {
        print(out, &pretty(&summary_json(&sol, &cm)))?;
    }
    Ok(status_code(sol.status))
}

fn stats_cmd(a: &StatsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let l = load(&a.model)?;
    let (st, _) = compile_to_lp(&l.model, &l.store, &l.copts, std::io::sink())?;
    print(out, &pretty(&st))?;
    Ok(exit::OK)
}

fn whatif(a: &WhatifArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let sopts = solve_options(&a.solver)?;
    let patches = parse_patches(&read(&a.patches)?).map_err(|e| Failure::input(format!("{}: {e}", a.patches.display())))?;
    let l = load(&a.model)?;
    let base = solve_instance(l.model, l.store, &l.copts, &sopts)?;
    let (run, diff) = run_scenario(&base, &patches, &l.copts, &sopts, a.top_k).map_err(|e| match e.kind {
        ScenarioErrorKind::Patch(_) => Failure::new(exit::INVALID, e.to_string()),
        ScenarioErrorKind::Compile(c) => {
            let f = Failure::from(c);
            Failure::new(f.code, format!("patch {}: {}", e.patch.map_or("?".into(), |p| p.to_string()), f.message))
        }
    })?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::error(format!("cannot create {}: {e}", a.out.display())))?;
    let text = pretty(&diff);
    write_file(&a.out.join("diff.json"), &text)?;
    write_results(&run.solution, &run.cm, &a.out)?;
    let mut log = vec![format!("patches: {}", patches.len())];
    warning_lines(&mut log, &run.warnings);
    log.push(format!("base status: {}", base.solution.status));
    solution_lines(&mut log, &run.solution, &run.cm, sopts.feasibility_tol);
    write_file(&a.out.join("run_log.txt"), &(log.join("\n") + "\n"))?;
    print(out, &text)?;
    Ok(status_code(run.solution.status))
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let family = match a.family {
        FamilyArg::Lp => Family::LpNetwork,
        FamilyArg::Mip => Family::MipNetwork,
        FamilyArg::Assignment => Family::Assignment,
    };
    let scale = Scale {
        sites: a.sites,
        dcs: a.dcs,
        customers: a.customers,
        products: a.products,
        periods: a.periods,
        site_fanout: a.site_fanout,
        dc_fanout: a.dc_fanout,
        carriers: a.carriers,
        shipments: a.shipments,
    };
    let mut cfg = GenConfig::new(family, a.seed, scale);
    for o in &a.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Failure::input(format!("--set {o:?}: expected KEY=VALUE")))?;
        let v: serde_json::Value = serde_json::from_str(v).map_err(|e| Failure::input(format!("--set {k}: {e}")))?;
        cfg = cfg.with_override(k, v);
    }
    let gen_err = |e: GenError| match e {
        GenError::Config(_) => Failure::input(e.to_string()),
        GenError::Io { .. } => Failure::error(e.to_string()),
    };
    let inst = generate(&cfg).map_err(gen_err)?;
    inst.write(&a.out).map_err(gen_err)?;
    print(out, &pretty(&inst.resolved))?;
    Ok(exit::OK)
}
