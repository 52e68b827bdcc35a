use clap::Parser;
use optir_cli::{exit, run, Cli};
use optir_core::fixtures::{ASSIGNMENT_IR, SUPPLY_CHAIN_LP_IR};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use tempfile::TempDir;

fn optir(args: &[&str]) -> (i32, String) {
    let cli = Cli::try_parse_from(std::iter::once("optir").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    let code = run(cli, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `gen` into `<tmp>/<name>` and return that directory.
fn gen(tmp: &Path, name: &str, args: &[&str]) -> PathBuf {
    let dir = tmp.join(name);
    let mut a = vec!["gen"];
    a.extend_from_slice(args);
    a.extend_from_slice(&["--out", p(&dir)]);
    let (code, _) = optir(&a);
    assert_eq!(code, exit::OK);
    dir
}

fn solve(inst: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let ir = inst.join("ir.json");
    let data = inst.join("data");
    let mut a = vec!["solve", p(&ir), p(&data), "--out", p(out)];
    a.extend_from_slice(extra);
    optir(&a)
}

fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

/// Maximize the sum of non-negative unbounded x over three elements.
fn unbounded_instance(tmp: &Path) -> PathBuf {
    let dir = tmp.join("unbounded");
    let ir = json!({
        "problem_class": "t", "model_type": "LP", "sense": "maximize",
        "sets": {"S": {"index_symbol": "s", "source": "sets.csv", "column": "element", "filter_column": "set_name", "filter_value": "s", "ordered": false}},
        "parameters": {},
        "variables": {"x": {"domain": ["S"], "type": "continuous", "lower_bound": 0, "upper_bound": null}},
        "constraints": {},
        "objective": {"sense": "maximize", "expression": {"operation": "indexed_sum", "over": ["S"], "body": {"type": "variable", "name": "x", "indices": ["s"]}}}
    });
    write(&dir.join("ir.json"), &ir.to_string());
    write(&dir.join("data/sets.csv"), "set_name,element\ns,a\ns,b\ns,c\n");
    dir
}

/// Knapsack MIP whose branch-and-bound needs several nodes.
fn knapsack_instance(tmp: &Path) -> PathBuf {
    let dir = tmp.join("knapsack");
    let ir = json!({
        "problem_class": "t", "model_type": "MIP", "sense": "maximize",
        "sets": {"S": {"index_symbol": "s", "source": "sets.csv", "column": "element", "filter_column": "set_name", "filter_value": "items", "ordered": false}},
        "parameters": {
            "w": {"domain": ["S"], "type": "float", "source": "items.csv", "column": "weight", "index_columns": ["item"], "missing_default": "zero"},
            "v": {"domain": ["S"], "type": "float", "source": "items.csv", "column": "value", "index_columns": ["item"], "missing_default": "zero"}
        },
        "variables": {"x": {"domain": ["S"], "type": "binary", "lower_bound": 0, "upper_bound": 1}},
        "constraints": {"cap": {"domain": [], "expression": {"operation": "indexed_sum", "over": ["S"], "body": {"operation": "multiply",
            "left": {"type": "parameter", "name": "w", "indices": ["s"]}, "right": {"type": "variable", "name": "x", "indices": ["s"]}}},
            "sense": "<=", "rhs": {"type": "constant", "value": 50}}},
        "objective": {"sense": "maximize", "expression": {"operation": "indexed_sum", "over": ["S"], "body": {"operation": "multiply",
            "left": {"type": "parameter", "name": "v", "indices": ["s"]}, "right": {"type": "variable", "name": "x", "indices": ["s"]}}}}
    });
    write(&dir.join("ir.json"), &ir.to_string());
    let items = [(23, 31), (17, 22), (14, 19), (11, 14), (9, 12), (7, 9), (13, 18), (19, 26)];
    let mut sets = String::from("set_name,element\n");
    let mut rows = String::from("item,weight,value\n");
    for (k, (w, v)) in items.iter().enumerate() {
        sets += &format!("items,i{k}\n");
        rows += &format!("i{k},{w},{v}\n");
    }
    write(&dir.join("data/sets.csv"), &sets);
    write(&dir.join("data/items.csv"), &rows);
    dir
}

#[test]
fn validate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let good = write(&tmp.path().join("lp.json"), SUPPLY_CHAIN_LP_IR);
    let (code, out) = optir(&["validate", p(&good)]);
    assert_eq!(code, exit::OK);
    assert!(out.contains("0 error(s)"));

    let mut doc: Value = serde_json::from_str(SUPPLY_CHAIN_LP_IR).unwrap();
    doc["constraints"]["production_capacity"]["rhs"]["name"] = json!("nope");
    let bad = write(&tmp.path().join("bad.json"), &doc.to_string());
    let (code, out) = optir(&["validate", p(&bad)]);
    assert_eq!(code, exit::INVALID);
    assert!(out.contains("constraints.production_capacity"), "{out}");
    let (code, out) = optir(&["validate", p(&bad), "--format", "json"]);
    assert_eq!(code, exit::INVALID);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ok"], false);
    assert!(!v["errors"].as_array().unwrap().is_empty());

    let (code, _) = optir(&["validate", p(&tmp.path().join("missing.json"))]);
    assert_eq!(code, exit::INPUT);
    let broken = write(&tmp.path().join("broken.json"), "{\"sets\": ");
    assert_eq!(optir(&["validate", p(&broken)]).0, exit::INPUT);
}

#[test]
fn bad_arguments_exit_2() {
    let e = Cli::try_parse_from(["optir", "solve"]).unwrap_err();
    assert_eq!(e.exit_code(), exit::INPUT);
    let e = Cli::try_parse_from(["optir", "gen", "tsp", "--out", "x"]).unwrap_err();
    assert_eq!(e.exit_code(), exit::INPUT);
}

#[test]
fn solve_exit_code_table() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();

    // 0: assignment desk instance
    let asg = gen(t, "asg", &["assignment", "--carriers", "3", "--shipments", "8"]);
    let out = t.join("asg_out");
    assert_eq!(solve(&asg, &out, &[]).0, exit::OK);
    let mut files: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["ir.json", "model.lp", "run_log.txt", "solution_x.csv", "summary.json"]);
    assert_eq!(std::fs::read_to_string(out.join("ir.json")).unwrap(), ASSIGNMENT_IR);

    // 1: invalid IR
    let mut doc: Value = serde_json::from_str(ASSIGNMENT_IR).unwrap();
    doc["variables"]["x"]["upper_bound"] = json!(3);
    let bad = t.join("asg_bad");
    write(&bad.join("ir.json"), &doc.to_string());
    std::fs::rename(asg.join("data"), bad.join("data")).unwrap();
    assert_eq!(solve(&bad, &t.join("o1"), &[]).0, exit::INVALID);

    // 2: missing data directory and malformed CSV
    assert_eq!(solve(&asg, &t.join("o2"), &[]).0, exit::INPUT);
    let csv = bad.join("data/carrier_capacity.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let broken = t.join("asg_csv");
    write(&broken.join("ir.json"), ASSIGNMENT_IR);
    std::fs::rename(bad.join("data"), broken.join("data")).unwrap();
    write(&broken.join("data/carrier_capacity.csv"), &(text + "C_999\n"));
    assert_eq!(solve(&broken, &t.join("o2b"), &[]).0, exit::INPUT);

    // 3: zero production capacity with positive demand
    let lp = gen(t, "lp", &["lp", "--sites", "2", "--dcs", "2", "--customers", "5", "--products", "3", "--periods", "2"]);
    let cap = lp.join("data/production_capacity.csv");
    let zeroed: Vec<String> = std::fs::read_to_string(&cap)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { l.to_string() } else { format!("{},0", l.rsplit_once(',').unwrap().0) })
        .collect();
    write(&cap, &(zeroed.join("\n") + "\n"));
    let out = t.join("o3");
    assert_eq!(solve(&lp, &out, &[]).0, exit::INFEASIBLE);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "infeasible");
    assert!(!out.join("solution_production_quantity.csv").exists());

    // 4: unbounded
    assert_eq!(solve(&unbounded_instance(t), &t.join("o4"), &[]).0, exit::UNBOUNDED);

    // 5: node limit reached with an incumbent
    let ks = knapsack_instance(t);
    assert_eq!(solve(&ks, &t.join("o5a"), &[]).0, exit::OK);
    let hit = (1..40).find(|n| solve(&ks, &t.join(format!("o5_{n}")), &["--node-limit", &n.to_string()]).0 == exit::LIMIT_FEASIBLE);
    assert!(hit.is_some());

    // 6: limit reached before any solution
    assert_eq!(solve(&ks, &t.join("o6"), &["--node-limit", "0"]).0, exit::ERROR);
    assert_eq!(solve(&lp, &t.join("o6b"), &["--time-limit", "0"]).0, exit::ERROR);
}

#[test]
fn solve_artifacts_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let inst = gen(t, "mip", &["mip", "--sites", "2", "--dcs", "2", "--customers", "6", "--products", "3", "--periods", "3"]);
    let (a, b) = (t.join("a"), t.join("b"));
    assert_eq!(solve(&inst, &a, &[]).0, exit::OK);
    assert_eq!(solve(&inst, &b, &["--serial"]).0, exit::OK);
    for e in std::fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn lp_only_and_stats() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let inst = gen(t, "lp", &["lp", "--sites", "2", "--dcs", "2", "--customers", "5", "--products", "3", "--periods", "2"]);
    let out = t.join("o");
    let (code, text) = solve(&inst, &out, &["--lp-only"]);
    assert_eq!(code, exit::OK);
    assert!(out.join("model.lp").exists() && out.join("stats.json").exists());
    assert!(!out.join("summary.json").exists());
    let st: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(st["groups"]["production_quantity"], 2 * 3 * 2);

    let (code, text) = optir(&["stats", p(&inst.join("ir.json")), p(&inst.join("data"))]);
    assert_eq!(code, exit::OK);
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), st);

    // in-memory and streamed LP text agree
    let full = t.join("full");
    assert_eq!(solve(&inst, &full, &["--stats"]).0, exit::OK);
    assert_eq!(std::fs::read(full.join("model.lp")).unwrap(), std::fs::read(out.join("model.lp")).unwrap());
}

#[test]
fn gen_writes_instance_directory() {
    let tmp = TempDir::new().unwrap();
    let dir = gen(tmp.path(), "asg", &["assignment", "--carriers", "3", "--shipments", "8", "--seed", "7", "--set", "capacity_factor=1.1"]);
    let mut csv: Vec<String> = std::fs::read_dir(dir.join("data")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    csv.sort();
    assert_eq!(csv, ["capacity_consumption.csv", "carrier_capacity.csv", "cost.csv", "revenue.csv", "sets.csv"]);
    assert_eq!(std::fs::read_to_string(dir.join("ir.json")).unwrap(), ASSIGNMENT_IR);
    let cfg: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("gen_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 7);

    let (code, _) = optir(&["gen", "assignment", "--out", p(&tmp.path().join("x")), "--set", "no_such_param=1"]);
    assert_eq!(code, exit::INPUT);
    let (code, _) = optir(&["gen", "assignment", "--out", p(&tmp.path().join("y")), "--set", "novalue"]);
    assert_eq!(code, exit::INPUT);
}

#[test]
fn whatif_command() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let inst = gen(t, "asg", &["assignment", "--carriers", "3", "--shipments", "8"]);
    let args = |patches: &Path, out: &Path| -> (i32, String) {
        optir(&["whatif", p(&inst.join("ir.json")), p(&inst.join("data")), p(patches), "--out", p(out)])
    };

    let empty = write(&t.join("empty.json"), "[]");
    let (code, text) = args(&empty, &t.join("w0"));
    assert_eq!(code, exit::OK);
    let d: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(d["changed_variables"], 0);
    assert_eq!(d["objective_delta"], 0.0);
    assert!(t.join("w0/diff.json").exists() && t.join("w0/solution_x.csv").exists());

    let relax = write(&t.join("relax.json"), r#"[{"kind": "struct", "action": "remove_constraint", "name": "carrier_capacity_constraint"}]"#);
    let (code, text) = args(&relax, &t.join("w1"));
    assert_eq!(code, exit::OK);
    let d: Value = serde_json::from_str(&text).unwrap();
    assert!(d["objective_delta"].as_f64().unwrap() >= -1e-9);

    let unknown = write(&t.join("unknown.json"), r#"[{"kind": "struct", "action": "remove_constraint", "name": "nope"}]"#);
    assert_eq!(args(&unknown, &t.join("w2")).0, exit::INVALID);
    let malformed = write(&t.join("malformed.json"), r#"[{"kind": "struct", "action": "explode"}]"#);
    assert_eq!(args(&malformed, &t.join("w3")).0, exit::INPUT);
}
