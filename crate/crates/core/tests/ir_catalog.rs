use optir_core::fixtures::{ASSIGNMENT_IR, SUPPLY_CHAIN_LP_IR, SUPPLY_CHAIN_MIP_IR};
use optir_core::ir::{parse_ir, serialize_ir, validate_ir};
use serde_json::{json, Value};
use std::time::{Duration, Instant};

const FIXTURES: [(&str, &str); 3] = [("lp", SUPPLY_CHAIN_LP_IR), ("mip", SUPPLY_CHAIN_MIP_IR), ("assignment", ASSIGNMENT_IR)];

#[test]
fn fixtures_validate_clean() {
    for (name, text) in FIXTURES {
        let t0 = Instant::now();
        let parsed = parse_ir(text).unwrap();
        let rep = validate_ir(&parsed.model);
        assert!(t0.elapsed() < Duration::from_secs(1));
        assert!(rep.errors.is_empty(), "{name}: {:?}", rep.errors);
    }
}

#[test]
fn fixtures_roundtrip() {
    for (name, text) in FIXTURES {
        let a = parse_ir(text).unwrap().model;
        let once = serialize_ir(&a);
        let b = parse_ir(&once).unwrap().model;
        assert_eq!(a, b, "{name}");
        assert_eq!(once, serialize_ir(&b), "{name}");
    }
}

/// All error locations and messages produced for a document.
fn complaints(doc: &Value) -> Vec<String> {
    match parse_ir(&doc.to_string()) {
        Err(e) => vec![format!("{} {}", e.path().unwrap_or(""), e)],
        Ok(p) => validate_ir(&p.model).errors.iter().map(|d| format!("{} [{}] {}", d.path, d.code, d.message)).collect(),
    }
}

type Corruption = (&'static str, &'static str, fn(&mut Value), &'static str);

fn catalog() -> Vec<Corruption> {
    vec![
        ("renamed set", "lp", |d| {
            let s = d["sets"].as_object_mut().unwrap().shift_remove("Products").unwrap();
            d["sets"]["Goods"] = s;
        }, "Products"),
        ("rhs arity", "lp", |d| d["constraints"]["production_capacity"]["rhs"]["indices"] = json!(["i"]), "constraints.production_capacity"),
        ("lag on unordered", "lp", |d| d["sets"]["Periods"]["ordered"] = json!(false), "inventory_balance_site"),
        ("dangling sparse filter", "lp", |d| d["constraints"]["production_capacity"]["sparse_filter"] = json!("no_such_param"), "sparse_filter"),
        ("positional on unordered", "lp", |d| {
            d["constraints"]["inventory_balance_site_init"]["expression"]["left"]["indices"][1] = json!("Products[0]")
        }, "inventory_balance_site_init"),
        ("unknown variable", "lp", |d| {
            d["constraints"]["production_capacity"]["expression"]["body"]["name"] = json!("produce")
        }, "constraints.production_capacity"),
        ("unknown parameter", "lp", |d| d["constraints"]["production_capacity"]["rhs"]["name"] = json!("prod_cap"), "constraints.production_capacity"),
        ("unbound symbol", "lp", |d| {
            d["constraints"]["production_capacity"]["expression"]["body"]["indices"][2] = json!("z")
        }, "constraints.production_capacity"),
        ("bad sense", "lp", |d| d["constraints"]["demand_satisfaction"]["sense"] = json!("<>"), "constraints.demand_satisfaction"),
        ("unknown operation", "lp", |d| {
            d["constraints"]["inventory_balance_site"]["expression"]["operation"] = json!("divide")
        }, "constraints.inventory_balance_site"),
        ("binary upper bound", "assignment", |d| d["variables"]["x"]["upper_bound"] = json!(2), "variables.x"),
        ("bound order", "lp", |d| {
            d["variables"]["production_quantity"]["lower_bound"] = json!(5);
            d["variables"]["production_quantity"]["upper_bound"] = json!(1);
        }, "variables.production_quantity"),
        ("filter not a prefix", "lp", |d| d["variables"]["production_quantity"]["domain_filter"] = json!("demand"), "variables.production_quantity.domain_filter"),
        ("unknown set in domain", "lp", |d| d["variables"]["inventory_site"]["domain"][0] = json!("Plants"), "variables.inventory_site"),
        ("index column count", "lp", |d| d["parameters"]["demand"]["index_columns"] = json!(["customer_id", "product_id"]), "parameters.demand"),
        ("objective sense mismatch", "lp", |d| d["objective"]["sense"] = json!("minimize"), "objective"),
        ("positive lag", "lp", |d| {
            d["constraints"]["inventory_balance_site"]["expression"]["right"]["left"]["lag"] = json!(1)
        }, "constraints.inventory_balance_site"),
        ("nonlinear product", "assignment", |d| {
            d["constraints"]["carrier_capacity_constraint"]["expression"]["body"]["left"] = json!({"type": "variable", "name": "x", "indices": ["i", "j"]})
        }, "constraints.carrier_capacity_constraint"),
        ("symbol shadowing", "assignment", |d| {
            d["constraints"]["assignment_limit"]["expression"]["over"] = json!(["Shipments"])
        }, "constraints.assignment_limit"),
        ("bad index symbol", "lp", |d| d["sets"]["Customers"]["index_symbol"] = json!("1c"), "sets.Customers"),
        ("sparse filter on other domain", "lp", |d| {
            d["constraints"]["dc_storage_capacity"]["sparse_filter"] = json!("production_capacity")
        }, "constraints.dc_storage_capacity"),
        ("missing objective", "assignment", |d| {
            d.as_object_mut().unwrap().shift_remove("objective");
        }, "objective"),
        ("non-numeric bound", "assignment", |d| d["variables"]["x"]["lower_bound"] = json!("zero"), "variables.x"),
        ("duplicate index symbol", "assignment", |d| d["sets"]["Carriers"]["index_symbol"] = json!("i"), "Carriers"),
    ]
}

#[test]
fn corruption_catalog() {
    let cases = catalog();
    assert!(cases.len() >= 20);
    for (label, fixture, corrupt, fragment) in cases {
        let text = FIXTURES.iter().find(|f| f.0 == fixture).unwrap().1;
        let mut doc: Value = serde_json::from_str(text).unwrap();
        corrupt(&mut doc);
        let found = complaints(&doc);
        assert!(!found.is_empty(), "{label}: accepted");
        assert!(found.iter().any(|c| c.contains(fragment)), "{label}: {found:?} lacks {fragment:?}");
    }
}

#[test]
fn malformed_json_reports_position() {
    let err = parse_ir("{\"sets\": [").unwrap_err();
    assert!(err.path().is_none());
    assert!(err.to_string().contains("line 1"));
}
