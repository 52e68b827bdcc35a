//! Generalized assignment: shipments to capacitated carriers.

use crate::rng::{stream, uniform, Stream};
use crate::{check_range, element_id, fmt_fixed, merge_params, Family, GenConfig, GenError, Instance, Scale};
use optir_core::data::{DataStore, Table};
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const FULL_CARRIERS: usize = 400;
pub const FULL_SHIPMENTS: usize = 3200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentParams {
    pub grid: [f64; 2],
    pub cost_rate: [f64; 2],
    pub loading_efficiency: [f64; 2],
    pub weight_mu: f64,
    pub weight_sigma: f64,
    pub weight_min: f64,
    pub price_factor: [f64; 2],
    pub handling_fee: [f64; 2],
    pub pair_noise: [f64; 2],
    pub distance_divisor: f64,
    pub capacity_factor: f64,
    pub capacity_spread: [f64; 2],
}

impl Default for AssignmentParams {
    fn default() -> Self {
        AssignmentParams {
            grid: [0.0, 1000.0],
            cost_rate: [0.04, 0.12],
            loading_efficiency: [0.85, 1.15],
            weight_mu: 4.4,
            weight_sigma: 0.5,
            weight_min: 5.0,
            price_factor: [2.5, 6.0],
            handling_fee: [20.0, 80.0],
            pair_noise: [0.92, 1.08],
            distance_divisor: 100.0,
            capacity_factor: 1.3,
            capacity_spread: [0.7, 1.3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
struct Dims {
    carriers: usize,
    shipments: usize,
}

fn resolve(scale: &Scale) -> Result<Dims, GenError> {
    let net = [scale.sites, scale.dcs, scale.customers, scale.products, scale.periods, scale.site_fanout, scale.dc_fanout];
    if net.iter().any(Option::is_some) {
        return Err(GenError::Config("network dimensions do not apply to assignment instances".into()));
    }
    let d = Dims { carriers: scale.carriers.unwrap_or(FULL_CARRIERS), shipments: scale.shipments.unwrap_or(FULL_SHIPMENTS) };
    if d.carriers == 0 || d.shipments == 0 {
        return Err(GenError::Config("carriers and shipments must be >= 1".into()));
    }
    Ok(d)
}

pub fn gen_assignment(cfg: &GenConfig) -> Result<Instance, GenError> {
    let p: AssignmentParams = merge_params(&AssignmentParams::default(), &cfg.overrides)?;
    for (n, r) in [
        ("grid", p.grid),
        ("cost_rate", p.cost_rate),
        ("loading_efficiency", p.loading_efficiency),
        ("price_factor", p.price_factor),
        ("handling_fee", p.handling_fee),
        ("pair_noise", p.pair_noise),
        ("capacity_spread", p.capacity_spread),
    ] {
        check_range(n, r)?;
    }
    if !(p.weight_sigma >= 0.0 && p.distance_divisor > 0.0 && p.capacity_factor >= 0.0) {
        return Err(GenError::Config("weight_sigma, distance_divisor and capacity_factor out of range".into()));
    }
    let d = resolve(&cfg.scale)?;
    let seed = cfg.seed;
    let (nc, ns) = (d.carriers, d.shipments);
    let carriers: Vec<String> = (1..=nc).map(|n| element_id("C", n, nc, 3)).collect();
    let shipments: Vec<String> = (1..=ns).map(|n| element_id("S", n, ns, 3)).collect();

    let pts = |s: Stream, n: usize| {
        let mut r = stream(seed, s);
        (0..n).map(|_| [uniform(&mut r, p.grid), uniform(&mut r, p.grid)]).collect::<Vec<[f64; 2]>>()
    };
    let depot = pts(Stream::CarrierPos, nc);
    let origin = pts(Stream::ShipmentPos, ns);
    let draw = |s: Stream, n: usize, range: [f64; 2]| {
        let mut r = stream(seed, s);
        (0..n).map(|_| uniform(&mut r, range)).collect::<Vec<f64>>()
    };
    let rate = draw(Stream::CarrierRate, nc, p.cost_rate);
    let handling = draw(Stream::CarrierHandling, nc, p.loading_efficiency);
    let weight: Vec<f64> = {
        let mut r = stream(seed, Stream::Weight);
        let dist = LogNormal::new(p.weight_mu, p.weight_sigma).expect("sigma checked non-negative");
        (0..ns).map(|_| dist.sample(&mut r).max(p.weight_min)).collect()
    };
    let price = draw(Stream::PriceFactor, ns, p.price_factor);
    let target = p.capacity_factor * weight.iter().sum::<f64>() / nc as f64;
    let capacity: Vec<f64> = draw(Stream::CarrierCapacity, nc, p.capacity_spread).into_iter().map(|f| f * target).collect();

    let mut fee = stream(seed, Stream::HandlingFee);
    let mut noise = stream(seed, Stream::PairNoise);
    let mut cost_rows = Vec::with_capacity(ns * nc);
    let mut use_rows = Vec::with_capacity(ns * nc);
    for i in 0..ns {
        for j in 0..nc {
            let dx = depot[j][0] - origin[i][0];
            let dy = depot[j][1] - origin[i][1];
            let c = rate[j] * weight[i] * (dx * dx + dy * dy).sqrt() / p.distance_divisor + uniform(&mut fee, p.handling_fee);
            let u = weight[i] * handling[j] * uniform(&mut noise, p.pair_noise);
            cost_rows.push(vec![shipments[i].clone(), carriers[j].clone(), fmt_fixed(c, 2)]);
            use_rows.push(vec![shipments[i].clone(), carriers[j].clone(), fmt_fixed(u, 2)]);
        }
    }

    let mut store = DataStore::new();
    let mut sets: Vec<Vec<String>> = shipments.iter().map(|s| vec!["shipments".to_string(), s.clone()]).collect();
    sets.extend(carriers.iter().map(|c| vec!["carriers".to_string(), c.clone()]));
    store.insert("sets", Table::from_rows(&["set_name", "element"], &sets));
    let revenue: Vec<Vec<String>> = shipments
        .iter()
        .zip(weight.iter().zip(&price))
        .map(|(s, (&w, &f))| vec![s.clone(), fmt_fixed(w * f, 2)])
        .collect();
    store.insert("revenue", Table::from_rows(&["shipment_id", "revenue"], &revenue));
    store.insert("cost", Table::new(vec!["shipment_id".into(), "carrier_id".into(), "cost".into()], cost_rows));
    store.insert(
        "capacity_consumption",
        Table::new(vec!["shipment_id".into(), "carrier_id".into(), "capacity_consumption".into()], use_rows),
    );
    let caps: Vec<Vec<String>> = carriers.iter().zip(&capacity).map(|(c, &v)| vec![c.clone(), fmt_fixed(v, 2)]).collect();
    store.insert("carrier_capacity", Table::from_rows(&["carrier_id", "carrier_capacity"], &caps));

    let resolved = json!({
        "family": Family::Assignment.as_str(),
        "seed": seed,
        "scale": Scale::assignment(nc, ns),
        "params": p,
    });
    Ok(Instance { family: Family::Assignment, store, resolved })
}
