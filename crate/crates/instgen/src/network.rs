//! Multi-period production/distribution networks: the LP family and its
//! facility-opening MIP subset.

use crate::rng::{stream, uniform, Stream};
use crate::{check_range, element_id, fmt_fixed, merge_params, Family, GenConfig, GenError, Instance, Scale};
use optir_core::data::{DataStore, Table};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeSet;

/// Reference LP dimensions (sites, DCs, customers, products, periods).
pub const LP_FULL_DIMS: [usize; 5] = [50, 50, 500, 500, 12];
/// Reference MIP dimensions after subsetting.
pub const MIP_FULL_DIMS: [usize; 5] = [25, 25, 250, 500, 12];
/// Total production reported for the reference LP instance; anchors the
/// capacity floor away from full scale.
const FULL_TOTAL_DEMAND: f64 = 5.42e6;
const FULL_FLOOR: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub site_box: [f64; 2],
    pub dc_box: [f64; 2],
    pub cluster_box: [f64; 2],
    pub grid: f64,
    /// Defaults to min(20, ceil(customers / 25)).
    pub clusters: Option<usize>,
    pub cluster_sigma: f64,
    pub site_dc_cost_per_distance: f64,
    pub dc_customer_cost_per_distance: f64,
    pub transport_noise: [f64; 2],
    pub revenue_mu: f64,
    pub revenue_sigma: f64,
    pub site_efficiency: [f64; 2],
    pub production_noise: [f64; 2],
    pub holding_site_share: [f64; 2],
    pub holding_dc_share: [f64; 2],
    /// Defaults to [round(0.08·P), round(0.16·P)].
    pub products_per_customer: Option<[usize; 2]>,
    pub demand_mu: f64,
    pub demand_sigma: f64,
    pub seasonality: Vec<f64>,
    pub demand_noise: [f64; 2],
    pub capacity_factor: f64,
    pub capacity_noise: f64,
    /// Defaults to 10,000 at full scale, scaled by total demand elsewhere.
    pub capacity_floor: Option<f64>,
    pub storage_site: [f64; 2],
    pub storage_dc: [f64; 2],
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            site_box: [200.0, 800.0],
            dc_box: [50.0, 950.0],
            cluster_box: [100.0, 900.0],
            grid: 1000.0,
            clusters: None,
            cluster_sigma: 30.0,
            site_dc_cost_per_distance: 0.05,
            dc_customer_cost_per_distance: 0.08,
            transport_noise: [0.9, 1.1],
            revenue_mu: 3.9,
            revenue_sigma: 0.6,
            site_efficiency: [0.30, 0.55],
            production_noise: [0.85, 1.15],
            holding_site_share: [0.010, 0.020],
            holding_dc_share: [0.008, 0.018],
            products_per_customer: None,
            demand_mu: 2.5,
            demand_sigma: 0.6,
            seasonality: vec![0.85, 0.80, 0.90, 1.00, 1.05, 1.10, 1.15, 1.10, 1.05, 1.00, 0.95, 1.30],
            demand_noise: [0.8, 1.2],
            capacity_factor: 1.5,
            capacity_noise: 0.05,
            capacity_floor: None,
            storage_site: [5000.0, 12000.0],
            storage_dc: [8000.0, 15000.0],
        }
    }
}

impl NetworkParams {
    fn check(&self) -> Result<(), GenError> {
        for (n, r) in [
            ("site_box", self.site_box),
            ("dc_box", self.dc_box),
            ("cluster_box", self.cluster_box),
            ("transport_noise", self.transport_noise),
            ("site_efficiency", self.site_efficiency),
            ("production_noise", self.production_noise),
            ("holding_site_share", self.holding_site_share),
            ("holding_dc_share", self.holding_dc_share),
            ("demand_noise", self.demand_noise),
            ("storage_site", self.storage_site),
            ("storage_dc", self.storage_dc),
        ] {
            check_range(n, r)?;
        }
        if self.seasonality.is_empty() || self.seasonality.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(GenError::Config("seasonality must be a non-empty list of non-negative numbers".into()));
        }
        if !(self.cluster_sigma >= 0.0 && self.revenue_sigma >= 0.0 && self.demand_sigma >= 0.0) {
            return Err(GenError::Config("standard deviations must be non-negative".into()));
        }
        if !(self.capacity_noise >= 0.0 && self.capacity_noise < 1.0 && self.capacity_factor >= 0.0) {
            return Err(GenError::Config("capacity_factor must be >= 0 and capacity_noise in [0, 1)".into()));
        }
        if self.clusters == Some(0) {
            return Err(GenError::Config("clusters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipParams {
    #[serde(flatten)]
    pub network: NetworkParams,
    /// Opening cost as a multiple of the facility's mean per-period margin.
    pub opening_factor: [f64; 2],
    /// Per-period operating cost as a share of the opening cost.
    pub operating_share: [f64; 2],
    /// The base LP network has this many times the retained sites, DCs and customers.
    pub subset_ratio: usize,
}

impl Default for MipParams {
    fn default() -> Self {
        MipParams {
            network: NetworkParams::default(),
            opening_factor: [0.5, 1.5],
            operating_share: [0.05, 0.15],
            subset_ratio: 2,
        }
    }
}

/// Fully resolved dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub sites: usize,
    pub dcs: usize,
    pub customers: usize,
    pub products: usize,
    pub periods: usize,
    pub site_fanout: usize,
    pub dc_fanout: usize,
}

impl Dims {
    fn counts(&self) -> [usize; 5] {
        [self.sites, self.dcs, self.customers, self.products, self.periods]
    }

    fn to_scale(self) -> Scale {
        Scale {
            site_fanout: Some(self.site_fanout),
            dc_fanout: Some(self.dc_fanout),
            ..Scale::network(self.sites, self.dcs, self.customers, self.products, self.periods)
        }
    }
}

fn scaled_fanout(reference: f64, size: usize, full_size: f64) -> usize {
    ((reference * size as f64 / full_size).round() as usize).clamp(1, size)
}

fn resolve_dims(scale: &Scale, defaults: [usize; 5], multiplier: usize) -> Result<Dims, GenError> {
    let pick = |v: Option<usize>, d: usize| v.unwrap_or(d);
    let [i, j, k, p, t] = [
        pick(scale.sites, defaults[0]),
        pick(scale.dcs, defaults[1]),
        pick(scale.customers, defaults[2]),
        pick(scale.products, defaults[3]),
        pick(scale.periods, defaults[4]),
    ];
    if [i, j, k, p, t].contains(&0) {
        return Err(GenError::Config("network counts must be >= 1".into()));
    }
    if scale.carriers.is_some() || scale.shipments.is_some() {
        return Err(GenError::Config("carriers/shipments do not apply to network instances".into()));
    }
    let (bj, bk) = (j * multiplier, k * multiplier);
    let site_fanout = scale.site_fanout.unwrap_or_else(|| scaled_fanout(8.0, bj, 50.0));
    let dc_fanout = scale.dc_fanout.unwrap_or_else(|| scaled_fanout(20.0, bk, 500.0));
    if site_fanout == 0 || site_fanout > bj {
        return Err(GenError::Config(format!("site_fanout must be in 1..={bj}")));
    }
    if dc_fanout == 0 || dc_fanout > bk {
        return Err(GenError::Config(format!("dc_fanout must be in 1..={bk}")));
    }
    Ok(Dims { sites: i, dcs: j, customers: k, products: p, periods: t, site_fanout, dc_fanout })
}

type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Indices of `targets` ordered by distance from `from`, ties by index.
fn nearest(from: Point, targets: &[Point], candidates: &[usize], n: usize) -> Vec<usize> {
    let mut c: Vec<(f64, usize)> = candidates.iter().map(|&t| (dist(from, targets[t]), t)).collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    c.into_iter().take(n).map(|(_, t)| t).collect()
}

fn points<R: Rng>(r: &mut R, n: usize, bx: [f64; 2]) -> Vec<Point> {
    (0..n).map(|_| [uniform(r, bx), uniform(r, bx)]).collect()
}

/// In-memory network before it is rendered to tables.
#[derive(Debug, Clone)]
struct Network {
    sites: Vec<String>,
    dcs: Vec<String>,
    customers: Vec<String>,
    products: Vec<String>,
    periods: usize,
    site_pos: Vec<Point>,
    dc_pos: Vec<Point>,
    cust_pos: Vec<Point>,
    /// (site, dc, unit cost), sorted.
    site_dc: Vec<(usize, usize, f64)>,
    /// (dc, customer, unit cost), sorted.
    dc_cust: Vec<(usize, usize, f64)>,
    revenue: Vec<f64>,
    production_cost: Vec<Vec<f64>>,
    holding_site: Vec<Vec<f64>>,
    holding_dc: Vec<Vec<f64>>,
    /// (customer, product, period index, quantity), sorted.
    demand: Vec<(usize, usize, usize, u64)>,
    production_capacity: Vec<Vec<f64>>,
    throughput_capacity: Vec<Vec<f64>>,
    storage_site: Vec<f64>,
    storage_dc: Vec<f64>,
}

fn lognormal(mu: f64, sigma: f64) -> LogNormal<f64> {
    LogNormal::new(mu, sigma).expect("sigma checked non-negative")
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

fn build_network(seed: u64, d: &Dims, np: &NetworkParams, full_dims: [usize; 5]) -> Network {
    let [ni, nj, nk, np_, nt] = d.counts();
    let sites: Vec<String> = (1..=ni).map(|n| element_id("PS", n, ni, 3)).collect();
    let dcs: Vec<String> = (1..=nj).map(|n| element_id("DC", n, nj, 3)).collect();
    let customers: Vec<String> = (1..=nk).map(|n| element_id("C", n, nk, 4)).collect();
    let products: Vec<String> = (1..=np_).map(|n| element_id("P", n, np_, 3)).collect();

    let site_pos = points(&mut stream(seed, Stream::SitePos), ni, np.site_box);
    let dc_pos = points(&mut stream(seed, Stream::DcPos), nj, np.dc_box);
    let n_clusters = np.clusters.unwrap_or_else(|| nk.div_ceil(25).min(20));
    let centers = points(&mut stream(seed, Stream::ClusterCenter), n_clusters, np.cluster_box);
    let cust_pos: Vec<Point> = {
        let mut r = stream(seed, Stream::CustomerPos);
        let noise = Normal::new(0.0, np.cluster_sigma).expect("sigma checked non-negative");
        (0..nk)
            .map(|_| {
                let c = centers[r.random_range(0..n_clusters)];
                let x = (c[0] + noise.sample(&mut r)).clamp(0.0, np.grid);
                let y = (c[1] + noise.sample(&mut r)).clamp(0.0, np.grid);
                [x, y]
            })
            .collect()
    };

    let all_dcs: Vec<usize> = (0..nj).collect();
    let all_sites: Vec<usize> = (0..ni).collect();
    let all_custs: Vec<usize> = (0..nk).collect();
    let site_dc_pairs = link_pairs(&site_pos, &dc_pos, &all_sites, &all_dcs, d.site_fanout);
    let dc_cust_pairs = link_pairs(&dc_pos, &cust_pos, &all_dcs, &all_custs, d.dc_fanout);
    let site_dc = price_links(&site_dc_pairs, &site_pos, &dc_pos, np.site_dc_cost_per_distance, np.transport_noise, &mut stream(seed, Stream::SiteDcNoise));
    let dc_cust = price_links(&dc_cust_pairs, &dc_pos, &cust_pos, np.dc_customer_cost_per_distance, np.transport_noise, &mut stream(seed, Stream::DcCustomerNoise));

    let revenue: Vec<f64> = {
        let mut r = stream(seed, Stream::Revenue);
        let dist = lognormal(np.revenue_mu, np.revenue_sigma);
        (0..np_).map(|_| round2(dist.sample(&mut r))).collect()
    };
    let production_cost: Vec<Vec<f64>> = {
        let mut eff = stream(seed, Stream::Efficiency);
        let mut noise = stream(seed, Stream::ProductionNoise);
        (0..ni)
            .map(|_| {
                let e = uniform(&mut eff, np.site_efficiency);
                revenue.iter().map(|&rv| round4(e * rv * uniform(&mut noise, np.production_noise))).collect()
            })
            .collect()
    };
    let holding = |s: Stream, n: usize, share: [f64; 2]| -> Vec<Vec<f64>> {
        let mut r = stream(seed, s);
        (0..n).map(|_| revenue.iter().map(|&rv| round4(uniform(&mut r, share) * rv)).collect()).collect()
    };
    let holding_site = holding(Stream::HoldingSite, ni, np.holding_site_share);
    let holding_dc = holding(Stream::HoldingDc, nj, np.holding_dc_share);

    let demand = {
        let [lo, hi] = np.products_per_customer.unwrap_or([
            ((0.08 * np_ as f64).round() as usize).clamp(1, np_),
            ((0.16 * np_ as f64).round() as usize).clamp(1, np_),
        ]);
        let (lo, hi) = (lo.clamp(1, np_), hi.clamp(1, np_).max(lo.clamp(1, np_)));
        let mut pick = stream(seed, Stream::ProductPick);
        let mut base = stream(seed, Stream::BaseDemand);
        let mut noise = stream(seed, Stream::DemandNoise);
        let dist = lognormal(np.demand_mu, np.demand_sigma);
        let mut out = Vec::new();
        for k in 0..nk {
            let count = pick.random_range(lo..=hi);
            let mut chosen = sample(&mut pick, np_, count).into_vec();
            chosen.sort_unstable();
            for p in chosen {
                let b = dist.sample(&mut base);
                for t in 0..nt {
                    let s = np.seasonality[t % np.seasonality.len()];
                    let q = (b * s * uniform(&mut noise, np.demand_noise)).round();
                    if q > 0.0 {
                        out.push((k, p, t, q as u64));
                    }
                }
            }
        }
        out
    };

    let storage_site: Vec<f64> = {
        let mut r = stream(seed, Stream::StorageSite);
        (0..ni).map(|_| round2(uniform(&mut r, np.storage_site))).collect()
    };
    let storage_dc: Vec<f64> = {
        let mut r = stream(seed, Stream::StorageDc);
        (0..nj).map(|_| round2(uniform(&mut r, np.storage_dc))).collect()
    };

    let mut net = Network {
        sites,
        dcs,
        customers,
        products,
        periods: nt,
        site_pos,
        dc_pos,
        cust_pos,
        site_dc,
        dc_cust,
        revenue,
        production_cost,
        holding_site,
        holding_dc,
        demand,
        production_capacity: Vec::new(),
        throughput_capacity: Vec::new(),
        storage_site,
        storage_dc,
    };
    let at_full_scale = d.counts() == full_dims;
    set_capacities(&mut net, np, at_full_scale, seed, Stream::CapacityDc, Stream::CapacitySite);
    net
}

/// k-nearest links from every source, then one fallback link into every
/// target left without one.
fn link_pairs(src: &[Point], dst: &[Point], src_ids: &[usize], dst_ids: &[usize], fanout: usize) -> Vec<(usize, usize)> {
    let mut links = BTreeSet::new();
    for &s in src_ids {
        for t in nearest(src[s], dst, dst_ids, fanout) {
            links.insert((s, t));
        }
    }
    let covered: BTreeSet<usize> = links.iter().map(|&(_, t)| t).collect();
    for &t in dst_ids {
        if !covered.contains(&t) {
            let s = nearest(dst[t], src, src_ids, 1)[0];
            links.insert((s, t));
        }
    }
    links.into_iter().collect()
}

fn price_links<R: Rng>(pairs: &[(usize, usize)], src: &[Point], dst: &[Point], rate: f64, noise: [f64; 2], r: &mut R) -> Vec<(usize, usize, f64)> {
    pairs
        .iter()
        .map(|&(s, t)| (s, t, round4(rate * dist(src[s], dst[t]) * uniform(r, noise))))
        .collect()
}

/// Per-period demand reachable from each DC and each site.
fn reachable_demand(net: &Network) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (ni, nj, nk, nt) = (net.sites.len(), net.dcs.len(), net.customers.len(), net.periods);
    let mut cust = vec![vec![0.0; nt]; nk];
    for &(k, _, t, q) in &net.demand {
        cust[k][t] += q as f64;
    }
    let mut dc_custs = vec![Vec::new(); nj];
    for &(j, k, _) in &net.dc_cust {
        dc_custs[j].push(k);
    }
    let dc_d: Vec<Vec<f64>> = dc_custs
        .iter()
        .map(|ks| (0..nt).map(|t| ks.iter().map(|&k| cust[k][t]).sum()).collect())
        .collect();
    let mut site_custs = vec![BTreeSet::new(); ni];
    for &(i, j, _) in &net.site_dc {
        site_custs[i].extend(dc_custs[j].iter().copied());
    }
    let site_d: Vec<Vec<f64>> = site_custs
        .iter()
        .map(|ks| (0..nt).map(|t| ks.iter().map(|&k| cust[k][t]).sum()).collect())
        .collect();
    (site_d, dc_d)
}

fn set_capacities(net: &mut Network, np: &NetworkParams, at_full_scale: bool, seed: u64, dc_stream: Stream, site_stream: Stream) {
    let total: f64 = net.demand.iter().map(|&(.., q)| q as f64).sum();
    let floor = np
        .capacity_floor
        .unwrap_or(if at_full_scale { FULL_FLOOR } else { FULL_FLOOR * total / FULL_TOTAL_DEMAND });
    let (site_d, dc_d) = reachable_demand(net);
    let band = [1.0 - np.capacity_noise, 1.0 + np.capacity_noise];
    let cap = |d: &Vec<Vec<f64>>, s: Stream| -> Vec<Vec<f64>> {
        let mut r = stream(seed, s);
        d.iter()
            .map(|row| row.iter().map(|&x| round2((np.capacity_factor * x * uniform(&mut r, band)).max(floor))).collect())
            .collect()
    };
    net.throughput_capacity = cap(&dc_d, dc_stream);
    net.production_capacity = cap(&site_d, site_stream);
}

fn sets_table(groups: &[(&str, Vec<String>)]) -> Table {
    let rows = groups
        .iter()
        .flat_map(|(name, els)| els.iter().map(move |e| vec![name.to_string(), e.clone()]))
        .collect::<Vec<_>>();
    Table::from_rows(&["set_name", "element"], &rows)
}

fn period_ids(n: usize) -> Vec<String> {
    (1..=n).map(|t| t.to_string()).collect()
}

/// Column names that differ between the LP and MIP file layouts.
struct Layout {
    period: &'static str,
    demand: &'static str,
    site_dc: (&'static str, [&'static str; 2]),
    dc_cust: (&'static str, [&'static str; 2]),
}

const LP_LAYOUT: Layout = Layout {
    period: "period",
    demand: "demand_quantity",
    site_dc: ("transport_cost_site_to_dc", ["from_site_id", "to_dc_id"]),
    dc_cust: ("transport_cost_dc_to_customer", ["from_dc_id", "to_customer_id"]),
};

const MIP_LAYOUT: Layout = Layout {
    period: "period_id",
    demand: "demand",
    site_dc: ("transport_cost_prod_to_dc", ["site_id", "dc_id"]),
    dc_cust: ("transport_cost_dc_to_cust", ["dc_id", "customer_id"]),
};

fn render(net: &Network, l: &Layout) -> DataStore {
    let periods = period_ids(net.periods);
    let mut s = DataStore::new();
    s.insert(
        "sets",
        sets_table(&[
            ("production_sites", net.sites.clone()),
            ("distribution_centers", net.dcs.clone()),
            ("customers", net.customers.clone()),
            ("products", net.products.clone()),
            ("periods", periods.clone()),
        ]),
    );
    let rows: Vec<Vec<String>> = net
        .demand
        .iter()
        .map(|&(k, p, t, q)| vec![net.customers[k].clone(), net.products[p].clone(), periods[t].clone(), q.to_string()])
        .collect();
    s.insert("demand", Table::from_rows(&["customer_id", "product_id", l.period, l.demand], &rows));

    let per_period = |ids: &[String], v: &[Vec<f64>]| -> Vec<Vec<String>> {
        ids.iter()
            .zip(v)
            .flat_map(|(id, row)| row.iter().enumerate().map(move |(t, &c)| vec![id.clone(), (t + 1).to_string(), fmt_fixed(c, 2)]))
            .collect()
    };
    s.insert("production_capacity", Table::from_rows(&["site_id", l.period, "capacity"], &per_period(&net.sites, &net.production_capacity)));
    s.insert("throughput_capacity", Table::from_rows(&["dc_id", l.period, "capacity"], &per_period(&net.dcs, &net.throughput_capacity)));

    let single = |ids: &[String], v: &[f64], digits: usize| -> Vec<Vec<String>> {
        ids.iter().zip(v).map(|(id, &c)| vec![id.clone(), fmt_fixed(c, digits)]).collect()
    };
    s.insert("storage_capacity_sites", Table::from_rows(&["site_id", "capacity"], &single(&net.sites, &net.storage_site, 2)));
    s.insert("storage_capacity_dcs", Table::from_rows(&["dc_id", "capacity"], &single(&net.dcs, &net.storage_dc, 2)));

    let by_product = |ids: &[String], v: &[Vec<f64>]| -> Vec<Vec<String>> {
        ids.iter()
            .zip(v)
            .flat_map(|(id, row)| row.iter().zip(&net.products).map(move |(&c, p)| vec![id.clone(), p.clone(), fmt_fixed(c, 4)]))
            .collect()
    };
    s.insert("production_cost", Table::from_rows(&["site_id", "product_id", "unit_cost"], &by_product(&net.sites, &net.production_cost)));
    s.insert("holding_cost_sites", Table::from_rows(&["site_id", "product_id", "unit_cost"], &by_product(&net.sites, &net.holding_site)));
    s.insert("holding_cost_dcs", Table::from_rows(&["dc_id", "product_id", "unit_cost"], &by_product(&net.dcs, &net.holding_dc)));

    let links = |v: &[(usize, usize, f64)], a: &[String], b: &[String]| -> Vec<Vec<String>> {
        v.iter().map(|&(x, y, c)| vec![a[x].clone(), b[y].clone(), fmt_fixed(c, 4)]).collect()
    };
    let (name, cols) = &l.site_dc;
    s.insert(*name, Table::from_rows(&[cols[0], cols[1], "unit_cost"], &links(&net.site_dc, &net.sites, &net.dcs)));
    let (name, cols) = &l.dc_cust;
    s.insert(*name, Table::from_rows(&[cols[0], cols[1], "unit_cost"], &links(&net.dc_cust, &net.dcs, &net.customers)));

    s.insert("revenue", Table::from_rows(&["product_id", "unit_revenue"], &single(&net.products, &net.revenue, 2)));
    s
}

fn resolved(cfg: &GenConfig, dims: &Dims, params: &impl Serialize) -> serde_json::Value {
    json!({
        "family": cfg.family.as_str(),
        "seed": cfg.seed,
        "scale": dims.to_scale(),
        "params": params,
    })
}

pub fn gen_lp_network(cfg: &GenConfig) -> Result<Instance, GenError> {
    let params: NetworkParams = merge_params(&NetworkParams::default(), &cfg.overrides)?;
    params.check()?;
    let dims = resolve_dims(&cfg.scale, LP_FULL_DIMS, 1)?;
    let net = build_network(cfg.seed, &dims, &params, LP_FULL_DIMS);
    Ok(Instance { family: Family::LpNetwork, store: render(&net, &LP_LAYOUT), resolved: resolved(cfg, &dims, &params) })
}

pub fn gen_mip_network(cfg: &GenConfig) -> Result<Instance, GenError> {
    gen_mip_network_with_base(cfg).map(|(_, mip)| mip)
}

/// The MIP instance together with the LP-layout base network it was cut from.
pub fn gen_mip_network_with_base(cfg: &GenConfig) -> Result<(Instance, Instance), GenError> {
    let params: MipParams = merge_params(&MipParams::default(), &cfg.overrides)?;
    params.network.check()?;
    check_range("opening_factor", params.opening_factor)?;
    check_range("operating_share", params.operating_share)?;
    if params.subset_ratio == 0 {
        return Err(GenError::Config("subset_ratio must be >= 1".into()));
    }
    let m = params.subset_ratio;
    let dims = resolve_dims(&cfg.scale, MIP_FULL_DIMS, m)?;
    let base_dims = Dims { sites: dims.sites * m, dcs: dims.dcs * m, customers: dims.customers * m, ..dims };
    let base = build_network(cfg.seed, &base_dims, &params.network, LP_FULL_DIMS);
    let sub = subset(&base, &dims, &params.network, cfg.seed);
    let mut store = render(&sub, &MIP_LAYOUT);
    add_facility_costs(&mut store, &sub, &params, cfg.seed);

    let big_m = sub
        .throughput_capacity
        .iter()
        .zip(&sub.storage_dc)
        .flat_map(|(row, &s)| row.iter().map(move |&c| c + s))
        .fold(0.0, f64::max);
    store.insert("bigM", Table::from_rows(&["bigM"], &[vec![fmt_fixed(big_m, 2)]]));
    store.insert("initial_inventory_sites", Table::from_rows(&["site_id", "product_id", "quantity"], &[]));
    store.insert("initial_inventory_dcs", Table::from_rows(&["dc_id", "product_id", "quantity"], &[]));

    let base_inst = Instance {
        family: Family::LpNetwork,
        store: render(&base, &LP_LAYOUT),
        resolved: json!({"family": "lp_network", "seed": cfg.seed, "scale": base_dims.to_scale(), "params": &params.network}),
    };
    let mip = Instance { family: Family::MipNetwork, store, resolved: resolved(cfg, &dims, &params) };
    Ok((base_inst, mip))
}

fn pick_sorted(seed: u64, s: Stream, from: usize, n: usize) -> Vec<usize> {
    let mut v = sample(&mut stream(seed, s), from, n).into_vec();
    v.sort_unstable();
    v
}

/// Keeps a uniform sample of sites, DCs and customers with their links,
/// repairs coverage, and recomputes capacities on the subset.
fn subset(base: &Network, d: &Dims, np: &NetworkParams, seed: u64) -> Network {
    let si = pick_sorted(seed, Stream::SubsetSites, base.sites.len(), d.sites);
    let sj = pick_sorted(seed, Stream::SubsetDcs, base.dcs.len(), d.dcs);
    let sk = pick_sorted(seed, Stream::SubsetCustomers, base.customers.len(), d.customers);
    let remap = |keep: &[usize], n: usize| {
        let mut m = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            m[old] = new;
        }
        m
    };
    let (mi, mj, mk) = (remap(&si, base.sites.len()), remap(&sj, base.dcs.len()), remap(&sk, base.customers.len()));
    let site_pos: Vec<Point> = si.iter().map(|&i| base.site_pos[i]).collect();
    let dc_pos: Vec<Point> = sj.iter().map(|&j| base.dc_pos[j]).collect();
    let cust_pos: Vec<Point> = sk.iter().map(|&k| base.cust_pos[k]).collect();

    let mut site_dc: Vec<(usize, usize, f64)> = base
        .site_dc
        .iter()
        .filter(|&&(i, j, _)| mi[i] != usize::MAX && mj[j] != usize::MAX)
        .map(|&(i, j, c)| (mi[i], mj[j], c))
        .collect();
    let mut dc_cust: Vec<(usize, usize, f64)> = base
        .dc_cust
        .iter()
        .filter(|&&(j, k, _)| mj[j] != usize::MAX && mk[k] != usize::MAX)
        .map(|&(j, k, c)| (mj[j], mk[k], c))
        .collect();

    let mut r = stream(seed, Stream::SubsetCustomers);
    let all_j: Vec<usize> = (0..sj.len()).collect();
    let all_i: Vec<usize> = (0..si.len()).collect();
    let served: BTreeSet<usize> = dc_cust.iter().map(|l| l.1).collect();
    for k in 0..sk.len() {
        if !served.contains(&k) {
            let j = nearest(cust_pos[k], &dc_pos, &all_j, 1)[0];
            let c = round4(np.dc_customer_cost_per_distance * dist(dc_pos[j], cust_pos[k]) * uniform(&mut r, np.transport_noise));
            dc_cust.push((j, k, c));
        }
    }
    let fed: BTreeSet<usize> = site_dc.iter().map(|l| l.1).collect();
    for j in 0..sj.len() {
        if !fed.contains(&j) {
            let i = nearest(dc_pos[j], &site_pos, &all_i, 1)[0];
            let c = round4(np.site_dc_cost_per_distance * dist(site_pos[i], dc_pos[j]) * uniform(&mut r, np.transport_noise));
            site_dc.push((i, j, c));
        }
    }
    // every retained facility keeps at least one outgoing link
    let all_k: Vec<usize> = (0..sk.len()).collect();
    let serving: BTreeSet<usize> = dc_cust.iter().map(|l| l.0).collect();
    for j in 0..sj.len() {
        if !serving.contains(&j) {
            let k = nearest(dc_pos[j], &cust_pos, &all_k, 1)[0];
            let c = round4(np.dc_customer_cost_per_distance * dist(dc_pos[j], cust_pos[k]) * uniform(&mut r, np.transport_noise));
            dc_cust.push((j, k, c));
        }
    }
    let feeding: BTreeSet<usize> = site_dc.iter().map(|l| l.0).collect();
    for i in 0..si.len() {
        if !feeding.contains(&i) {
            let j = nearest(site_pos[i], &dc_pos, &all_j, 1)[0];
            let c = round4(np.site_dc_cost_per_distance * dist(site_pos[i], dc_pos[j]) * uniform(&mut r, np.transport_noise));
            site_dc.push((i, j, c));
        }
    }
    site_dc.sort_by_key(|l| (l.0, l.1));
    dc_cust.sort_by_key(|l| (l.0, l.1));

    let demand = base
        .demand
        .iter()
        .filter(|&&(k, ..)| mk[k] != usize::MAX)
        .map(|&(k, p, t, q)| (mk[k], p, t, q))
        .collect();
    let mut net = Network {
        sites: si.iter().map(|&i| base.sites[i].clone()).collect(),
        dcs: sj.iter().map(|&j| base.dcs[j].clone()).collect(),
        customers: sk.iter().map(|&k| base.customers[k].clone()).collect(),
        products: base.products.clone(),
        periods: base.periods,
        site_pos,
        dc_pos,
        cust_pos,
        site_dc,
        dc_cust,
        revenue: base.revenue.clone(),
        production_cost: si.iter().map(|&i| base.production_cost[i].clone()).collect(),
        holding_site: si.iter().map(|&i| base.holding_site[i].clone()).collect(),
        holding_dc: sj.iter().map(|&j| base.holding_dc[j].clone()).collect(),
        demand,
        production_capacity: Vec::new(),
        throughput_capacity: Vec::new(),
        storage_site: si.iter().map(|&i| base.storage_site[i]).collect(),
        storage_dc: sj.iter().map(|&j| base.storage_dc[j]).collect(),
    };
    let at_full_scale = d.counts() == MIP_FULL_DIMS;
    set_capacities(&mut net, np, at_full_scale, seed, Stream::SubsetCapacityDc, Stream::SubsetCapacitySite);
    net
}

/// Opening cost = U(opening_factor) · mean per-period margin the facility
/// serves; operating cost = U(operating_share) · opening cost.
fn add_facility_costs(store: &mut DataStore, net: &Network, mp: &MipParams, seed: u64) {
    let (ni, nj, nk) = (net.sites.len(), net.dcs.len(), net.customers.len());
    let nt = net.periods as f64;
    let mut dcs_of = vec![Vec::new(); nk];
    for &(j, k, _) in &net.dc_cust {
        dcs_of[k].push(j);
    }
    let mut sites_of_dc = vec![Vec::new(); nj];
    for &(i, j, _) in &net.site_dc {
        sites_of_dc[j].push(i);
    }
    let mut sites_of = vec![BTreeSet::new(); nk];
    for (k, js) in dcs_of.iter().enumerate() {
        for &j in js {
            sites_of[k].extend(sites_of_dc[j].iter().copied());
        }
    }
    let avg_cost: Vec<f64> = (0..net.products.len())
        .map(|p| net.production_cost.iter().map(|row| row[p]).sum::<f64>() / ni as f64)
        .collect();
    let mut site_margin = vec![0.0; ni];
    let mut dc_margin = vec![0.0; nj];
    for &(k, p, _, q) in &net.demand {
        let q = q as f64;
        if !sites_of[k].is_empty() {
            let n = sites_of[k].len() as f64;
            for &i in &sites_of[k] {
                site_margin[i] += q * (net.revenue[p] - net.production_cost[i][p]) / n;
            }
        }
        if !dcs_of[k].is_empty() {
            let n = dcs_of[k].len() as f64;
            for &j in &dcs_of[k] {
                dc_margin[j] += q * (net.revenue[p] - avg_cost[p]) / n;
            }
        }
    }
    let costs = |margin: &[f64], open_s: Stream, op_s: Stream| -> (Vec<f64>, Vec<f64>) {
        let mut ro = stream(seed, open_s);
        let mut rp = stream(seed, op_s);
        let open: Vec<f64> = margin.iter().map(|&m| round2(uniform(&mut ro, mp.opening_factor) * (m / nt).max(0.0))).collect();
        let op = open.iter().map(|&o| round2(uniform(&mut rp, mp.operating_share) * o)).collect();
        (open, op)
    };
    let (open_site, op_site) = costs(&site_margin, Stream::OpeningSite, Stream::OperatingSite);
    let (open_dc, op_dc) = costs(&dc_margin, Stream::OpeningDc, Stream::OperatingDc);
    let rows = |ids: &[String], v: &[f64]| -> Vec<Vec<String>> { ids.iter().zip(v).map(|(id, &c)| vec![id.clone(), fmt_fixed(c, 2)]).collect() };
    store.insert("fixed_cost_open_sites", Table::from_rows(&["site_id", "cost"], &rows(&net.sites, &open_site)));
    store.insert("fixed_cost_open_dcs", Table::from_rows(&["dc_id", "cost"], &rows(&net.dcs, &open_dc)));
    store.insert("operating_cost_sites", Table::from_rows(&["site_id", "cost"], &rows(&net.sites, &op_site)));
    store.insert("operating_cost_dcs", Table::from_rows(&["dc_id", "cost"], &rows(&net.dcs, &op_dc)));
}
