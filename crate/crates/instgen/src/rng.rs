//! Per-field random streams.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`), keyed by the config
//! seed. Each data field owns a fixed 64-bit stream id; the stream's block
//! counter starts at zero, so a field's draws depend only on the seed, the
//! stream id and the scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    SitePos = 1,
    DcPos = 2,
    ClusterCenter = 3,
    CustomerPos = 4,
    SiteDcNoise = 5,
    DcCustomerNoise = 6,
    Revenue = 7,
    Efficiency = 8,
    ProductionNoise = 9,
    HoldingSite = 10,
    HoldingDc = 11,
    ProductPick = 12,
    BaseDemand = 13,
    DemandNoise = 14,
    CapacityDc = 15,
    CapacitySite = 16,
    StorageSite = 17,
    StorageDc = 18,

    SubsetSites = 30,
    SubsetDcs = 31,
    SubsetCustomers = 32,
    SubsetCapacityDc = 33,
    SubsetCapacitySite = 34,
    OpeningSite = 35,
    OpeningDc = 36,
    OperatingSite = 37,
    OperatingDc = 38,

    CarrierPos = 50,
    ShipmentPos = 51,
    CarrierRate = 52,
    CarrierHandling = 53,
    Weight = 54,
    PriceFactor = 55,
    HandlingFee = 56,
    PairNoise = 57,
    CarrierCapacity = 58,
}

pub fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(s as u64);
    r
}

/// Uniform on `[lo, hi)`, or `lo` when the range is empty.
pub fn uniform<R: Rng>(r: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        r.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}
