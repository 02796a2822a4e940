//! Benchmark fixtures shared by the criterion targets.

use meterguard_core::{PriceBlock, SystemConfig, TariffSchedule};

/// Economy-7 style two-block day at 30-minute resolution, 2.1 kWh per unit.
pub fn economy7() -> (SystemConfig, TariffSchedule) {
    let cfg = SystemConfig::new(2, 1, 0, 48).expect("valid config");
    let tariff = TariffSchedule::expand(
        &[PriceBlock::new(0.3192, 14), PriceBlock::new(0.1791, 34)],
        cfg.n,
    )
    .expect("valid tariff");
    (cfg, tariff)
}
