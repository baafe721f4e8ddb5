//! Deterministic synthetic load datasets.
//!
//! Stands in for real city-level consumption data: a linear trend plus a
//! fixed seasonal profile, a temperature-anomaly effect carried by the
//! temperature features, and white measurement noise. Everything is driven
//! by one seed, so a dataset is reproducible byte for byte from its manifest.
//!
//! Generative formula (documented for run manifests):
//!
//! ```text
//! load[t] = BASE_LEVEL + TREND_SLOPE * t
//!         + SEASON_PROFILE[month(t)]
//!         + TEMP_COEFF * anomaly[t]
//!         + eps[t],           eps ~ N(0, noise_sd)
//! anomaly[t] = AR_PHI * anomaly[t-1] + innovation[t]   (stationary sd ANOMALY_SD)
//! avg_temp[t] = TEMP_BASE - TEMP_AMPLITUDE * cos(2*pi*(month(t)-1)/12) + anomaly[t]
//! ```
//!
//! With `noise_sd = 0` the load column is exactly re-derivable from the
//! `avg_temp` column and these constants.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::series::{FeatureMatrix, MonthlySeries, YearMonth};
use crate::{Error, Result};

pub const BASE_LEVEL: f64 = 1000.0;
pub const TREND_SLOPE: f64 = 2.0;
pub const TEMP_COEFF: f64 = 5.0;
pub const TEMP_BASE: f64 = 16.0;
pub const TEMP_AMPLITUDE: f64 = 11.0;
pub const AR_PHI: f64 = 0.75;
pub const ANOMALY_SD: f64 = 5.0;

/// Fixed month-of-year load profile (January first, sums to zero).
pub const SEASON_PROFILE: [f64; 12] = [
    38.0, 12.0, -24.0, -48.0, -36.0, 6.0, 52.0, 64.0, 18.0, -30.0, -42.0, -10.0,
];

const HOLIDAY_COUNT: [f64; 12] = [3.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0];

/// The canonical feature schema, in column order.
pub const FEATURE_NAMES: [&str; 12] = [
    "off_days",
    "avg_temp",
    "max_temp",
    "min_temp",
    "humidity",
    "wind_speed",
    "rainfall",
    "air_pressure",
    "cloudiness",
    "month_sin",
    "month_cos",
    "holiday_count",
];

/// Generation request; serialized into run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub years: usize,
    pub noise_sd: f64,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two uniform draws
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates `years * 12` months of load and the canonical feature columns,
/// ending in December of the year before generation-time convention year
/// 2022 (nine years span Jan 2013 .. Dec 2021).
pub fn generate(config: &SynthConfig) -> Result<(MonthlySeries, FeatureMatrix)> {
    if config.years < 3 {
        return Err(Error::config("synthetic datasets need at least 3 years"));
    }
    if !(config.noise_sd >= 0.0 && config.noise_sd.is_finite()) {
        return Err(Error::config("noise_sd must be finite and non-negative"));
    }
    let n = config.years * 12;
    let start = YearMonth::new(2022 - config.years as i32, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); FEATURE_NAMES.len()];
    let mut load = Vec::with_capacity(n);
    let innovation_sd = ANOMALY_SD * (1.0 - AR_PHI * AR_PHI).sqrt();
    let mut anomaly = standard_normal(&mut rng) * ANOMALY_SD;

    for t in 0..n {
        let month = start.plus_months(t as i64).month;
        let phase = std::f64::consts::TAU * f64::from(month - 1) / 12.0;

        anomaly = AR_PHI * anomaly + innovation_sd * standard_normal(&mut rng);
        let avg_temp = TEMP_BASE - TEMP_AMPLITUDE * phase.cos() + anomaly;
        let spread = 6.0 + rng.random_range(0.0..2.0);
        let off_days = 8.0
            + f64::from(rng.random_range(0..3u8))
            + if month == 1 || month == 10 { 2.0 } else { 0.0 };
        let humidity = 62.0 + 14.0 * (phase + 1.1).sin() + 3.0 * standard_normal(&mut rng);
        let wind_speed = 3.2 + 1.1 * (phase + 2.3).sin() + 0.4 * standard_normal(&mut rng);
        let rainfall =
            (85.0 + 60.0 * (phase + 2.0).sin() + 15.0 * standard_normal(&mut rng)).max(0.0);
        let air_pressure = 1013.0 + 6.0 * (phase + 0.3).cos() + 1.2 * standard_normal(&mut rng);
        let cloudiness =
            (52.0 + 18.0 * (phase + 0.7).sin() + 8.0 * standard_normal(&mut rng)).clamp(0.0, 100.0);

        let values = [
            off_days,
            avg_temp,
            avg_temp + spread,
            avg_temp - spread,
            humidity,
            wind_speed,
            rainfall,
            air_pressure,
            cloudiness,
            phase.sin(),
            phase.cos(),
            HOLIDAY_COUNT[usize::from(month - 1)],
        ];
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }

        let eps = config.noise_sd * standard_normal(&mut rng);
        load.push(
            BASE_LEVEL
                + TREND_SLOPE * t as f64
                + SEASON_PROFILE[usize::from(month - 1)]
                + TEMP_COEFF * anomaly
                + eps,
        );
    }

    let series = MonthlySeries::new(start, load)?;
    let features = FeatureMatrix::new(
        start,
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        columns,
    )?;
    Ok((series, features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::dataset_to_csv;

    #[test]
    fn nine_year_dataset_shape() {
        let (load, feats) = generate(&SynthConfig {
            seed: 42,
            years: 9,
            noise_sd: 22.0,
        })
        .unwrap();
        assert_eq!(load.len(), 108);
        assert_eq!(load.start(), YearMonth::new(2013, 1).unwrap());
        assert_eq!(load.end(), YearMonth::new(2021, 12).unwrap());
        assert_eq!(feats.names().len(), 12);
        assert_eq!(feats.names()[0], "off_days");
        let csv = dataset_to_csv(&load, &feats).unwrap();
        assert!(csv.starts_with("date,load,off_days,avg_temp,"));
    }

    #[test]
    fn zero_noise_load_rederivable_from_temperature_column() {
        let (load, feats) = generate(&SynthConfig {
            seed: 7,
            years: 4,
            noise_sd: 0.0,
        })
        .unwrap();
        let temp = feats.column("avg_temp").unwrap();
        for (t, (month, value)) in load.iter().enumerate() {
            let phase = std::f64::consts::TAU * f64::from(month.month - 1) / 12.0;
            let anomaly = temp[t] - (TEMP_BASE - TEMP_AMPLITUDE * phase.cos());
            let expect = BASE_LEVEL
                + TREND_SLOPE * t as f64
                + SEASON_PROFILE[usize::from(month.month - 1)]
                + TEMP_COEFF * anomaly;
            assert!((value - expect).abs() < 1e-9, "month {month}");
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            seed: 42,
            years: 9,
            noise_sd: 22.0,
        };
        let (l1, f1) = generate(&cfg).unwrap();
        let (l2, f2) = generate(&cfg).unwrap();
        let (a, b) = (
            dataset_to_csv(&l1, &f1).unwrap(),
            dataset_to_csv(&l2, &f2).unwrap(),
        );
        assert_eq!(a, b);
        let (l3, f3) = generate(&SynthConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, dataset_to_csv(&l3, &f3).unwrap());
    }

    #[test]
    fn rejects_too_few_years() {
        assert!(generate(&SynthConfig {
            seed: 1,
            years: 2,
            noise_sd: 1.0
        })
        .is_err());
    }

    #[test]
    fn noise_scale_is_near_two_percent_of_mean_on_reference_config() {
        let (load, _) = generate(&SynthConfig {
            seed: 42,
            years: 9,
            noise_sd: 22.0,
        })
        .unwrap();
        let mean = load.values().iter().sum::<f64>() / load.len() as f64;
        let ratio = 22.0 / mean;
        assert!((0.015..0.025).contains(&ratio), "noise/mean ratio {ratio}");
    }
}
