//! Synthetic benchmark generator: two informative polar-coordinate
//! features plus Gaussian noise features, with labeled inliers/outliers
//! and three crafted test-outlier families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{default_feature_names, DataMatrix};
use crate::error::{Error, Result};

/// Inliers draw their radius from U(0, INLIER_RADIUS_MAX).
pub const INLIER_RADIUS_MAX: f64 = 3.0;
/// Outliers draw their radius from U(OUTLIER_RADIUS_MIN, OUTLIER_RADIUS_MAX).
pub const OUTLIER_RADIUS_MIN: f64 = 4.0;
pub const OUTLIER_RADIUS_MAX: f64 = 30.0;

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub anomaly_fraction: f64,
    /// Number of white-noise features; total dimensionality is p_noise + 2.
    pub p_noise: usize,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "anomaly_fraction must lie in (0, 1), got {}",
                self.anomaly_fraction
            )));
        }
        Ok(())
    }

    /// Number of outlier rows: round-half-up of n * fraction.
    pub fn n_outliers(&self) -> usize {
        (self.n as f64 * self.anomaly_fraction + 0.5).floor() as usize
    }

    /// Dataset name in the `{cardinality}_{anomalies}_{p_noise}` convention,
    /// e.g. `1k_10_4` for n=1000, 10% anomalies, 4 noise features.
    pub fn name(&self) -> String {
        let cardinality = if self.n.is_multiple_of(1000) {
            format!("{}k", self.n / 1000)
        } else {
            self.n.to_string()
        };
        let pct = (self.anomaly_fraction * 100.0).round() as u32;
        format!("{cardinality}_{pct}_{}", self.p_noise)
    }
}

// Stream ids for the per-purpose RNGs. Radius, angle and noise use
// disjoint ChaCha streams so changing p_noise leaves the informative
// coordinates untouched.
const STREAM_RADIUS: u64 = 0;
const STREAM_ANGLE: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate a labeled dataset: inlier rows first, then the outlier rows.
///
/// Every row is [rho cos(theta), rho sin(theta), n_1, ..., n_{p-2}] with
/// theta ~ U(0, 2pi), rho ~ U(0, 3) for inliers and U(4, 30) for
/// outliers, and standard normal noise features.
pub fn generate(spec: &SynthSpec) -> Result<(DataMatrix, Vec<u8>)> {
    spec.validate()?;
    let n_out = spec.n_outliers();
    let n_in = spec.n - n_out;
    let p = spec.p_noise + 2;

    let mut radius_rng = stream_rng(spec.seed, STREAM_RADIUS);
    let mut angle_rng = stream_rng(spec.seed, STREAM_ANGLE);
    let mut noise_rng = stream_rng(spec.seed, STREAM_NOISE);

    let mut values = Vec::with_capacity(spec.n * p);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let outlier = i >= n_in;
        let rho = if outlier {
            radius_rng.random_range(OUTLIER_RADIUS_MIN..OUTLIER_RADIUS_MAX)
        } else {
            radius_rng.random_range(0.0..INLIER_RADIUS_MAX)
        };
        let theta = angle_rng.random_range(0.0..std::f64::consts::TAU);
        values.push(rho * theta.cos());
        values.push(rho * theta.sin());
        for _ in 0..spec.p_noise {
            values.push(noise_rng.sample(StandardNormal));
        }
        labels.push(u8::from(outlier));
    }

    let data = DataMatrix::new(spec.n, p, values, default_feature_names(p))?;
    Ok((data, labels))
}

/// The three crafted test-outlier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierFamily {
    XAxis,
    YAxis,
    Bisector,
}

impl OutlierFamily {
    pub const ALL: [OutlierFamily; 3] =
        [OutlierFamily::XAxis, OutlierFamily::YAxis, OutlierFamily::Bisector];

    pub fn as_str(&self) -> &'static str {
        match self {
            OutlierFamily::XAxis => "x_axis",
            OutlierFamily::YAxis => "y_axis",
            OutlierFamily::Bisector => "bisector",
        }
    }
}

impl std::fmt::Display for OutlierFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Generate crafted test outliers: `count_per_family` points lying on
/// the x-axis, the y-axis, and the bisector of the full feature space,
/// in that row order. Radii come from the outlier range and signs
/// alternate within each family; every coordinate off the point's line
/// (noise features included) is exactly zero.
pub fn generate_test_outliers(
    count_per_family: usize,
    seed: u64,
    p_noise: usize,
) -> Result<(DataMatrix, Vec<OutlierFamily>)> {
    if count_per_family < 1 {
        return Err(Error::InvalidArgument("count_per_family must be at least 1".into()));
    }
    let p = p_noise + 2;
    let n = 3 * count_per_family;

    let mut radius_rng = stream_rng(seed, STREAM_RADIUS);

    let mut values = Vec::with_capacity(n * p);
    let mut families = Vec::with_capacity(n);
    for family in OutlierFamily::ALL {
        for k in 0..count_per_family {
            let rho = radius_rng.random_range(OUTLIER_RADIUS_MIN..OUTLIER_RADIUS_MAX);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let (x1, x2) = match family {
                OutlierFamily::XAxis => (sign * rho, 0.0),
                OutlierFamily::YAxis => (0.0, sign * rho),
                // Equal coordinates keep |x1| = |x2| exact while the
                // radius stays rho.
                OutlierFamily::Bisector => {
                    let d = sign * rho / std::f64::consts::SQRT_2;
                    (d, d)
                }
            };
            values.push(x1);
            values.push(x2);
            values.extend(std::iter::repeat_n(0.0, p_noise));
            families.push(family);
        }
    }

    let data = DataMatrix::new(n, p, values, default_feature_names(p))?;
    Ok((data, families))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_sized_dataset_counts() {
        let spec = SynthSpec { n: 1000, anomaly_fraction: 0.10, p_noise: 4, seed: 7 };
        let (data, labels) = generate(&spec).unwrap();
        assert_eq!(data.n_rows(), 1000);
        assert_eq!(data.n_cols(), 6);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 900);
        assert_eq!(spec.name(), "1k_10_4");
    }

    #[test]
    fn radial_bands_are_respected() {
        let spec = SynthSpec { n: 500, anomaly_fraction: 0.2, p_noise: 2, seed: 3 };
        let (data, labels) = generate(&spec).unwrap();
        for (row, &label) in data.rows().zip(&labels) {
            let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
            if label == 0 {
                assert!(r <= INLIER_RADIUS_MAX + 1e-12);
            } else {
                assert!((OUTLIER_RADIUS_MIN - 1e-12..=OUTLIER_RADIUS_MAX + 1e-12).contains(&r));
            }
        }
    }

    #[test]
    fn noise_columns_concentrate_around_zero() {
        let spec = SynthSpec { n: 2000, anomaly_fraction: 0.1, p_noise: 3, seed: 11 };
        let (data, _) = generate(&spec).unwrap();
        let bound = 4.0 / (data.n_rows() as f64).sqrt();
        for j in 2..data.n_cols() {
            let mean: f64 =
                data.rows().map(|row| row[j]).sum::<f64>() / data.n_rows() as f64;
            assert!(mean.abs() < bound, "column {j} mean {mean} exceeds {bound}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec { n: 100, anomaly_fraction: 0.1, p_noise: 4, seed: 42 };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn noise_dimension_count_does_not_perturb_informative_columns() {
        let a = SynthSpec { n: 200, anomaly_fraction: 0.1, p_noise: 4, seed: 9 };
        let b = SynthSpec { p_noise: 8, ..a };
        let (da, _) = generate(&a).unwrap();
        let (db, _) = generate(&b).unwrap();
        for i in 0..200 {
            assert_eq!(da.get(i, 0).to_bits(), db.get(i, 0).to_bits());
            assert_eq!(da.get(i, 1).to_bits(), db.get(i, 1).to_bits());
        }
    }

    #[test]
    fn outlier_count_rounding_is_half_up() {
        let spec = SynthSpec { n: 10, anomaly_fraction: 0.25, p_noise: 0, seed: 0 };
        // 10 * 0.25 = 2.5 rounds half-up to 3.
        assert_eq!(spec.n_outliers(), 3);
        let (_, labels) = generate(&spec).unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 3);
    }

    #[test]
    fn test_outlier_families_have_exact_geometry() {
        let (data, families) = generate_test_outliers(100, 5, 4).unwrap();
        assert_eq!(data.n_rows(), 300);
        assert_eq!(families.len(), 300);
        let mut saw_negative = [false; 3];
        for (row, family) in data.rows().zip(&families) {
            let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
            assert!((OUTLIER_RADIUS_MIN - 1e-9..=OUTLIER_RADIUS_MAX + 1e-9).contains(&r));
            // Off-line coordinates, noise features included, are exactly zero.
            assert!(row[2..].iter().all(|&v| v == 0.0));
            match family {
                OutlierFamily::XAxis => {
                    assert_eq!(row[1], 0.0);
                    saw_negative[0] |= row[0] < 0.0;
                }
                OutlierFamily::YAxis => {
                    assert_eq!(row[0], 0.0);
                    saw_negative[1] |= row[1] < 0.0;
                }
                OutlierFamily::Bisector => {
                    assert_eq!(row[0].abs().to_bits(), row[1].abs().to_bits());
                    saw_negative[2] |= row[0] < 0.0;
                }
            }
        }
        // Signs alternate, so both diagonals and both half-axes appear.
        assert!(saw_negative.iter().all(|&s| s));
    }
}
