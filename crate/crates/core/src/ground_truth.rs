//! Ground-truth conditional CDFs `F(r | config) = P(|z - o| <= r)`.
//!
//! Two sources are provided: pooled trajectory z-coordinates (the empirical
//! fraction of ions within `r` of the channel center) and a closed-form
//! synthetic CDF that stands in for simulation data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::ChannelConfig;
use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Slack allowed beyond the half-width when validating trajectory coordinates, nm.
pub const WALL_TOLERANCE: f64 = 0.05;

/// Queryable ground truth for any supported configuration.
pub trait CdfSource: Sync {
    fn cdf(&self, config: &ChannelConfig, r: f64) -> Result<f64>;

    fn cdf_many(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        rs.iter().map(|&r| self.cdf(config, r)).collect()
    }
}

/// Pooled ion z-coordinates of one configuration (all recorded frames).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySlab {
    pub config: ChannelConfig,
    /// z-coordinate of the channel center, nm
    pub center: f64,
    /// nm
    pub z_coords: Vec<f64>,
}

impl TrajectorySlab {
    pub fn new(config: ChannelConfig, center: f64, z_coords: Vec<f64>) -> Result<Self> {
        if z_coords.is_empty() {
            return Err(Error::Empty("trajectory slab"));
        }
        let limit = config.half_width() + WALL_TOLERANCE;
        if let Some((i, z)) = z_coords
            .iter()
            .enumerate()
            .find(|(_, z)| !((*z - center).abs() <= limit))
        {
            return Err(Error::OutOfRange(format!(
                "coordinate #{i} z={z} lies outside the channel (|z-o| > {limit} nm)"
            )));
        }
        Ok(Self {
            config,
            center,
            z_coords,
        })
    }

    /// `|z - o|` for every coordinate, ascending.
    pub fn sorted_distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self
            .z_coords
            .iter()
            .map(|z| (z - self.center).abs())
            .collect();
        d.sort_by(f64::total_cmp);
        d
    }
}

/// Fraction of pooled coordinates with `|z - o| <= r`, counted directly.
pub fn empirical_cdf(slab: &TrajectorySlab, r: f64) -> Result<f64> {
    if slab.z_coords.is_empty() {
        return Err(Error::Empty("trajectory slab"));
    }
    if !(r >= 0.0) {
        return Err(Error::OutOfRange(format!("r must be >= 0, got {r}")));
    }
    let within = slab
        .z_coords
        .iter()
        .filter(|z| (*z - slab.center).abs() <= r)
        .count();
    Ok(within as f64 / slab.z_coords.len() as f64)
}

/// Sorted center distances answering CDF queries by binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    distances: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_slab(slab: &TrajectorySlab) -> Self {
        Self {
            distances: slab.sorted_distances(),
        }
    }

    /// `distances` must be ascending and non-empty.
    pub fn from_sorted(distances: Vec<f64>) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::Empty("distance list"));
        }
        if distances.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "distances must be sorted ascending".into(),
            ));
        }
        Ok(Self { distances })
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn eval(&self, r: f64) -> f64 {
        let within = self.distances.partition_point(|&d| d <= r);
        within as f64 / self.distances.len() as f64
    }
}

/// Empirical ground truth for a set of ingested configurations.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalSource {
    entries: Vec<(ChannelConfig, EmpiricalCdf)>,
}

impl EmpiricalSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, config: ChannelConfig, cdf: EmpiricalCdf) -> Result<()> {
        if self.entries.iter().any(|(c, _)| c.same_as(&config, 1e-9)) {
            return Err(Error::DuplicateConfig(config.label()));
        }
        self.entries.push((config, cdf));
        Ok(())
    }

    pub fn configs(&self) -> impl Iterator<Item = &ChannelConfig> {
        self.entries.iter().map(|(c, _)| c)
    }

    pub fn entries(&self) -> &[(ChannelConfig, EmpiricalCdf)] {
        &self.entries
    }

    pub fn lookup(&self, config: &ChannelConfig) -> Result<&EmpiricalCdf> {
        self.entries
            .iter()
            .find(|(c, _)| c.same_as(config, 1e-9))
            .map(|(_, cdf)| cdf)
            .ok_or_else(|| Error::MissingConfig(config.label()))
    }
}

impl CdfSource for EmpiricalSource {
    fn cdf(&self, config: &ChannelConfig, r: f64) -> Result<f64> {
        Ok(self.lookup(config)?.eval(r))
    }

    fn cdf_many(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        let cdf = self.lookup(config)?;
        Ok(rs.iter().map(|&r| cdf.eval(r)).collect())
    }
}

/// Water molecule diameter separating the first and second ion layers, nm.
const WATER_DIAMETER: f64 = 0.28;
/// Hydration offset added to the ion radius for the contact layer, nm.
const HYDRATION_OFFSET: f64 = 0.17;

/// Closed-form stand-in for simulation data.
///
/// The density of `|z - o|` on `[0, w/2]` is a mixture of a contact-layer
/// Gaussian, a weaker second-layer Gaussian one water diameter further in
/// (faded out in narrow channels) and a uniform bulk, each truncated to the
/// channel. Weights and widths vary smoothly with molarity, charge and the
/// Lennard-Jones parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticOracle;

impl SyntheticOracle {
    pub const VERSION: &'static str = "synthetic-edl-v1";

    pub fn mixture(&self, config: &ChannelConfig) -> Mixture {
        let ion = &config.species;
        let h = config.half_width();
        let q = f64::from(ion.charge.unsigned_abs());
        let sign = f64::from(ion.charge.signum());
        let c = config.molarity;

        let wall_offset = ion.sigma / 10.0 / 2.0 + HYDRATION_OFFSET;
        let primary_center = h - wall_offset;
        let primary_width = 0.04 + 0.015 * (q - 1.0) + 0.02 * ion.epsilon;
        let primary_weight = 0.25 + 0.05 * q + 0.03 * sign + 0.06 * ((c - 2.2) / 1.2).tanh();

        let secondary_center = primary_center - WATER_DIAMETER;
        let secondary_width = 1.5 * primary_width;
        let room = smoothstep(secondary_center / 0.25);
        let secondary_weight = (0.10 + 0.04 * q) * (0.8 + 0.2 * (c - 2.2).tanh()) * room;

        Mixture {
            half_width: h,
            primary: TruncatedNormal::new(primary_center, primary_width, h),
            primary_weight,
            secondary: TruncatedNormal::new(secondary_center, secondary_width, h),
            secondary_weight,
            bulk_weight: 1.0 - primary_weight - secondary_weight,
        }
    }

    pub fn eval(&self, config: &ChannelConfig, r: f64) -> f64 {
        self.mixture(config).cdf(r)
    }
}

impl CdfSource for SyntheticOracle {
    fn cdf(&self, config: &ChannelConfig, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::OutOfRange(format!("r must be >= 0, got {r}")));
        }
        Ok(self.eval(config, r))
    }

    fn cdf_many(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        let mixture = self.mixture(config);
        rs.iter()
            .map(|&r| {
                if r >= 0.0 {
                    Ok(mixture.cdf(r))
                } else {
                    Err(Error::OutOfRange(format!("r must be >= 0, got {r}")))
                }
            })
            .collect()
    }
}

fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Precomputed synthetic CDF of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    half_width: f64,
    primary: TruncatedNormal,
    primary_weight: f64,
    secondary: TruncatedNormal,
    secondary_weight: f64,
    bulk_weight: f64,
}

impl Mixture {
    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.half_width {
            return 1.0;
        }
        let mut f =
            self.primary_weight * self.primary.cdf(r) + self.bulk_weight * (r / self.half_width);
        if self.secondary_weight > 0.0 {
            f += self.secondary_weight * self.secondary.cdf(r);
        }
        f.clamp(0.0, 1.0)
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if !(0.0..=self.half_width).contains(&r) {
            return 0.0;
        }
        let mut p = self.primary_weight * self.primary.pdf(r) + self.bulk_weight / self.half_width;
        if self.secondary_weight > 0.0 {
            p += self.secondary_weight * self.secondary.pdf(r);
        }
        p
    }

    /// Location of the contact-layer peak, nm from the center.
    pub fn primary_center(&self) -> f64 {
        self.primary.mean
    }

    pub fn weights(&self) -> [f64; 3] {
        [self.primary_weight, self.secondary_weight, self.bulk_weight]
    }

    /// Inverse CDF by bisection on `[0, w/2]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.half_width);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Normal distribution restricted to `[0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TruncatedNormal {
    mean: f64,
    sd: f64,
    lower_z: f64,
    mass: f64,
    /// Upper-tail arithmetic keeps precision when the window sits far right of the mean.
    upper_tail: bool,
}

impl TruncatedNormal {
    fn new(mean: f64, sd: f64, upper: f64) -> Self {
        let lower_z = -mean / sd;
        let upper_tail = lower_z > 0.0;
        let mut t = Self {
            mean,
            sd,
            lower_z,
            mass: 1.0,
            upper_tail,
        };
        t.mass = t.raw_mass((upper - mean) / sd);
        t
    }

    fn raw_mass(&self, z: f64) -> f64 {
        if self.upper_tail {
            upper_tail(self.lower_z) - upper_tail(z)
        } else {
            lower_tail(z) - lower_tail(self.lower_z)
        }
    }

    fn cdf(&self, r: f64) -> f64 {
        self.raw_mass((r - self.mean) / self.sd) / self.mass
    }

    fn pdf(&self, r: f64) -> f64 {
        let z = (r - self.mean) / self.sd;
        (-0.5 * z * z).exp() / (self.sd * (2.0 * std::f64::consts::PI).sqrt() * self.mass)
    }
}

fn lower_tail(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Draws `n_ions * n_frames` z-coordinates by inverse-transform sampling of
/// the synthetic CDF. The center sits at `w/2` so coordinates span `[0, w]`.
pub fn synthesize_trajectory(
    oracle: &SyntheticOracle,
    config: &ChannelConfig,
    n_ions: usize,
    n_frames: usize,
    seed: u64,
) -> Result<TrajectorySlab> {
    if n_ions == 0 || n_frames == 0 {
        return Err(Error::InvalidArgument(
            "n_ions and n_frames must be >= 1".into(),
        ));
    }
    let mixture = oracle.mixture(config);
    let center = config.half_width();
    let mut rng = rng_from(seed);
    let z_coords = (0..n_ions * n_frames)
        .map(|_| {
            let u: f64 = rng.random();
            let r = mixture.quantile(u);
            if rng.random::<bool>() {
                center + r
            } else {
                center - r
            }
        })
        .collect();
    TrajectorySlab::new(config.clone(), center, z_coords)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `sorted` and a continuous CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{find_ion, ion_catalog, paper_grid};

    fn config(name: &str, w: f64, c: f64) -> ChannelConfig {
        ChannelConfig::new(find_ion(&ion_catalog(), name).unwrap().clone(), w, c).unwrap()
    }

    fn slab(zs: &[f64]) -> TrajectorySlab {
        TrajectorySlab::new(config("Na", 2.0, 1.0), 0.0, zs.to_vec()).unwrap()
    }

    #[test]
    fn empirical_hand_counts() {
        let s = slab(&[-0.9, -0.4, 0.1, 0.5]);
        assert_eq!(empirical_cdf(&s, 0.45).unwrap(), 0.5);
        assert_eq!(empirical_cdf(&s, 1.0).unwrap(), 1.0);
        assert_eq!(empirical_cdf(&s, 0.0).unwrap(), 0.0);
        // ties are counted in
        assert_eq!(empirical_cdf(&s, 0.4).unwrap(), 0.5);
        assert!(empirical_cdf(&s, -0.1).is_err());

        let centered = slab(&[0.0; 7]);
        assert_eq!(empirical_cdf(&centered, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_cdf(&centered, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn slab_validation() {
        let c = config("Na", 2.0, 1.0);
        assert!(TrajectorySlab::new(c.clone(), 0.0, vec![]).is_err());
        assert!(TrajectorySlab::new(c.clone(), 0.0, vec![1.04]).is_ok());
        assert!(TrajectorySlab::new(c, 0.0, vec![0.2, -1.06]).is_err());
    }

    #[test]
    fn cached_matches_direct() {
        let s = slab(&[-0.9, -0.4, 0.1, 0.5, 0.4, -0.1]);
        let cached = EmpiricalCdf::from_slab(&s);
        for k in 0..=120 {
            let r = k as f64 * 0.01;
            assert_eq!(cached.eval(r), empirical_cdf(&s, r).unwrap(), "r={r}");
        }
    }

    #[test]
    fn oracle_boundaries() {
        let o = SyntheticOracle;
        for cfg in paper_grid().iter().step_by(37) {
            assert_eq!(o.eval(cfg, 0.0), 0.0);
            assert_eq!(o.eval(cfg, cfg.half_width()), 1.0);
            assert_eq!(o.eval(cfg, cfg.half_width() + 0.1), 1.0);
        }
    }

    #[test]
    fn oracle_density_integrates_to_one() {
        let o = SyntheticOracle;
        for cfg in [
            config("Na", 2.0, 2.0),
            config("Mg", 0.8, 3.6),
            config("Cl", 3.0, 0.8),
        ] {
            let m = o.mixture(&cfg);
            let n = 20_000;
            let h = cfg.half_width();
            let dr = h / n as f64;
            // midpoint rule
            let integral: f64 = (0..n).map(|i| m.pdf((i as f64 + 0.5) * dr) * dr).sum();
            assert!((integral - 1.0).abs() < 1e-6, "{}: {integral}", cfg.label());
            assert!(m.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn oracle_primary_peak_sits_near_wall() {
        let o = SyntheticOracle;
        let cfg = config("Na", 2.0, 2.0);
        let m = o.mixture(&cfg);
        let expected = 1.0 - (0.216 / 2.0 + 0.17);
        assert!((m.primary_center() - expected).abs() < 1e-12);
        // density maximum on a fine grid lands on the contact layer
        let argmax = (0..=1000)
            .map(|i| i as f64 * 1e-3)
            .max_by(|a, b| m.pdf(*a).total_cmp(&m.pdf(*b)))
            .unwrap();
        assert!((argmax - expected).abs() < 0.01, "{argmax}");
    }

    #[test]
    fn narrow_channels_drop_the_second_layer() {
        let o = SyntheticOracle;
        assert_eq!(o.mixture(&config("Cl", 0.8, 2.0)).weights()[1], 0.0);
        assert!(o.mixture(&config("Na", 3.0, 2.0)).weights()[1] > 0.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let m = SyntheticOracle.mixture(&config("K", 1.7, 2.6));
        for k in 1..100 {
            let u = k as f64 / 100.0;
            assert!((m.cdf(m.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesized_slab_count_and_bounds() {
        let cfg = config("Na", 2.0, 2.0);
        let slab = synthesize_trajectory(&SyntheticOracle, &cfg, 100, 200, 7).unwrap();
        assert_eq!(slab.z_coords.len(), 20_000);
        assert!(slab.z_coords.iter().all(|z| (z - slab.center).abs() <= 1.0));
        let again = synthesize_trajectory(&SyntheticOracle, &cfg, 100, 200, 7).unwrap();
        assert_eq!(slab, again);
        assert!(synthesize_trajectory(&SyntheticOracle, &cfg, 0, 1, 7).is_err());
    }

    #[test]
    fn ks_distance_on_known_sample() {
        // uniform cdf on [0,1], sample {0.5}: max(1-0.5, 0.5-0) = 0.5
        assert_eq!(ks_distance(&[0.5], |x| x), 0.5);
        assert!((ks_distance(&[0.25, 0.75], |x| x) - 0.25).abs() < 1e-15);
    }
}
