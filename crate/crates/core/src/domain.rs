//! Ion species, channel configurations and the feature layout shared by
//! every regressor.
//!
//! Units follow the simulation inputs directly: sigma in angstrom, epsilon in
//! kcal/mol, distances and widths in nm, molarity in mol/L and charge in
//! elementary charges. No rescaling happens here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of model inputs.
pub const N_FEATURES: usize = 6;

/// Column names of a feature row, in storage order.
pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["r", "sigma", "epsilon", "width", "molarity", "charge"];

/// Lennard-Jones parameters and charge of one ion type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub name: String,
    /// angstrom
    pub sigma: f64,
    /// kcal/mol
    pub epsilon: f64,
    /// elementary charges, signed
    pub charge: i32,
}

impl IonSpecies {
    pub fn new(name: impl Into<String>, sigma: f64, epsilon: f64, charge: i32) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidArgument("ion name must not be empty".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::OutOfRange(format!(
                "{name}: sigma must be > 0, got {sigma}"
            )));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::OutOfRange(format!(
                "{name}: epsilon must be > 0, got {epsilon}"
            )));
        }
        if charge == 0 {
            return Err(Error::OutOfRange(format!("{name}: charge must be nonzero")));
        }
        Ok(Self {
            name,
            sigma,
            epsilon,
            charge,
        })
    }
}

/// Graphene wall parameters. The wall is identical in every system and never
/// enters the model, so it lives outside the ion catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallParameters {
    pub sigma: f64,
    pub epsilon: f64,
}

pub const GRAPHENE_WALL: WallParameters = WallParameters {
    sigma: 3.3900,
    epsilon: 0.0692,
};

/// The five simulated ion species.
pub fn ion_catalog() -> Vec<IonSpecies> {
    [
        ("Na", 2.1600, 0.3526, 1),
        ("Cl", 4.8305, 0.0128, -1),
        ("Mg", 2.1200, 0.8750, 2),
        ("Li", 1.4094, 0.3367, 1),
        ("K", 2.8384, 0.4297, 1),
    ]
    .into_iter()
    .map(|(name, sigma, epsilon, charge)| IonSpecies {
        name: name.to_string(),
        sigma,
        epsilon,
        charge,
    })
    .collect()
}

/// Checks the catalog invariants: valid parameters and unique names.
pub fn validate_catalog(catalog: &[IonSpecies]) -> Result<()> {
    if catalog.is_empty() {
        return Err(Error::Empty("ion catalog"));
    }
    for (i, ion) in catalog.iter().enumerate() {
        IonSpecies::new(ion.name.clone(), ion.sigma, ion.epsilon, ion.charge)?;
        if catalog[..i].iter().any(|other| other.name == ion.name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate ion name `{}` in catalog",
                ion.name
            )));
        }
    }
    Ok(())
}

pub fn find_ion<'a>(catalog: &'a [IonSpecies], name: &str) -> Result<&'a IonSpecies> {
    catalog
        .iter()
        .find(|ion| ion.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownIon(name.to_string()))
}

/// One simulated system: ion type, wall-to-wall width and average molarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub species: IonSpecies,
    /// nm
    pub width: f64,
    /// mol/L
    pub molarity: f64,
}

impl ChannelConfig {
    pub fn new(species: IonSpecies, width: f64, molarity: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::OutOfRange(format!(
                "width must be > 0 nm, got {width}"
            )));
        }
        if !(molarity.is_finite() && molarity > 0.0) {
            return Err(Error::OutOfRange(format!(
                "molarity must be > 0 M, got {molarity}"
            )));
        }
        Ok(Self {
            species,
            width,
            molarity,
        })
    }

    /// Distance from the channel center to either wall, nm.
    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    /// Same ion and the same width/molarity up to `tol`.
    pub fn same_as(&self, other: &ChannelConfig, tol: f64) -> bool {
        self.species.name == other.species.name
            && (self.width - other.width).abs() <= tol
            && (self.molarity - other.molarity).abs() <= tol
    }

    pub fn label(&self) -> String {
        format!(
            "{} w={} nm c={} M",
            self.species.name, self.width, self.molarity
        )
    }
}

/// Model input `(r, sigma, epsilon, width, molarity, charge)` in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn r(&self) -> f64 {
        self.values[0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

pub fn assemble_features(config: &ChannelConfig, r: f64) -> Result<FeatureVector> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::OutOfRange(format!(
            "distance r must be >= 0 nm, got {r}"
        )));
    }
    Ok(FeatureVector {
        values: features_unchecked(config, r),
    })
}

#[inline]
pub(crate) fn features_unchecked(config: &ChannelConfig, r: f64) -> [f64; N_FEATURES] {
    let ion = &config.species;
    [
        r,
        ion.sigma,
        ion.epsilon,
        config.width,
        config.molarity,
        f64::from(ion.charge),
    ]
}

/// Channel widths of the full simulation grid: 0.8 to 3.0 nm in 0.1 nm steps.
pub fn paper_widths() -> Vec<f64> {
    (8..=30).map(|k| k as f64 / 10.0).collect()
}

/// Molarities of the full simulation grid: 0.8 to 3.6 M in 0.2 M steps.
pub fn paper_molarities() -> Vec<f64> {
    (4..=18).map(|k| (2 * k) as f64 / 10.0).collect()
}

/// Cartesian product `ions x widths x molarities`, ion-major.
pub fn config_grid(
    ions: &[IonSpecies],
    widths: &[f64],
    molarities: &[f64],
) -> Result<Vec<ChannelConfig>> {
    let mut grid = Vec::with_capacity(ions.len() * widths.len() * molarities.len());
    for ion in ions {
        for &w in widths {
            for &c in molarities {
                grid.push(ChannelConfig::new(ion.clone(), w, c)?);
            }
        }
    }
    Ok(grid)
}

/// All 1,725 simulated configurations.
pub fn paper_grid() -> Vec<ChannelConfig> {
    config_grid(&ion_catalog(), &paper_widths(), &paper_molarities())
        .expect("built-in grid is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ion(name: &str) -> IonSpecies {
        find_ion(&ion_catalog(), name).unwrap().clone()
    }

    #[test]
    fn catalog_matches_table_values() {
        let cat = ion_catalog();
        assert_eq!(cat.len(), 5);
        validate_catalog(&cat).unwrap();
        let na = ion("Na");
        assert_eq!((na.sigma, na.epsilon, na.charge), (2.1600, 0.3526, 1));
        let cl = ion("Cl");
        assert_eq!((cl.sigma, cl.epsilon, cl.charge), (4.8305, 0.0128, -1));
        let mg = ion("Mg");
        assert_eq!((mg.sigma, mg.epsilon, mg.charge), (2.1200, 0.8750, 2));
        let li = ion("Li");
        assert_eq!((li.sigma, li.epsilon, li.charge), (1.4094, 0.3367, 1));
        let k = ion("K");
        assert_eq!((k.sigma, k.epsilon, k.charge), (2.8384, 0.4297, 1));
    }

    #[test]
    fn feature_assembly() {
        let na = ChannelConfig::new(ion("Na"), 2.0, 2.0).unwrap();
        assert_eq!(
            assemble_features(&na, 0.5).unwrap().values,
            [0.5, 2.16, 0.3526, 2.0, 2.0, 1.0]
        );
        let cl = ChannelConfig::new(ion("Cl"), 1.0, 1.0).unwrap();
        assert_eq!(
            assemble_features(&cl, 0.0).unwrap().values,
            [0.0, 4.8305, 0.0128, 1.0, 1.0, -1.0]
        );
        let mg = ChannelConfig::new(ion("Mg"), 3.0, 3.6).unwrap();
        assert_eq!(
            assemble_features(&mg, 1.5).unwrap().values,
            [1.5, 2.12, 0.875, 3.0, 3.6, 2.0]
        );
        assert!(assemble_features(&mg, -0.1).is_err());
        assert!(assemble_features(&mg, f64::NAN).is_err());
    }

    #[test]
    fn rejects_invalid_species_and_configs() {
        assert!(IonSpecies::new("X", 0.0, 1.0, 1).is_err());
        assert!(IonSpecies::new("X", 1.0, -1.0, 1).is_err());
        assert!(IonSpecies::new("X", 1.0, 1.0, 0).is_err());
        assert!(ChannelConfig::new(ion("K"), 0.0, 1.0).is_err());
        assert!(ChannelConfig::new(ion("K"), 1.0, 0.0).is_err());
        let mut cat = ion_catalog();
        cat.push(ion("Na"));
        assert!(validate_catalog(&cat).is_err());
    }

    #[test]
    fn paper_grid_shape() {
        assert_eq!(paper_widths().len(), 23);
        assert_eq!(paper_molarities().len(), 15);
        assert_eq!(paper_grid().len(), 1725);
        assert_eq!(paper_widths()[8], 1.6);
        assert_eq!(paper_molarities()[3], 1.4);
    }
}
