//! Random parameter space: z-affine fields and uniform parameter sampling.
//!
//! Coefficients and initial data depend on the random vector z through an
//! affine expansion sigma_0(x) + sum_j z_j psi_j(x) with z uniform on
//! [-1, 1]^d_z. Fields are stored sampled on the grid; the closed-form
//! profiles live in [`FieldSpec`] so a field can be re-sampled at any
//! resolution.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One sample of the random vector z, every entry in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }
}

/// Uniform periodic grid on [0, 1): cell centers and right-edge interfaces.
///
/// Cell i has center (i + 1/2) dx; interface i sits at the right edge
/// (i + 1) dx of cell i, so interface `n_x - 1` wraps to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub n_x: usize,
    pub dx: f64,
}

impl SpatialGrid {
    pub fn new(n_x: usize) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::InvalidArgument("grid needs n_x >= 1".into()));
        }
        Ok(Self {
            n_x,
            dx: 1.0 / n_x as f64,
        })
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn interface(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.center(i)).collect()
    }
}

/// z-affine random field sampled at cell centers: sigma_0 + sum_j z_j psi_j.
#[derive(Debug, Clone)]
pub struct AffineField {
    /// Base profile at the cell centers.
    pub base: Vec<f64>,
    /// Mode profiles psi_j at the same centers; one per random dimension.
    pub modes: Vec<Vec<f64>>,
    /// Positivity floor; evaluation errors if any node drops below it.
    pub sigma_min: Option<f64>,
}

impl AffineField {
    pub fn new(base: Vec<f64>, modes: Vec<Vec<f64>>, sigma_min: Option<f64>) -> Result<Self> {
        for (j, m) in modes.iter().enumerate() {
            if m.len() != base.len() {
                return Err(Error::InvalidArgument(format!(
                    "mode {} has {} nodes, base has {}",
                    j,
                    m.len(),
                    base.len()
                )));
            }
        }
        Ok(Self {
            base,
            modes,
            sigma_min,
        })
    }

    pub fn dim_z(&self) -> usize {
        self.modes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.base.len()
    }

    /// Certified lower bound over all z in [-1,1]^d_z.
    ///
    /// The dependence on z is affine, so at each node the worst case is
    /// sigma_0 - sum_j |psi_j| and the bound is exact, not conservative.
    pub fn certified_min(&self) -> f64 {
        (0..self.base.len())
            .map(|i| {
                let spread: f64 = self.modes.iter().map(|m| m[i].abs()).sum();
                self.base[i] - spread
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Draw `m` i.i.d. samples uniform on [-1, 1]^d_z, deterministic per seed.
pub fn sample_parameters(d_z: usize, m: usize, seed: u64) -> Result<Vec<ParameterVector>> {
    if d_z == 0 {
        return Err(Error::InvalidArgument("d_z must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m)
        .map(|_| ParameterVector((0..d_z).map(|_| rng.gen_range(-1.0..=1.0)).collect()))
        .collect())
}

/// Evaluate sigma_0(x_i) + sum_j z_j psi_j(x_i) at every node.
///
/// Errors if z does not match the number of modes, the grid does not match
/// the stored profiles, or (for floored fields) any node falls below the
/// positivity floor.
pub fn eval_affine_field(
    field: &AffineField,
    z: &ParameterVector,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    if z.dim() != field.dim_z() {
        return Err(Error::InvalidArgument(format!(
            "z has dimension {}, field has {} modes",
            z.dim(),
            field.dim_z()
        )));
    }
    if grid.n_x != field.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "grid has {} cells, field profiles have {} nodes",
            grid.n_x,
            field.n_nodes()
        )));
    }
    let mut values = field.base.clone();
    for (zj, mode) in z.entries().iter().zip(&field.modes) {
        for (v, psi) in values.iter_mut().zip(mode) {
            *v += zj * psi;
        }
    }
    if let Some(floor) = field.sigma_min {
        for (i, v) in values.iter().enumerate() {
            if *v < floor {
                return Err(Error::Domain(format!(
                    "field value {v} at node {i} below floor {floor}"
                )));
            }
        }
    }
    Ok(values)
}

/// Closed-form field description, read from flat key/value config.
///
/// Base profile: `base + base_cos_amp * cos(2 pi x)`; mode j (1-based):
/// `mode_amp * j^(-mode_decay) * sin(2 pi j x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub base: f64,
    pub base_cos_amp: f64,
    pub mode_amp: f64,
    pub mode_decay: f64,
    pub d_z: usize,
    pub sigma_min: Option<f64>,
}

impl FieldSpec {
    /// Build a spec from flat key/value pairs: `profile` (only `sinusoid` is
    /// known), `base`, `base_cos_amp`, `amplitude`, `decay`, `d_z`,
    /// `sigma_min`. Missing keys keep the listed defaults.
    pub fn from_kv<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut spec = Self {
            base: 1.0,
            base_cos_amp: 0.0,
            mode_amp: 1.0,
            mode_decay: 2.0,
            d_z: 1,
            sigma_min: None,
        };
        for (key, value) in pairs {
            let bad = |e: std::num::ParseFloatError| {
                Error::InvalidArgument(format!("bad value for {key}: {e}"))
            };
            match key {
                "profile" => {
                    if value != "sinusoid" {
                        return Err(Error::InvalidArgument(format!(
                            "unknown field profile `{value}`"
                        )));
                    }
                }
                "base" => spec.base = value.parse().map_err(bad)?,
                "base_cos_amp" => spec.base_cos_amp = value.parse().map_err(bad)?,
                "amplitude" => spec.mode_amp = value.parse().map_err(bad)?,
                "decay" => spec.mode_decay = value.parse().map_err(bad)?,
                "d_z" => {
                    spec.d_z = value
                        .parse()
                        .map_err(|e| Error::InvalidArgument(format!("bad value for d_z: {e}")))?
                }
                "sigma_min" => spec.sigma_min = Some(value.parse().map_err(bad)?),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown field key `{other}`"
                    )))
                }
            }
        }
        Ok(spec)
    }

    /// Sample the closed-form profiles on a grid's cell centers.
    pub fn build(&self, grid: &SpatialGrid) -> Result<AffineField> {
        let base = grid
            .centers()
            .iter()
            .map(|&x| self.base + self.base_cos_amp * (2.0 * PI * x).cos())
            .collect();
        let modes = (1..=self.d_z)
            .map(|j| {
                let amp = self.mode_amp * (j as f64).powf(-self.mode_decay);
                grid.centers()
                    .iter()
                    .map(|&x| amp * (2.0 * PI * j as f64 * x).sin())
                    .collect()
            })
            .collect();
        AffineField::new(base, modes, self.sigma_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_parameters(2, 3, 7).unwrap();
        let b = sample_parameters(2, 3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_mean_matches_uniform_law() {
        // Monte Carlo oracle: mean of U[-1,1] is 0, sd of the sample mean
        // is 1/sqrt(3 * 10^4) ~ 0.0058, so 0.05 is a generous band.
        let samples = sample_parameters(1, 10_000, 1).unwrap();
        let mean: f64 = samples.iter().map(|z| z.0[0]).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.05, "empirical mean {mean}");
    }

    #[test]
    fn single_sample_in_range() {
        let samples = sample_parameters(3, 1, 0).unwrap();
        assert_eq!(samples.len(), 1);
        assert!(samples[0]
            .entries()
            .iter()
            .all(|z| (-1.0..=1.0).contains(z)));
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(sample_parameters(0, 5, 1).is_err());
        assert!(sample_parameters(2, 0, 1).is_err());
    }

    #[test]
    fn constant_field_without_modes() {
        let grid = SpatialGrid::new(8).unwrap();
        let field = AffineField::new(vec![1.0; 8], vec![], None).unwrap();
        let vals = eval_affine_field(&field, &ParameterVector(vec![]), &grid).unwrap();
        assert!(vals.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_z_returns_base() {
        let grid = SpatialGrid::new(8).unwrap();
        let spec = FieldSpec {
            base: 1.0,
            base_cos_amp: 0.0,
            mode_amp: 0.5,
            mode_decay: 0.0,
            d_z: 1,
            sigma_min: None,
        };
        let field = spec.build(&grid).unwrap();
        let vals = eval_affine_field(&field, &ParameterVector(vec![0.0]), &grid).unwrap();
        for v in vals {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_mode_direct_evaluation() {
        // Direct oracle: sigma(0.25) = 1 + 1 * 0.5 * sin(pi/2) = 1.5.
        // n_x = 2 puts a cell center exactly at x = 0.25.
        let grid = SpatialGrid::new(2).unwrap();
        let spec = FieldSpec {
            base: 1.0,
            base_cos_amp: 0.0,
            mode_amp: 0.5,
            mode_decay: 0.0,
            d_z: 1,
            sigma_min: None,
        };
        let field = spec.build(&grid).unwrap();
        let vals = eval_affine_field(&field, &ParameterVector(vec![1.0]), &grid).unwrap();
        assert!((vals[0] - 1.5).abs() < 1e-14, "got {}", vals[0]);
    }

    #[test]
    fn field_spec_from_kv() {
        let spec = FieldSpec::from_kv([
            ("profile", "sinusoid"),
            ("amplitude", "0.3"),
            ("decay", "2.0"),
            ("d_z", "4"),
            ("sigma_min", "0.2"),
        ])
        .unwrap();
        assert_eq!(spec.d_z, 4);
        assert_eq!(spec.sigma_min, Some(0.2));
        assert!(FieldSpec::from_kv([("profile", "wavelet")]).is_err());
        assert!(FieldSpec::from_kv([("amplitud", "0.3")]).is_err());
    }

    #[test]
    fn floor_violation_is_domain_error() {
        let grid = SpatialGrid::new(4).unwrap();
        let field = AffineField::new(vec![1.0; 4], vec![vec![0.9; 4]], Some(0.5)).unwrap();
        let err = eval_affine_field(&field, &ParameterVector(vec![-1.0]), &grid).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn corner_minimum_matches_certified_bound() {
        let grid = SpatialGrid::new(16).unwrap();
        let spec = FieldSpec {
            base: 1.0,
            base_cos_amp: 0.0,
            mode_amp: 0.3,
            mode_decay: 2.0,
            d_z: 3,
            sigma_min: None,
        };
        let field = spec.build(&grid).unwrap();
        let certified = field.certified_min();

        let mut corner_min = f64::INFINITY;
        for corner in 0..(1usize << 3) {
            let z = ParameterVector(
                (0..3)
                    .map(|j| if corner >> j & 1 == 1 { 1.0 } else { -1.0 })
                    .collect(),
            );
            let vals = eval_affine_field(&field, &z, &grid).unwrap();
            corner_min = vals.iter().fold(corner_min, |a, &b| a.min(b));
        }
        assert!(
            (corner_min - certified).abs() < 1e-12,
            "corners {corner_min} vs certified {certified}"
        );
    }

    proptest! {
        // eval(a) + eval(b) - eval(0) = eval(a+b) node-by-node.
        #[test]
        fn affinity_identity(
            a in proptest::collection::vec(-0.5f64..0.5, 3),
            b in proptest::collection::vec(-0.5f64..0.5, 3),
        ) {
            let grid = SpatialGrid::new(12).unwrap();
            let spec = FieldSpec {
                base: 1.0,
                base_cos_amp: 0.2,
                mode_amp: 0.4,
                mode_decay: 1.0,
                d_z: 3,
                sigma_min: None,
            };
            let field = spec.build(&grid).unwrap();
            let eval = |z: Vec<f64>| {
                eval_affine_field(&field, &ParameterVector(z), &grid).unwrap()
            };
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs_a = eval(a.clone());
            let lhs_b = eval(b.clone());
            let lhs_0 = eval(vec![0.0; 3]);
            let rhs = eval(sum);
            for i in 0..12 {
                let lhs = lhs_a[i] + lhs_b[i] - lhs_0[i];
                prop_assert!((lhs - rhs[i]).abs() < 1e-13);
            }
        }
    }
}
