//! Array geometries, excitation patterns and hole patterns.
//!
//! Lengths are in units of the transition wavelength λ₀.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

pub type Vec3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Chain,
    Square,
}

impl Dimension {
    /// Coordinates spanned by the array.
    fn spanned_axes(self) -> usize {
        match self {
            Dimension::Chain => 1,
            Dimension::Square => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Chain => "chain",
            Dimension::Square => "square",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGeometry {
    positions: Vec<Vec3>,
    spacing: f64,
    dimension: Dimension,
}

impl LatticeGeometry {
    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    /// Geometry with arbitrary positions; used for random test geometries.
    pub fn from_positions(positions: Vec<Vec3>, spacing: f64, dimension: Dimension) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("geometry needs at least one site"));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("spacing must be positive"));
        }
        Ok(Self { positions, spacing, dimension })
    }

    /// Keep only the listed sites, in the given order.
    pub fn subset(&self, sites: &[usize]) -> Result<Self> {
        if let Some(&bad) = sites.iter().find(|&&s| s >= self.n_sites()) {
            return Err(Error::invalid(format!("site {bad} out of range")));
        }
        Self::from_positions(
            sites.iter().map(|&s| self.positions[s]).collect(),
            self.spacing,
            self.dimension,
        )
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (p, q) = (self.positions[i], self.positions[j]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }
}

fn check_spacing(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("spacing must be positive"))
    }
}

/// `n` sites along x with pitch `a`.
pub fn build_chain(n: usize, a: f64) -> Result<LatticeGeometry> {
    if n == 0 {
        return Err(Error::invalid("number of sites must be positive"));
    }
    check_spacing(a)?;
    let positions = (0..n).map(|i| [i as f64 * a, 0.0, 0.0]).collect();
    Ok(LatticeGeometry { positions, spacing: a, dimension: Dimension::Chain })
}

/// √n × √n grid in the x–y plane; site `i` sits at column `i % L`, row `i / L`.
pub fn build_square(n: usize, a: f64) -> Result<LatticeGeometry> {
    if n == 0 {
        return Err(Error::invalid("number of sites must be positive"));
    }
    check_spacing(a)?;
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::invalid(format!("{n} is not a perfect square")));
    }
    let positions = (0..n)
        .map(|i| [(i % side) as f64 * a, (i / side) as f64 * a, 0.0])
        .collect();
    Ok(LatticeGeometry { positions, spacing: a, dimension: Dimension::Square })
}

pub fn build(dimension: Dimension, n: usize, a: f64) -> Result<LatticeGeometry> {
    match dimension {
        Dimension::Chain => build_chain(n, a),
        Dimension::Square => build_square(n, a),
    }
}

/// Gaussian position disorder. `sigma` is in units of the lattice spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisorderSpec {
    pub sigma: f64,
    pub seed: u64,
}

pub fn apply_position_disorder(geom: &LatticeGeometry, spec: DisorderSpec) -> Result<LatticeGeometry> {
    let mut rng = rng::stream(spec.seed, Purpose::Disorder, 0);
    displace(geom, spec.sigma, &mut rng)
}

/// Displace every site along the array's own axes by N(0, (σ·a)²) draws.
///
/// Draws are taken for every site even when `sigma == 0`, so that the same
/// stream yields displacements proportional to `sigma` across a σ scan.
pub fn displace<R: Rng + ?Sized>(geom: &LatticeGeometry, sigma: f64, rng: &mut R) -> Result<LatticeGeometry> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("disorder sigma must be non-negative"));
    }
    let width = sigma * geom.spacing;
    let axes = geom.dimension.spanned_axes();
    let mut positions = geom.positions.clone();
    for p in positions.iter_mut() {
        for coord in p.iter_mut().take(axes) {
            let z: f64 = StandardNormal.sample(rng);
            *coord += width * z;
        }
    }
    Ok(LatticeGeometry { positions, ..geom.clone() })
}

fn sample_subset<R: Rng + ?Sized>(n_sites: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut v = rand::seq::index::sample(rng, n_sites, k).into_vec();
    v.sort_unstable();
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcitationPattern {
    n_sites: usize,
    excited: Vec<usize>,
}

impl ExcitationPattern {
    pub fn new(n_sites: usize, mut excited: Vec<usize>) -> Result<Self> {
        excited.sort_unstable();
        excited.dedup();
        if let Some(&bad) = excited.iter().find(|&&s| s >= n_sites) {
            return Err(Error::invalid(format!("excited site {bad} out of range 0..{n_sites}")));
        }
        Ok(Self { n_sites, excited })
    }

    pub fn full(n_sites: usize) -> Self {
        Self { n_sites, excited: (0..n_sites).collect() }
    }

    /// Excitation pattern from a bitmask over at most 64 sites.
    pub fn from_mask(n_sites: usize, mask: u64) -> Self {
        Self { n_sites, excited: (0..n_sites).filter(|&i| mask >> i & 1 == 1).collect() }
    }

    /// Pattern exciting the sites whose occupation is 1.
    pub fn from_occupied(occ: &[f64]) -> Self {
        Self { n_sites: occ.len(), excited: (0..occ.len()).filter(|&i| occ[i] == 1.0).collect() }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn excited(&self) -> &[usize] {
        &self.excited
    }

    pub fn n_exc(&self) -> usize {
        self.excited.len()
    }

    pub fn is_excited(&self, i: usize) -> bool {
        self.excited.binary_search(&i).is_ok()
    }

    /// Occupation vector with 1.0 on excited sites.
    pub fn occupations(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.n_sites];
        for &i in &self.excited {
            occ[i] = 1.0;
        }
        occ
    }
}

pub fn sample_excitation_pattern(n_sites: usize, n_exc: usize, seed: u64) -> Result<ExcitationPattern> {
    sample_excitation_pattern_with(n_sites, n_exc, &mut rng::stream(seed, Purpose::Excitation, 0))
}

pub fn sample_excitation_pattern_with<R: Rng + ?Sized>(
    n_sites: usize,
    n_exc: usize,
    rng: &mut R,
) -> Result<ExcitationPattern> {
    if n_exc > n_sites {
        return Err(Error::invalid(format!("cannot excite {n_exc} of {n_sites} sites")));
    }
    Ok(ExcitationPattern { n_sites, excited: sample_subset(n_sites, n_exc, rng) })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HolePattern {
    n_sites: usize,
    filled: Vec<usize>,
}

impl HolePattern {
    pub fn new(n_sites: usize, mut filled: Vec<usize>) -> Result<Self> {
        filled.sort_unstable();
        filled.dedup();
        if let Some(&bad) = filled.iter().find(|&&s| s >= n_sites) {
            return Err(Error::invalid(format!("filled site {bad} out of range 0..{n_sites}")));
        }
        Ok(Self { n_sites, filled })
    }

    pub fn none(n_sites: usize) -> Self {
        Self { n_sites, filled: (0..n_sites).collect() }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn filled(&self) -> &[usize] {
        &self.filled
    }

    pub fn n_filled(&self) -> usize {
        self.filled.len()
    }

    pub fn n_holes(&self) -> usize {
        self.n_sites - self.filled.len()
    }

    /// Filling fraction η.
    pub fn eta(&self) -> f64 {
        self.filled.len() as f64 / self.n_sites as f64
    }

    pub fn is_filled(&self, i: usize) -> bool {
        self.filled.binary_search(&i).is_ok()
    }
}

pub fn sample_hole_pattern(n_sites: usize, n_filled: usize, seed: u64) -> Result<HolePattern> {
    sample_hole_pattern_with(n_sites, n_filled, &mut rng::stream(seed, Purpose::Holes, 0))
}

pub fn sample_hole_pattern_with<R: Rng + ?Sized>(
    n_sites: usize,
    n_filled: usize,
    rng: &mut R,
) -> Result<HolePattern> {
    if n_filled > n_sites {
        return Err(Error::invalid(format!("cannot fill {n_filled} of {n_sites} sites")));
    }
    Ok(HolePattern { n_sites, filled: sample_subset(n_sites, n_filled, rng) })
}
