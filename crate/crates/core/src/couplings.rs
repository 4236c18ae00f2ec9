//! Free-space dipole-dipole couplings.
//!
//! With lengths in λ₀ and rates in Γ₀ the wavenumber is `k = 2π` and
//!
//! ```text
//! J_ij − iΓ_ij/2 = −(3π/k) d*·G(r_ij)·d ,   Γ_ii = 1,  J_ii = 0.
//! ```

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Vec3};

/// Wavenumber of the transition in units of 1/λ₀.
pub const K0: f64 = 2.0 * PI;

/// Pairs closer than this (in units of k·r) are treated as coincident.
pub const MIN_KR: f64 = 1e-6;

pub type Tensor3 = [[Complex64; 3]; 3];

/// Free-space Green's tensor of a point dipole, without the contact term.
pub fn greens_tensor(r: Vec3, k: f64) -> Result<Tensor3> {
    let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if !(dist > 0.0) {
        return Err(Error::invalid("Green's tensor is singular at r = 0"));
    }
    if !(k > 0.0) {
        return Err(Error::invalid("wavenumber must be positive"));
    }
    let kr = k * dist;
    let inv = 1.0 / kr;
    let i = Complex64::i();
    let pref = Complex64::from_polar(1.0 / (4.0 * PI * dist), kr);
    let diag = 1.0 + i * inv - inv * inv;
    let dyad = -1.0 - 3.0 * i * inv + 3.0 * inv * inv;
    let unit = [r[0] / dist, r[1] / dist, r[2] / dist];
    let mut g = [[Complex64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let delta = if a == b { diag } else { Complex64::new(0.0, 0.0) };
            g[a][b] = pref * (delta + dyad * unit[a] * unit[b]);
        }
    }
    Ok(g)
}

/// `J − iΓ/2` for one pair from the tensor route.
fn pair_coupling(r: Vec3, dipole: Vec3) -> Result<Complex64> {
    let g = greens_tensor(r, K0)?;
    let mut contraction = Complex64::new(0.0, 0.0);
    for a in 0..3 {
        for b in 0..3 {
            contraction += dipole[a] * g[a][b] * dipole[b];
        }
    }
    Ok(-(3.0 * PI / K0) * contraction)
}

/// Closed-form `(J, Γ)` for a dipole perpendicular to the separation.
pub fn analytic_perpendicular_coupling(kr: f64) -> Result<(f64, f64)> {
    if !(kr > 0.0) {
        return Err(Error::invalid("k·r must be positive"));
    }
    let (s, c) = kr.sin_cos();
    let x2 = kr * kr;
    let x3 = x2 * kr;
    let gamma = 1.5 * (s / kr + c / x2 - s / x3);
    let j = -0.75 * (c / kr - s / x2 - c / x3);
    Ok((j, gamma))
}

/// Real symmetric coherent and dissipative coupling matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrices {
    n: usize,
    j: Vec<f64>,
    gamma: Vec<f64>,
    dipole: Vec3,
}

pub const DEFAULT_DIPOLE: Vec3 = [0.0, 0.0, 1.0];

impl CouplingMatrices {
    pub fn from_geometry(geom: &LatticeGeometry, dipole: Vec3) -> Result<Self> {
        let norm = (dipole[0].powi(2) + dipole[1].powi(2) + dipole[2].powi(2)).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("dipole orientation must be a nonzero vector"));
        }
        let d = [dipole[0] / norm, dipole[1] / norm, dipole[2] / norm];
        let n = geom.n_sites();
        let pos = geom.positions();
        let mut j = vec![0.0; n * n];
        let mut gamma = vec![0.0; n * n];
        for a in 0..n {
            gamma[a * n + a] = 1.0;
            for b in a + 1..n {
                let r = [pos[a][0] - pos[b][0], pos[a][1] - pos[b][1], pos[a][2] - pos[b][2]];
                let kr = K0 * geom.distance(a, b);
                if kr < MIN_KR {
                    return Err(Error::DegenerateGeometry { i: a, j: b, kr });
                }
                let z = pair_coupling(r, d)?;
                j[a * n + b] = z.re;
                j[b * n + a] = z.re;
                gamma[a * n + b] = -2.0 * z.im;
                gamma[b * n + a] = -2.0 * z.im;
            }
        }
        Ok(Self { n, j, gamma, dipole: d })
    }

    /// Couplings from explicit row-major matrices.
    pub fn from_matrices(n: usize, j: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if n == 0 || j.len() != n * n || gamma.len() != n * n {
            return Err(Error::invalid("coupling matrices must be n×n with n ≥ 1"));
        }
        for a in 0..n {
            if gamma[a * n + a] != 1.0 || j[a * n + a] != 0.0 {
                return Err(Error::InvalidCouplings(format!(
                    "diagonal must be Γ_ii = 1, J_ii = 0 (site {a})"
                )));
            }
            for b in 0..a {
                if j[a * n + b] != j[b * n + a] || gamma[a * n + b] != gamma[b * n + a] {
                    return Err(Error::InvalidCouplings(format!("asymmetric entry ({a}, {b})")));
                }
            }
        }
        if j.iter().chain(&gamma).any(|x| !x.is_finite()) {
            return Err(Error::InvalidCouplings("non-finite entry".into()));
        }
        Ok(Self { n, j, gamma, dipole: DEFAULT_DIPOLE })
    }

    /// All emitters at one point: Γ_ij = Γ₀ for every pair, no coherent couplings.
    pub fn dicke(n: usize) -> Self {
        Self { n, j: vec![0.0; n * n], gamma: vec![1.0; n * n], dipole: DEFAULT_DIPOLE }
    }

    /// Couplings restricted to the listed sites.
    pub fn restrict(&self, sites: &[usize]) -> Result<Self> {
        if sites.iter().any(|&s| s >= self.n) {
            return Err(Error::invalid("site out of range"));
        }
        let m = sites.len();
        let mut j = vec![0.0; m * m];
        let mut gamma = vec![0.0; m * m];
        for (a, &sa) in sites.iter().enumerate() {
            for (b, &sb) in sites.iter().enumerate() {
                j[a * m + b] = self.j(sa, sb);
                gamma[a * m + b] = self.gamma(sa, sb);
            }
        }
        Ok(Self { n: m, j, gamma, dipole: self.dipole })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn j(&self, a: usize, b: usize) -> f64 {
        self.j[a * self.n + b]
    }

    #[inline]
    pub fn gamma(&self, a: usize, b: usize) -> f64 {
        self.gamma[a * self.n + b]
    }

    /// Single-emitter decay rate, 1 in internal units.
    pub fn gamma0(&self) -> f64 {
        1.0
    }

    pub fn dipole(&self) -> Vec3 {
        self.dipole
    }

    pub fn j_matrix(&self) -> &[f64] {
        &self.j
    }

    pub fn gamma_matrix(&self) -> &[f64] {
        &self.gamma
    }

    /// Σ_{i≠j} Γ_ij Γ_ji.
    pub fn gamma_pair_sum(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    total += self.gamma(a, b) * self.gamma(b, a);
                }
            }
        }
        total
    }

    /// Row-major CSV dump with header `i,j,J,Gamma`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,J,Gamma")?;
        for a in 0..self.n {
            for b in 0..self.n {
                writeln!(w, "{a},{b},{},{}", self.j(a, b), self.gamma(a, b))?;
            }
        }
        Ok(())
    }
}

pub fn coupling_matrices(geom: &LatticeGeometry, dipole: Vec3) -> Result<CouplingMatrices> {
    CouplingMatrices::from_geometry(geom, dipole)
}
