use std::sync::Arc;

use num_complex::Complex64;

use super::layout::{Layout, Order};
use crate::error::{Error, Result};
use crate::lattice::{ExcitationPattern, HolePattern};

/// Packed cumulant snapshot.
///
/// Accessors accept any index tuple; coincident indices are reduced with
/// (σᵉᵉ)² = σᵉᵉ and σᵉᵉσᵉᵍ = 0, so e.g. `coh(i, i)` aliases `pop(i)`.
#[derive(Clone, Debug)]
pub struct CumulantState {
    layout: Arc<Layout>,
    data: Vec<f64>,
    t: f64,
}

impl CumulantState {
    pub fn zeros(n: usize, order: Order) -> Self {
        Self::with_layout(Arc::new(Layout::new(n, order)))
    }

    pub fn with_layout(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.len()];
        Self { layout, data, t: 0.0 }
    }

    pub fn from_data(layout: Arc<Layout>, data: Vec<f64>, t: f64) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::invalid(format!(
                "state vector has {} entries, layout expects {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, data, t })
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn order(&self) -> Order {
        self.layout.order()
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    pub fn pop(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn set_pop(&mut self, i: usize, v: f64) {
        self.data[i] = v;
    }

    /// ⟨σᵢᵉᵍσⱼᵍᵉ⟩. Zero off the diagonal at order 1.
    pub fn coh(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            return Complex64::new(self.pop(i), 0.0);
        }
        if self.order() == Order::First {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = (i.min(j), i.max(j));
        let o = self.layout.coh(a, b);
        let c = Complex64::new(self.data[o], self.data[o + 1]);
        if i < j {
            c
        } else {
            c.conj()
        }
    }

    pub fn set_coh(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(i != j && self.order() >= Order::Second);
        let (a, b, v) = if i < j { (i, j, v) } else { (j, i, v.conj()) };
        let o = self.layout.coh(a, b);
        self.data[o] = v.re;
        self.data[o + 1] = v.im;
    }

    /// ⟨σᵢᵉᵉσⱼᵉᵉ⟩; factorized at order 1.
    pub fn pop2(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.pop(i);
        }
        if self.order() == Order::First {
            return self.pop(i) * self.pop(j);
        }
        self.data[self.layout.pop2(i.min(j), i.max(j))]
    }

    pub fn set_pop2(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j && self.order() >= Order::Second);
        let o = self.layout.pop2(i.min(j), i.max(j));
        self.data[o] = v;
    }

    /// ⟨σᵢᵉᵉσⱼᵉᵉσₖᵉᵉ⟩ for distinct indices; only stored at order 3.
    pub fn pop3(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        if self.order() != Order::Third {
            return None;
        }
        let mut v = [i, j, k];
        v.sort_unstable();
        if v[0] == v[1] || v[1] == v[2] {
            return None;
        }
        Some(self.data[self.layout.pop3(v[0], v[1], v[2])])
    }

    pub fn set_pop3(&mut self, i: usize, j: usize, k: usize, x: f64) {
        let mut v = [i, j, k];
        v.sort_unstable();
        assert!(self.order() == Order::Third && v[0] < v[1] && v[1] < v[2]);
        let o = self.layout.pop3(v[0], v[1], v[2]);
        self.data[o] = x;
    }

    /// ⟨σᵢᵉᵉσⱼᵉᵍσₖᵍᵉ⟩ for distinct indices; only stored at order 3.
    pub fn mixed3(&self, i: usize, j: usize, k: usize) -> Option<Complex64> {
        if self.order() != Order::Third || i == j || i == k || j == k {
            return None;
        }
        let o = self.layout.mixed3(i, j.min(k), j.max(k));
        let c = Complex64::new(self.data[o], self.data[o + 1]);
        Some(if j < k { c } else { c.conj() })
    }

    pub fn set_mixed3(&mut self, i: usize, j: usize, k: usize, v: Complex64) {
        assert!(self.order() == Order::Third && i != j && i != k && j != k);
        let (a, b, v) = if j < k { (j, k, v) } else { (k, j, v.conj()) };
        let o = self.layout.mixed3(i, a, b);
        self.data[o] = v.re;
        self.data[o + 1] = v.im;
    }

    /// Total excitation Σᵢ⟨σᵢᵉᵉ⟩.
    pub fn p_exc(&self) -> f64 {
        self.data[..self.n()].iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Incoherent product state with `pattern` excited.
///
/// Sites missing from `holes` are dropped, so the returned state spans only
/// the filled sites, relabelled in increasing order.
pub fn init_state(pattern: &ExcitationPattern, holes: &HolePattern, order: Order) -> Result<CumulantState> {
    if pattern.n_sites() != holes.n_sites() {
        return Err(Error::invalid(format!(
            "excitation pattern covers {} sites but hole pattern covers {}",
            pattern.n_sites(),
            holes.n_sites()
        )));
    }
    if let Some(&i) = pattern.excited().iter().find(|&&i| !holes.is_filled(i)) {
        return Err(Error::invalid(format!("site {i} is a hole and cannot be excited")));
    }
    let occ: Vec<f64> = holes
        .filled()
        .iter()
        .map(|&i| if pattern.is_excited(i) { 1.0 } else { 0.0 })
        .collect();
    Ok(product_state(&occ, order))
}

/// Incoherent product state from per-site occupations in {0, 1}.
pub fn product_state(occ: &[f64], order: Order) -> CumulantState {
    let n = occ.len();
    let mut s = CumulantState::zeros(n, order);
    for (i, &x) in occ.iter().enumerate() {
        s.set_pop(i, x);
    }
    if order >= Order::Second {
        for i in 0..n {
            for j in i + 1..n {
                s.set_pop2(i, j, occ[i] * occ[j]);
            }
        }
    }
    if order == Order::Third {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    s.set_pop3(i, j, k, occ[i] * occ[j] * occ[k]);
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_inversion_order2() {
        let s = init_state(&ExcitationPattern::full(3), &HolePattern::none(3), Order::Second).unwrap();
        for i in 0..3 {
            assert_eq!(s.pop(i), 1.0);
            for j in 0..3 {
                assert_eq!(s.pop2(i, j), 1.0);
                if i != j {
                    assert_eq!(s.coh(i, j), Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn single_excitation_of_two() {
        let p = ExcitationPattern::new(2, vec![0]).unwrap();
        let s = init_state(&p, &HolePattern::none(2), Order::Second).unwrap();
        assert_eq!((s.pop(0), s.pop(1)), (1.0, 0.0));
        assert_eq!(s.pop2(0, 1), 0.0);
    }

    #[test]
    fn triples_need_all_three_excited() {
        let p = ExcitationPattern::new(3, vec![0, 2]).unwrap();
        let s = init_state(&p, &HolePattern::none(3), Order::Third).unwrap();
        assert_eq!(s.pop3(0, 1, 2), Some(0.0));
        assert_eq!(s.pop2(0, 2), 1.0);
        assert_eq!(s.mixed3(0, 1, 2), Some(Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn holes_are_removed() {
        let holes = HolePattern::new(4, vec![0, 2, 3]).unwrap();
        let p = ExcitationPattern::new(4, vec![2, 3]).unwrap();
        let s = init_state(&p, &holes, Order::Second).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.p_exc(), 2.0);
        assert_eq!(s.pop(0), 0.0);

        let bad = ExcitationPattern::new(4, vec![1]).unwrap();
        assert!(init_state(&bad, &holes, Order::Second).is_err());
    }

    #[test]
    fn symmetric_accessors() {
        let mut s = CumulantState::zeros(4, Order::Third);
        let c = Complex64::new(0.3, -0.2);
        s.set_coh(2, 1, c);
        assert_eq!(s.coh(2, 1), c);
        assert_eq!(s.coh(1, 2), c.conj());
        s.set_mixed3(0, 3, 1, c);
        assert_eq!(s.mixed3(0, 3, 1), Some(c));
        assert_eq!(s.mixed3(0, 1, 3), Some(c.conj()));
        s.set_pop3(3, 0, 2, 0.25);
        for p in [[0, 2, 3], [2, 3, 0], [3, 2, 0], [0, 3, 2]] {
            assert_eq!(s.pop3(p[0], p[1], p[2]), Some(0.25));
        }
        assert_eq!(s.pop3(1, 1, 2), None);
    }
}
