//! Brute-force reference for the cumulant right-hand side.
//!
//! Operator strings are products of single-site σᵉᵉ, σᵉᵍ, σᵍᵉ. The adjoint
//! master-equation generator is applied literally, every resulting string is
//! reduced with the 2×2 algebra, and expectation values of strings longer than
//! the closure order are expanded with the generic moment–cumulant formula
//! (all joint cumulants above the order set to zero).

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use super::layout::Order;
use super::state::CumulantState;
use crate::couplings::CouplingMatrices;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Ee,
    Eg,
    Ge,
}

pub type Word = BTreeMap<usize, Op>;

#[derive(Clone, Debug, Default)]
pub struct Poly(pub HashMap<Vec<(usize, Op)>, Complex64>);

fn matrix(op: Option<Op>) -> [[f64; 2]; 2] {
    // basis order (e, g)
    match op {
        None => [[1.0, 0.0], [0.0, 1.0]],
        Some(Op::Ee) => [[1.0, 0.0], [0.0, 0.0]],
        Some(Op::Eg) => [[0.0, 1.0], [0.0, 0.0]],
        Some(Op::Ge) => [[0.0, 0.0], [1.0, 0.0]],
    }
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Expand a 2×2 matrix in {1, σᵉᵉ, σᵉᵍ, σᵍᵉ}.
fn expand(m: [[f64; 2]; 2]) -> Vec<(Option<Op>, f64)> {
    let parts = [
        (None, m[1][1]),
        (Some(Op::Ee), m[0][0] - m[1][1]),
        (Some(Op::Eg), m[0][1]),
        (Some(Op::Ge), m[1][0]),
    ];
    parts.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

/// Product of two words as a polynomial.
pub fn mul(a: &Word, b: &Word) -> Vec<(Word, f64)> {
    let mut sites: Vec<usize> = a.keys().chain(b.keys()).copied().collect();
    sites.sort_unstable();
    sites.dedup();
    let mut out = vec![(Word::new(), 1.0)];
    for s in sites {
        let m = mat_mul(matrix(a.get(&s).copied()), matrix(b.get(&s).copied()));
        let e = expand(m);
        let mut next = Vec::with_capacity(out.len() * e.len());
        for (w, c) in &out {
            for &(op, x) in &e {
                let mut w2 = w.clone();
                if let Some(op) = op {
                    w2.insert(s, op);
                }
                next.push((w2, c * x));
            }
        }
        out = next;
    }
    out
}

fn mul3(a: &Word, b: &Word, c: &Word) -> Vec<(Word, f64)> {
    let mut out = Vec::new();
    for (ab, x) in mul(a, b) {
        for (abc, y) in mul(&ab, c) {
            out.push((abc, x * y));
        }
    }
    out
}

impl Poly {
    fn add(&mut self, w: Word, c: Complex64) {
        let key: Vec<(usize, Op)> = w.into_iter().collect();
        *self.0.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c;
    }
}

fn single(site: usize, op: Op) -> Word {
    let mut w = Word::new();
    w.insert(site, op);
    w
}

/// Adjoint generator applied to one operator word, with
/// `Kₐᵦ = Γₐᵦ/2 − iJₐᵦ`:
/// `D(O) = Σₐᵦ Kₐᵦ σₐ⁺[O, σᵦ⁻] + K*ₐᵦ [σₐ⁺, O] σᵦ⁻`.
pub fn generator(o: &Word, c: &CouplingMatrices) -> Poly {
    let n = c.n();
    let mut p = Poly::default();
    for a in 0..n {
        for b in 0..n {
            let k = Complex64::new(0.5 * c.gamma(a, b), -c.j(a, b));
            if k == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (up, down) = (single(a, Op::Eg), single(b, Op::Ge));
            let sandwich = mul3(&up, o, &down);
            let up_down = mul(&up, &down);
            for (w, x) in &sandwich {
                p.add(w.clone(), (k + k.conj()) * *x);
            }
            for (ud, x) in &up_down {
                for (w, y) in mul(ud, o) {
                    p.add(w, -k * (x * y));
                }
                for (w, y) in mul(o, ud) {
                    p.add(w, -k.conj() * (x * y));
                }
            }
        }
    }
    p
}

/// Expectation of a word stored directly in the state (length ≤ order).
fn stored(w: &[(usize, Op)], s: &CumulantState) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    let ee: Vec<usize> = w.iter().filter(|x| x.1 == Op::Ee).map(|x| x.0).collect();
    let eg: Vec<usize> = w.iter().filter(|x| x.1 == Op::Eg).map(|x| x.0).collect();
    let ge: Vec<usize> = w.iter().filter(|x| x.1 == Op::Ge).map(|x| x.0).collect();
    if eg.len() != ge.len() {
        return zero;
    }
    let re = |x: f64| Complex64::new(x, 0.0);
    match (ee.len(), eg.len()) {
        (0, 0) => re(1.0),
        (1, 0) => re(s.pop(ee[0])),
        (2, 0) => re(s.pop2(ee[0], ee[1])),
        (3, 0) => re(s.pop3(ee[0], ee[1], ee[2]).expect("triple outside order 3")),
        (0, 1) => s.coh(eg[0], ge[0]),
        (1, 1) => s.mixed3(ee[0], eg[0], ge[0]).expect("mixed outside order 3"),
        _ => panic!("word {w:?} is not stored"),
    }
}

fn for_each_partition(mask: u32, f: &mut dyn FnMut(&[u32])) {
    fn rec(rest: u32, blocks: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
        if rest == 0 {
            f(blocks);
            return;
        }
        let low = rest & rest.wrapping_neg();
        let others = rest & !low;
        // enumerate subsets of `others`
        let mut sub = others;
        loop {
            blocks.push(low | sub);
            rec(others & !sub, blocks, f);
            blocks.pop();
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
    }
    rec(mask, &mut Vec::new(), f);
}

/// Closed expectation value of a word at the given order.
pub fn expectation(w: &[(usize, Op)], s: &CumulantState, order: usize) -> Complex64 {
    let len = w.len();
    if len <= order {
        return stored(w, s);
    }
    let sub = |mask: u32| -> Vec<(usize, Op)> { (0..len).filter(|b| mask >> b & 1 == 1).map(|b| w[b]).collect() };
    let mut kappa: HashMap<u32, Complex64> = HashMap::new();
    fn cumulant(
        mask: u32,
        kappa: &mut HashMap<u32, Complex64>,
        sub: &dyn Fn(u32) -> Vec<(usize, Op)>,
        s: &CumulantState,
    ) -> Complex64 {
        if let Some(v) = kappa.get(&mask) {
            return *v;
        }
        let mut blocks_list = Vec::new();
        for_each_partition(mask, &mut |b| {
            if b.len() > 1 {
                blocks_list.push(b.to_vec());
            }
        });
        let mut v = stored(&sub(mask), s);
        for blocks in blocks_list {
            let mut prod = Complex64::new(1.0, 0.0);
            for b in blocks {
                prod *= cumulant(b, kappa, sub, s);
            }
            v -= prod;
        }
        kappa.insert(mask, v);
        v
    }
    let full = (1u32 << len) - 1;
    let mut partitions = Vec::new();
    for_each_partition(full, &mut |b| {
        if b.iter().all(|m| m.count_ones() as usize <= order) {
            partitions.push(b.to_vec());
        }
    });
    let mut total = Complex64::new(0.0, 0.0);
    for blocks in partitions {
        let mut prod = Complex64::new(1.0, 0.0);
        for b in blocks {
            prod *= cumulant(b, &mut kappa, &sub, s);
        }
        total += prod;
    }
    total
}

/// Reference derivative of every stored correlator, packed like the state.
pub fn reference_rhs(s: &CumulantState, c: &CouplingMatrices) -> Vec<f64> {
    let n = s.n();
    let order = s.order().as_u8() as usize;
    let l = s.layout().clone();
    let mut out = vec![0.0; l.len()];
    let eval = |o: Word| -> Complex64 {
        generator(&o, c).0.iter().map(|(w, k)| k * expectation(w, s, order)).sum()
    };
    for (i, o) in out[..n].iter_mut().enumerate() {
        *o = eval(single(i, Op::Ee)).re;
    }
    if s.order() >= Order::Second {
        for i in 0..n {
            for j in i + 1..n {
                let d = eval(Word::from([(i, Op::Eg), (j, Op::Ge)]));
                out[l.coh(i, j)] = d.re;
                out[l.coh(i, j) + 1] = d.im;
                out[l.pop2(i, j)] = eval(Word::from([(i, Op::Ee), (j, Op::Ee)])).re;
            }
        }
    }
    if s.order() == Order::Third {
        for i in 0..n {
            for j in 0..n {
                for k in j + 1..n {
                    if i == j || i == k {
                        continue;
                    }
                    let d = eval(Word::from([(i, Op::Ee), (j, Op::Eg), (k, Op::Ge)]));
                    out[l.mixed3(i, j, k)] = d.re;
                    out[l.mixed3(i, j, k) + 1] = d.im;
                    if i < j {
                        out[l.pop3(i, j, k)] = eval(Word::from([(i, Op::Ee), (j, Op::Ee), (k, Op::Ee)])).re;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_algebra() {
        // σ⁻σ⁺ = 1 − σᵉᵉ
        let r = mul(&single(0, Op::Ge), &single(0, Op::Eg));
        assert_eq!(r.len(), 2);
        assert!(r.contains(&(Word::new(), 1.0)));
        assert!(r.contains(&(single(0, Op::Ee), -1.0)));
        assert!(mul(&single(0, Op::Ee), &single(0, Op::Ge)).is_empty());
    }

    #[test]
    fn partitions_count_bell_numbers() {
        for (k, bell) in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52)] {
            let mut c = 0;
            for_each_partition((1 << k) - 1, &mut |_| c += 1);
            assert_eq!(c, bell);
        }
    }

    #[test]
    fn single_atom_decay() {
        let c = CouplingMatrices::dicke(1);
        let g = generator(&single(0, Op::Ee), &c);
        let nonzero: Vec<_> = g.0.iter().filter(|(_, v)| v.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0[..], [(0, Op::Ee)]);
        assert_eq!(*nonzero[0].1, Complex64::new(-1.0, 0.0));
    }
}
