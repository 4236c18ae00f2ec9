//! Packing of cumulant correlators into one flat real vector.
//!
//! Segments, in order:
//!
//! | segment | entries                          | reals per entry |
//! |---------|----------------------------------|-----------------|
//! | pop     | ⟨σᵢᵉᵉ⟩, all i                     | 1               |
//! | coh     | ⟨σᵢᵉᵍσⱼᵍᵉ⟩, i < j                 | 2 (re, im)      |
//! | pop2    | ⟨σᵢᵉᵉσⱼᵉᵉ⟩, i < j                 | 1               |
//! | pop3    | ⟨σᵢᵉᵉσⱼᵉᵉσₖᵉᵉ⟩, i < j < k          | 1               |
//! | mixed3  | ⟨σᵢᵉᵉσⱼᵉᵍσₖᵍᵉ⟩, i ∉ {j,k}, j < k   | 2 (re, im)      |
//!
//! Order 1 keeps only `pop`; order 2 adds `coh` and `pop2`; order 3 adds the rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    First,
    Second,
    Third,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
            Order::Third => 3,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            3 => Ok(Order::Third),
            _ => Err(Error::invalid(format!("cumulant order {v} is not supported (1–3)"))),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.as_u8()
    }
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct Layout {
    n: usize,
    order: Order,
    pair: Vec<u32>,
    triple: Vec<u32>,
    mixed: Vec<u32>,
    n_pairs: usize,
    n_triples: usize,
    n_mixed: usize,
}

impl Layout {
    pub fn new(n: usize, order: Order) -> Self {
        let mut pair = Vec::new();
        let mut n_pairs = 0;
        if order >= Order::Second {
            pair = vec![NONE; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    pair[i * n + j] = n_pairs as u32;
                    n_pairs += 1;
                }
            }
        }
        let (mut triple, mut mixed) = (Vec::new(), Vec::new());
        let (mut n_triples, mut n_mixed) = (0, 0);
        if order == Order::Third {
            triple = vec![NONE; n * n * n];
            mixed = vec![NONE; n * n * n];
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        triple[(i * n + j) * n + k] = n_triples as u32;
                        n_triples += 1;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for k in j + 1..n {
                        if i != j && i != k {
                            mixed[(i * n + j) * n + k] = n_mixed as u32;
                            n_mixed += 1;
                        }
                    }
                }
            }
        }
        Self { n, order, pair, triple, mixed, n_pairs, n_triples, n_mixed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn len(&self) -> usize {
        self.n + 3 * self.n_pairs + self.n_triples + 2 * self.n_mixed
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_triples(&self) -> usize {
        self.n_triples
    }

    pub fn n_mixed(&self) -> usize {
        self.n_mixed
    }

    #[inline]
    pub fn pop(&self, i: usize) -> usize {
        i
    }

    /// Offset of the real part of ⟨σᵢᵉᵍσⱼᵍᵉ⟩ for `i < j`.
    #[inline]
    pub fn coh(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        self.n + 2 * self.pair[i * self.n + j] as usize
    }

    #[inline]
    pub fn pop2(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        self.n + 2 * self.n_pairs + self.pair[i * self.n + j] as usize
    }

    #[inline]
    pub fn pop3(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < j && j < k);
        self.n + 3 * self.n_pairs + self.triple[(i * self.n + j) * self.n + k] as usize
    }

    /// Offset of the real part of ⟨σᵢᵉᵉσⱼᵉᵍσₖᵍᵉ⟩ for `j < k`.
    #[inline]
    pub fn mixed3(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(j < k && i != j && i != k);
        self.n + 3 * self.n_pairs + self.n_triples + 2 * self.mixed[(i * self.n + j) * self.n + k] as usize
    }

    /// Approximate number of bytes held by one state vector.
    pub fn state_bytes(&self) -> usize {
        self.len() * std::mem::size_of::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sizes() {
        assert_eq!(Layout::new(5, Order::First).len(), 5);
        assert_eq!(Layout::new(5, Order::Second).len(), 5 + 3 * 10);
        let l = Layout::new(5, Order::Third);
        assert_eq!(l.n_triples(), 10);
        assert_eq!(l.n_mixed(), 5 * 6);
        assert_eq!(l.len(), 5 + 30 + 10 + 60);
    }

    #[test]
    fn offsets_are_a_partition() {
        let n = 6;
        let l = Layout::new(n, Order::Third);
        let mut seen = HashSet::new();
        let mut put = |o: usize| assert!(seen.insert(o), "offset {o} reused");
        for i in 0..n {
            put(l.pop(i));
            for j in i + 1..n {
                put(l.coh(i, j));
                put(l.coh(i, j) + 1);
                put(l.pop2(i, j));
                for k in j + 1..n {
                    put(l.pop3(i, j, k));
                }
            }
            for j in 0..n {
                for k in j + 1..n {
                    if i != j && i != k {
                        put(l.mixed3(i, j, k));
                        put(l.mixed3(i, j, k) + 1);
                    }
                }
            }
        }
        assert_eq!(seen.len(), l.len());
        assert!(seen.iter().all(|&o| o < l.len()));
    }

    #[test]
    fn order_conversion() {
        assert_eq!(Order::try_from(3).unwrap(), Order::Third);
        assert!(Order::try_from(4).is_err());
        assert!(Order::try_from(0).is_err());
    }
}
