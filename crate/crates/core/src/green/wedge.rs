//! Symmetry-reduced lattice domains and exact walk-distribution dynamic
//! programming.
//!
//! Both p_n and every Green-type kernel here are invariant under coordinate
//! permutations and sign flips, so state lives on canonical representatives
//! (absolute coordinates sorted in decreasing order): a factor of up to
//! 2^d d! in space and time. A DP step is a gather from the 2d neighbors of
//! the representative, each mapped back to canonical form via a precomputed
//! index table.

use rayon::prelude::*;

use crate::hash::FxHashMap;
use crate::lattice::{Point, MAX_D};

/// Canonical orbit key: |coords| sorted in decreasing order.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct CanonKey(pub [i16; MAX_D]);

pub fn canon_key(p: &Point, d: usize) -> CanonKey {
    let mut k = [0i16; MAX_D];
    for i in 0..d {
        let a = p.coord(i).unsigned_abs();
        debug_assert!(a <= i16::MAX as u64);
        k[i] = a as i16;
    }
    k[..d].sort_unstable_by(|a, b| b.cmp(a));
    CanonKey(k)
}

const DEAD: u32 = u32::MAX;

/// Enumerated canonical domain with the neighbor-gather table.
pub struct WedgeDomain {
    pub d: usize,
    keys: Vec<CanonKey>,
    index: FxHashMap<CanonKey, u32>,
    /// 2d entries per site; DEAD marks a neighbor outside the domain.
    neighbors: Vec<u32>,
}

impl WedgeDomain {
    /// All canonical sites with squared L2 norm <= `r2_cap` and L1 norm
    /// <= `l1_cap` (pass `i64::MAX` to disable).
    pub fn build(d: usize, r2_cap: f64, l1_cap: i64) -> WedgeDomain {
        let mut keys = Vec::new();
        let mut cur = [0i16; MAX_D];
        let max_coord = (r2_cap.sqrt().floor() as i64).min(l1_cap).min(i16::MAX as i64) as i16;
        enumerate(d, 0, max_coord, 0.0, 0, r2_cap, l1_cap, &mut cur, &mut keys);
        let mut index = FxHashMap::default();
        index.reserve(keys.len());
        for (i, k) in keys.iter().enumerate() {
            index.insert(*k, i as u32);
        }
        let neighbors = build_neighbors(d, &keys, &index);
        WedgeDomain {
            d,
            keys,
            index,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[CanonKey] {
        &self.keys
    }

    pub fn index_of(&self, key: &CanonKey) -> Option<usize> {
        self.index.get(key).map(|&i| i as usize)
    }

    pub fn index_of_point(&self, p: &Point) -> Option<usize> {
        self.index_of(&canon_key(p, self.d))
    }

    /// Orbit cardinality of a canonical site: permutations of the multiset of
    /// absolute values times sign choices of the nonzero coordinates.
    pub fn orbit_size(key: &CanonKey, d: usize) -> f64 {
        let mut perms = 1.0;
        for i in 1..=d {
            perms *= i as f64;
        }
        let mut i = 0;
        let mut nonzero = 0;
        while i < d {
            let mut j = i;
            while j < d && key.0[j] == key.0[i] {
                j += 1;
            }
            let mut run = 1.0;
            for m in 1..=(j - i) {
                run *= m as f64;
            }
            perms /= run;
            if key.0[i] != 0 {
                nonzero += j - i;
            }
            i = j;
        }
        perms * (1u64 << nonzero) as f64
    }

    /// All lattice points in the orbit of a canonical key (test utility).
    pub fn orbit_points(key: &CanonKey, d: usize) -> Vec<Point> {
        let mut coords: Vec<i64> = key.0[..d].iter().map(|&v| v as i64).collect();
        coords.sort_unstable();
        let mut out = Vec::new();
        loop {
            // all sign choices on nonzero coordinates
            let nz: Vec<usize> = (0..d).filter(|&i| coords[i] != 0).collect();
            for mask in 0u32..(1 << nz.len()) {
                let mut c = coords.clone();
                for (b, &i) in nz.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        c[i] = -c[i];
                    }
                }
                out.push(Point::from_coords(&c));
            }
            if !next_permutation(&mut coords) {
                break;
            }
        }
        out
    }
}

fn next_permutation(v: &mut [i64]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    d: usize,
    pos: usize,
    max_allowed: i16,
    norm2: f64,
    norm1: i64,
    r2_cap: f64,
    l1_cap: i64,
    cur: &mut [i16; MAX_D],
    out: &mut Vec<CanonKey>,
) {
    if pos == d {
        out.push(CanonKey(*cur));
        return;
    }
    let mut v = max_allowed;
    loop {
        let vf = v as f64;
        let n2 = norm2 + vf * vf;
        let n1 = norm1 + v as i64;
        if n2 <= r2_cap && n1 <= l1_cap {
            cur[pos] = v;
            enumerate(d, pos + 1, v, n2, n1, r2_cap, l1_cap, cur, out);
        }
        if v == 0 {
            break;
        }
        v -= 1;
    }
    cur[pos] = 0;
}

fn build_neighbors(d: usize, keys: &[CanonKey], index: &FxHashMap<CanonKey, u32>) -> Vec<u32> {
    let stride = 2 * d;
    let mut nbr = vec![DEAD; keys.len() * stride];
    nbr.par_chunks_mut(stride)
        .zip(keys.par_iter())
        .for_each(|(slot, key)| {
            for axis in 0..d {
                for (s, delta) in [(0usize, 1i16), (1usize, -1i16)] {
                    let mut k = key.0;
                    k[axis] += delta;
                    // re-canonicalize: abs then sort desc
                    let mut arr = k;
                    for v in arr[..d].iter_mut() {
                        *v = v.abs();
                    }
                    arr[..d].sort_unstable_by(|a, b| b.cmp(a));
                    slot[2 * axis + s] = index.get(&CanonKey(arr)).copied().unwrap_or(DEAD);
                }
            }
        });
    nbr
}

/// Walk-distribution DP on a wedge domain: `values[i]` is p_k evaluated at
/// the canonical site i (the value at one point of the orbit, not the orbit
/// mass). Stepping loses the mass that exits the domain, which the domain
/// radius is chosen to make negligible.
pub struct WedgeWalker<'a> {
    pub dom: &'a WedgeDomain,
    cur: Vec<f64>,
    next: Vec<f64>,
    pub k: usize,
}

impl<'a> WedgeWalker<'a> {
    /// Start from the delta distribution at the origin.
    pub fn new(dom: &'a WedgeDomain) -> WedgeWalker<'a> {
        let mut cur = vec![0.0; dom.len()];
        let origin = dom
            .index_of(&CanonKey([0; MAX_D]))
            .expect("domain must contain the origin");
        cur[origin] = 1.0;
        WedgeWalker {
            dom,
            cur,
            next: vec![0.0; dom.len()],
            k: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.cur
    }

    pub fn value_at(&self, p: &Point) -> f64 {
        self.dom
            .index_of_point(p)
            .map(|i| self.cur[i])
            .unwrap_or(0.0)
    }

    /// Advance one time step: p_{k+1}(z) = (2d)^{-1} sum_e p_k(z - e).
    pub fn step(&mut self) {
        let stride = 2 * self.dom.d;
        let inv = 1.0 / stride as f64;
        let cur = &self.cur;
        let nbr = &self.dom.neighbors;
        self.next
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, out)| {
                let base = i * stride;
                let mut acc = 0.0;
                for j in 0..stride {
                    let idx = nbr[base + j];
                    if idx != DEAD {
                        acc += cur[idx as usize];
                    }
                }
                *out = acc * inv;
            });
        std::mem::swap(&mut self.cur, &mut self.next);
        self.k += 1;
    }

    /// Total mass currently inside the domain (orbit-weighted).
    pub fn total_mass(&self) -> f64 {
        self.dom
            .keys()
            .iter()
            .zip(&self.cur)
            .map(|(k, &v)| v * WedgeDomain::orbit_size(k, self.dom.d))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canon_is_orbit_invariant() {
        let p = Point::from_coords(&[3, -1, 0, 2, -3]);
        let q = Point::from_coords(&[-3, 3, 2, 0, 1]);
        assert_eq!(canon_key(&p, 5), canon_key(&q, 5));
        assert_eq!(canon_key(&p, 5).0[..5], [3, 3, 2, 1, 0]);
    }

    #[test]
    fn orbit_sizes_and_points_agree() {
        for coords in [
            [0i64, 0, 0, 0, 0],
            [1, 0, 0, 0, 0],
            [2, 1, 0, 0, 0],
            [1, 1, 1, 1, 1],
            [3, 2, 2, 1, 0],
        ] {
            let key = canon_key(&Point::from_coords(&coords), 5);
            let pts = WedgeDomain::orbit_points(&key, 5);
            let mut dedup = pts.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), pts.len(), "orbit has duplicates");
            assert_eq!(pts.len() as f64, WedgeDomain::orbit_size(&key, 5));
        }
    }

    #[test]
    fn dp_matches_brute_force_small() {
        // brute-force p_k on Z^3 by hash map convolution
        use crate::hash::FxHashMap;
        let d = 3;
        let mut dist: FxHashMap<Point, f64> = FxHashMap::default();
        dist.insert(Point::origin(), 1.0);
        let dom = WedgeDomain::build(d, 300.0, i64::MAX);
        let mut walker = WedgeWalker::new(&dom);
        for _step in 0..8 {
            let mut next: FxHashMap<Point, f64> = FxHashMap::default();
            for (p, m) in &dist {
                for axis in 0..d {
                    for delta in [1i64, -1] {
                        *next.entry(p.shifted(axis, delta)).or_insert(0.0) += m / (2 * d) as f64;
                    }
                }
            }
            dist = next;
            walker.step();
            for (p, m) in &dist {
                let got = walker.value_at(p);
                assert!((got - m).abs() < 1e-14, "p={p:?} got {got} want {m}");
            }
            assert!((walker.total_mass() - 1.0).abs() < 1e-12);
        }
    }
}
