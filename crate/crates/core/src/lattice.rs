//! Lattice primitives: points of Z^d, simple-random-walk trajectories,
//! finite point sets with O(1) membership, and an occupancy index for exact
//! local-time queries on cubes.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::{FxHashMap, FxHashSet};
use crate::rng::Stream;

/// Hard upper bound on the ambient dimension. The walk dimensions of
/// interest are 5 and 7; everything from 3 to 8 is supported.
pub const MAX_D: usize = 8;

pub fn check_dimension(d: usize) -> Result<()> {
    if (3..=MAX_D).contains(&d) {
        Ok(())
    } else {
        Err(Error::BadDimension(d))
    }
}

/// A point of Z^d. Coordinates beyond the ambient dimension stay zero, so
/// equality and hashing are dimension-agnostic.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Point {
    c: [i64; MAX_D],
}

impl Point {
    pub fn origin() -> Self {
        Self::default()
    }

    pub fn from_coords(coords: &[i64]) -> Self {
        debug_assert!(coords.len() <= MAX_D);
        let mut c = [0i64; MAX_D];
        c[..coords.len()].copy_from_slice(coords);
        Point { c }
    }

    pub fn unit(axis: usize) -> Self {
        let mut c = [0i64; MAX_D];
        c[axis] = 1;
        Point { c }
    }

    #[inline]
    pub fn coord(&self, i: usize) -> i64 {
        self.c[i]
    }

    #[inline]
    pub fn coords(&self, d: usize) -> &[i64] {
        &self.c[..d]
    }

    #[inline]
    pub fn shifted(&self, axis: usize, delta: i64) -> Self {
        let mut c = self.c;
        c[axis] += delta;
        Point { c }
    }

    #[inline]
    pub fn add(&self, other: &Point) -> Self {
        let mut c = self.c;
        for i in 0..MAX_D {
            c[i] += other.c[i];
        }
        Point { c }
    }

    #[inline]
    pub fn sub(&self, other: &Point) -> Self {
        let mut c = self.c;
        for i in 0..MAX_D {
            c[i] -= other.c[i];
        }
        Point { c }
    }

    /// Squared Euclidean norm.
    #[inline]
    pub fn norm2_sq(&self) -> f64 {
        let mut s = 0.0;
        for &x in &self.c {
            s += (x * x) as f64;
        }
        s
    }

    #[inline]
    pub fn norm1(&self) -> i64 {
        self.c.iter().map(|x| x.abs()).sum()
    }

    #[inline]
    pub fn norm_inf(&self) -> i64 {
        self.c.iter().map(|x| x.abs()).max().unwrap()
    }

    pub fn to_text(&self, d: usize) -> String {
        let mut s = String::new();
        for i in 0..d {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", self.c[i]);
        }
        s
    }
}

impl std::fmt::Debug for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Point{:?}", &self.c)
    }
}

/// A nearest-neighbor trajectory S_0..S_n with its generating seed.
#[derive(Clone, Debug)]
pub struct Walk {
    pub d: usize,
    pub seed: u64,
    steps: Vec<Point>,
}

impl Walk {
    /// Simulate a simple random walk from the origin: `n` unit steps chosen
    /// uniformly among the 2d neighbors. Pure function of `(n, seed, d)`.
    pub fn simulate(n: usize, seed: u64, d: usize) -> Result<Walk> {
        check_dimension(d)?;
        let mut rng = Stream::new(seed, 0);
        Ok(Self::simulate_stream(n, seed, d, &mut rng))
    }

    /// Same as [`Walk::simulate`] but drawing from a caller-provided stream
    /// (used to derive many independent walks from one experiment seed).
    pub fn simulate_stream(n: usize, seed: u64, d: usize, rng: &mut Stream) -> Walk {
        let mut steps = Vec::with_capacity(n + 1);
        let mut pos = Point::origin();
        steps.push(pos);
        for _ in 0..n {
            let dir = rng.below(2 * d as u64) as usize;
            let axis = dir >> 1;
            let delta = if dir & 1 == 0 { 1 } else { -1 };
            pos = pos.shifted(axis, delta);
            debug_assert!(pos.norm_inf() < (1i64 << 40));
            steps.push(pos);
        }
        Walk { d, seed, steps }
    }

    pub fn from_steps(d: usize, seed: u64, steps: Vec<Point>) -> Walk {
        Walk { d, seed, steps }
    }

    /// Number of steps (the trajectory holds `n + 1` positions).
    pub fn n(&self) -> usize {
        self.steps.len() - 1
    }

    #[inline]
    pub fn position(&self, k: usize) -> Point {
        self.steps[k]
    }

    pub fn positions(&self) -> &[Point] {
        &self.steps
    }

    /// Distinct sites visited during the closed time window `[k, l]`.
    pub fn range_of(&self, k: usize, l: usize) -> Result<PointSet> {
        if k > l || l > self.n() {
            return Err(Error::OutOfRange(format!(
                "range [{k}, {l}] of walk with n = {}",
                self.n()
            )));
        }
        let mut set = PointSet::new(self.d);
        for t in k..=l {
            set.insert(self.steps[t]);
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "d={}", self.d)?;
        writeln!(f, "seed={} n={}", self.seed, self.n())?;
        for p in &self.steps {
            writeln!(f, "{}", p.to_text(self.d))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Walk> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let d = parse_dim_line(&mut lines)?;
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing walk header".into()))??;
        let (seed, n) = parse_walk_header(&header)?;
        let mut steps = Vec::with_capacity(n + 1);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            steps.push(parse_point(&line, d)?);
        }
        if steps.len() != n + 1 {
            return Err(Error::Parse(format!(
                "walk file promises n={n} but contains {} positions",
                steps.len()
            )));
        }
        for w in steps.windows(2) {
            if w[1].sub(&w[0]).norm1() != 1 {
                return Err(Error::Parse("walk file contains a non-unit step".into()));
            }
        }
        Ok(Walk { d, seed, steps })
    }
}

/// Finite subset of Z^d with O(1) membership, stable insertion order and a
/// bounding box.
#[derive(Clone, Debug)]
pub struct PointSet {
    pub d: usize,
    members: FxHashSet<Point>,
    order: Vec<Point>,
    bbox_min: [i64; MAX_D],
    bbox_max: [i64; MAX_D],
}

impl PointSet {
    pub fn new(d: usize) -> Self {
        PointSet {
            d,
            members: FxHashSet::default(),
            order: Vec::new(),
            bbox_min: [i64::MAX; MAX_D],
            bbox_max: [i64::MIN; MAX_D],
        }
    }

    pub fn from_points(d: usize, pts: impl IntoIterator<Item = Point>) -> Self {
        let mut s = Self::new(d);
        for p in pts {
            s.insert(p);
        }
        s
    }

    /// Insert a point; returns false if it was already present.
    pub fn insert(&mut self, p: Point) -> bool {
        if !self.members.insert(p) {
            return false;
        }
        for i in 0..self.d {
            self.bbox_min[i] = self.bbox_min[i].min(p.coord(i));
            self.bbox_max[i] = self.bbox_max[i].max(p.coord(i));
        }
        self.order.push(p);
        true
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        self.members.contains(p)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Points in insertion order.
    pub fn points(&self) -> &[Point] {
        &self.order
    }

    pub fn bbox(&self) -> Option<(&[i64], &[i64])> {
        if self.is_empty() {
            None
        } else {
            Some((&self.bbox_min[..self.d], &self.bbox_max[..self.d]))
        }
    }

    pub fn bbox_center(&self) -> Point {
        let mut c = [0i64; MAX_D];
        if !self.is_empty() {
            for i in 0..self.d {
                c[i] = (self.bbox_min[i] + self.bbox_max[i]) / 2;
            }
        }
        Point { c }
    }

    /// Euclidean diameter of the bounding box (an upper bound on the set
    /// diameter, exact enough for bias reporting).
    pub fn diameter(&self) -> f64 {
        match self.bbox() {
            None => 0.0,
            Some((lo, hi)) => {
                let mut s = 0.0;
                for i in 0..self.d {
                    let w = (hi[i] - lo[i]) as f64;
                    s += w * w;
                }
                s.sqrt()
            }
        }
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut u = self.clone();
        for p in other.points() {
            u.insert(*p);
        }
        u
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        let mut v = PointSet::new(self.d);
        for p in self.points() {
            if other.contains(p) {
                v.insert(*p);
            }
        }
        v
    }

    pub fn translate(&self, z: &Point) -> PointSet {
        PointSet::from_points(self.d, self.order.iter().map(|p| p.add(z)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "d={}", self.d)?;
        for p in &self.order {
            writeln!(f, "{}", p.to_text(self.d))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PointSet> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let d = parse_dim_line(&mut lines)?;
        let mut set = PointSet::new(d);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            set.insert(parse_point(&line, d)?);
        }
        Ok(set)
    }
}

fn parse_dim_line(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<usize> {
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty point-set file".into()))??;
    let d: usize = first
        .trim()
        .strip_prefix("d=")
        .ok_or_else(|| Error::Parse(format!("expected 'd=<dim>', got '{first}'")))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
    check_dimension(d)?;
    Ok(d)
}

fn parse_walk_header(line: &str) -> Result<(u64, usize)> {
    let mut seed = None;
    let mut n = None;
    for tok in line.split_whitespace() {
        if let Some(v) = tok.strip_prefix("seed=") {
            seed = Some(
                v.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("bad seed: {e}")))?,
            );
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = Some(
                v.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad n: {e}")))?,
            );
        }
    }
    match (seed, n) {
        (Some(s), Some(n)) => Ok((s, n)),
        _ => Err(Error::Parse(format!("bad walk header '{line}'"))),
    }
}

fn parse_point(line: &str, d: usize) -> Result<Point> {
    let coords: std::result::Result<Vec<i64>, _> =
        line.split_whitespace().map(|t| t.parse::<i64>()).collect();
    let coords = coords.map_err(|e| Error::Parse(format!("bad point '{line}': {e}")))?;
    if coords.len() != d {
        return Err(Error::Parse(format!(
            "point '{line}' has {} coordinates, expected {d}",
            coords.len()
        )));
    }
    Ok(Point::from_coords(&coords))
}

/// Offsets of the half-open cube Q(x, r) = [x - r/2, x + r/2)^d relative to
/// an integer center: per axis, `-floor(r/2) ..= ceil(r/2) - 1`. Odd r gives
/// the symmetric window, even r the half-open asymmetric one; both contain
/// exactly r points per axis.
#[inline]
pub fn cube_offset_bounds(r: i64) -> (i64, i64) {
    (-(r / 2), (r + 1) / 2 - 1)
}

#[inline]
pub fn in_cube(p: &Point, center: &Point, r: i64, d: usize) -> bool {
    let (lo, hi) = cube_offset_bounds(r);
    for i in 0..d {
        let o = p.coord(i) - center.coord(i);
        if o < lo || o > hi {
            return false;
        }
    }
    true
}

/// Spatial index of a trajectory on the aligned grid of cells of side
/// `cell_side`: cell id = floor-division of coordinates. Supports exact
/// local-time queries `l_n(Q(center, r))` for `r = cell_side`.
#[derive(Clone, Debug)]
pub struct OccupancyIndex {
    pub d: usize,
    pub cell_side: i64,
    pub total: usize,
    cells: FxHashMap<Point, Vec<(u32, Point)>>,
}

impl OccupancyIndex {
    pub fn build(walk: &Walk, cell_side: i64) -> Result<OccupancyIndex> {
        if cell_side < 1 {
            return Err(Error::InvalidArgument(format!(
                "cell side must be >= 1, got {cell_side}"
            )));
        }
        let mut cells: FxHashMap<Point, Vec<(u32, Point)>> = FxHashMap::default();
        for (k, p) in walk.positions().iter().enumerate() {
            let mut id = [0i64; MAX_D];
            for i in 0..walk.d {
                id[i] = p.coord(i).div_euclid(cell_side);
            }
            cells
                .entry(Point::from_coords(&id[..walk.d]))
                .or_default()
                .push((k as u32, *p));
        }
        Ok(OccupancyIndex {
            d: walk.d,
            cell_side,
            total: walk.n() + 1,
            cells,
        })
    }

    /// Exact number of times k <= n with S_k in Q(center, r), r = cell_side.
    /// Gathers the <= 2^d aligned cells intersecting the cube and tests
    /// membership exactly.
    pub fn local_time(&self, center: &Point, r: i64) -> Result<usize> {
        if r != self.cell_side {
            return Err(Error::InvalidArgument(format!(
                "index built with cell side {}, queried with r = {r}",
                self.cell_side
            )));
        }
        let (lo, hi) = cube_offset_bounds(r);
        let d = self.d;
        // Aligned cells touched per axis: the cells of the cube's two corners.
        let mut cell_lo = [0i64; MAX_D];
        let mut cell_hi = [0i64; MAX_D];
        for i in 0..d {
            cell_lo[i] = (center.coord(i) + lo).div_euclid(r);
            cell_hi[i] = (center.coord(i) + hi).div_euclid(r);
        }
        let mut count = 0usize;
        let mut id = cell_lo;
        loop {
            if let Some(list) = self.cells.get(&Point::from_coords(&id[..d])) {
                for (_, p) in list {
                    if in_cube(p, center, r, d) {
                        count += 1;
                    }
                }
            }
            // advance the mixed-radix counter over touched cells
            let mut axis = 0;
            loop {
                if axis == d {
                    return Ok(count);
                }
                id[axis] += 1;
                if id[axis] <= cell_hi[axis] {
                    break;
                }
                id[axis] = cell_lo[axis];
                axis += 1;
            }
        }
    }

    /// Times spent in an arbitrary-side cube by brute-force scan; test oracle
    /// and fallback when no matching index exists.
    pub fn local_time_scan(walk: &Walk, center: &Point, r: i64) -> usize {
        walk.positions()
            .iter()
            .filter(|p| in_cube(p, center, r, walk.d))
            .count()
    }
}

/// Summary of one walk used across experiment records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkMeta {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub range_size: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_walk_is_origin() {
        let w = Walk::simulate(0, 42, 5).unwrap();
        assert_eq!(w.n(), 0);
        assert_eq!(w.position(0), Point::origin());
    }

    #[test]
    fn one_step_walk_is_unit_neighbor() {
        for seed in 0..20 {
            let w = Walk::simulate(1, seed, 5).unwrap();
            assert_eq!(w.position(1).norm1(), 1);
        }
    }

    #[test]
    fn walk_is_pure_function_of_inputs() {
        let a = Walk::simulate(500, 9, 5).unwrap();
        let b = Walk::simulate(500, 9, 5).unwrap();
        assert_eq!(a.positions(), b.positions());
        let c = Walk::simulate(500, 10, 5).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn step_direction_frequencies_within_four_sigma() {
        // 10^6 steps; each of the 2d = 10 directions is Binomial(n, 1/10).
        let n = 1_000_000;
        let w = Walk::simulate(n, 1234, 5).unwrap();
        let mut counts = [0i64; 10];
        for k in 0..n {
            let step = w.position(k + 1).sub(&w.position(k));
            for axis in 0..5 {
                match step.coord(axis) {
                    1 => counts[2 * axis] += 1,
                    -1 => counts[2 * axis + 1] += 1,
                    _ => {}
                }
            }
        }
        let p = 0.1;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - n as f64 * p).abs() <= 4.0 * sigma,
                "direction count {c} outside 4 sigma"
            );
        }
    }

    #[test]
    fn range_basics() {
        let w = Walk::simulate(100, 3, 5).unwrap();
        for k in [0usize, 17, 100] {
            let r = w.range_of(k, k).unwrap();
            assert_eq!(r.len(), 1);
            assert!(r.contains(&w.position(k)));
        }
        // splitting identity at any midpoint
        let full = w.range_of(0, 100).unwrap();
        for m in [0usize, 1, 50, 99, 100] {
            let left = w.range_of(0, m).unwrap();
            let right = w.range_of(m, 100).unwrap();
            let glued = left.union(&right);
            assert_eq!(glued.len(), full.len());
            for p in full.points() {
                assert!(glued.contains(p));
            }
        }
        assert!(w.range_of(5, 3).is_err());
        assert!(w.range_of(0, 101).is_err());
    }

    #[test]
    fn straight_line_walk_has_full_range() {
        let steps: Vec<Point> = (0..=30).map(|k| Point::from_coords(&[k, 0, 0, 0, 0])).collect();
        let w = Walk::from_steps(5, 0, steps);
        assert_eq!(w.range_of(0, 30).unwrap().len(), 31);
    }

    #[test]
    fn cube_conventions() {
        // odd side: symmetric window with r^d points
        assert_eq!(cube_offset_bounds(3), (-1, 1));
        // even side: half-open window, still r points per axis
        assert_eq!(cube_offset_bounds(4), (-2, 1));
        let c = Point::origin();
        let mut count = 0;
        for x in -3..=3 {
            for y in -3..=3 {
                if in_cube(&Point::from_coords(&[x, y, 0, 0, 0]), &c, 3, 2) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 9);
    }

    #[test]
    fn local_time_matches_brute_force_and_partitions() {
        let w = Walk::simulate(600, 7, 5).unwrap();
        for r in [1i64, 2, 3, 5] {
            let idx = OccupancyIndex::build(&w, r).unwrap();
            // partition identity over aligned grid cells
            let mut seen = FxHashSet::default();
            let mut total = 0usize;
            for p in w.positions() {
                let mut id = [0i64; MAX_D];
                for i in 0..5 {
                    id[i] = p.coord(i).div_euclid(r);
                }
                let cell = Point::from_coords(&id[..5]);
                if seen.insert(cell) {
                    let mut center = [0i64; MAX_D];
                    for i in 0..5 {
                        // center whose cube [c - r/2, c + r/2) equals the cell
                        center[i] = id[i] * r + r / 2;
                    }
                    total += idx
                        .local_time(&Point::from_coords(&center[..5]), r)
                        .unwrap();
                }
            }
            assert_eq!(total, 601, "partition failed at r={r}");
            // agreement with the O(n r^d) scan on random centers
            let mut rng = Stream::new(99, 0);
            for _ in 0..50 {
                let mut c = [0i64; MAX_D];
                for i in 0..5 {
                    c[i] = rng.below(21) as i64 - 10;
                }
                let center = Point::from_coords(&c[..5]);
                assert_eq!(
                    idx.local_time(&center, r).unwrap(),
                    OccupancyIndex::local_time_scan(&w, &center, r)
                );
            }
        }
    }

    #[test]
    fn local_time_far_outside_is_zero_and_constant_path_is_full() {
        let w = Walk::simulate(200, 5, 5).unwrap();
        let idx = OccupancyIndex::build(&w, 3).unwrap();
        let far = Point::from_coords(&[1000, 1000, 1000, 1000, 1000]);
        assert_eq!(idx.local_time(&far, 3).unwrap(), 0);

        let held = Walk::from_steps(5, 0, vec![Point::origin(); 151]);
        for r in [1i64, 2, 4] {
            let idx = OccupancyIndex::build(&held, r).unwrap();
            assert_eq!(idx.local_time(&Point::origin(), r).unwrap(), 151);
        }
    }

    #[test]
    fn point_set_files_roundtrip() {
        let dir = std::env::temp_dir().join(format!("walkcap-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let w = Walk::simulate(50, 11, 5).unwrap();
        let set = w.range_of(0, 50).unwrap();
        let pts_path = dir.join("set.pts");
        set.save(&pts_path).unwrap();
        let set2 = PointSet::load(&pts_path).unwrap();
        assert_eq!(set.len(), set2.len());
        assert_eq!(set.points(), set2.points());

        let walk_path = dir.join("walk.txt");
        w.save(&walk_path).unwrap();
        let w2 = Walk::load(&walk_path).unwrap();
        assert_eq!(w.positions(), w2.positions());
        assert_eq!(w2.seed, 11);
        std::fs::remove_dir_all(&dir).ok();
    }
}
