//! Probability measures on ℝ^d as finite weighted point clouds, plus the
//! constructions that combine them: iterated-function-system generation,
//! products, convolutions, ball masses and Frostman exponent fits.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::scalar::{cast, Scalar};

/// Default cap on the number of atoms an operation may produce.
/// Products and convolutions grow multiplicatively, so the cap is checked
/// before allocation and reported as an explicit capacity error.
pub const DEFAULT_ATOM_CAP: usize = 1 << 22;

/// Coordinate tolerance below which atoms are merged (convolution and IFS
/// generation can produce coincident points).
pub const MERGE_TOL: f64 = 1e-12;

/// Relative tolerance on the unit-mass invariant.
pub const MASS_TOL: f64 = 1e-12;

/// A probability measure given by finitely many weighted point masses in ℝ^d.
///
/// Invariants enforced at construction: `dim >= 1`, every point has exactly
/// `dim` coordinates, weights are nonnegative and sum to 1 within `1e-12`
/// relative, and the bounding box covers all points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassMeasure<T: Scalar> {
    dim: usize,
    /// Flat coordinates, `len == dim * atoms`.
    coords: Vec<T>,
    weights: Vec<T>,
    box_lo: Vec<T>,
    box_hi: Vec<T>,
}

impl<T: Scalar> PointMassMeasure<T> {
    /// Build a measure from flat coordinates and per-atom weights.
    pub fn new(dim: usize, coords: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidParameter("dim must be >= 1".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(LabError::DimMismatch {
                expected: dim * weights.len(),
                got: coords.len(),
            });
        }
        if weights.is_empty() {
            return Err(LabError::Degenerate("measure needs at least one atom".into()));
        }
        let mut total = T::zero();
        for &w in &weights {
            if w < T::zero() {
                return Err(LabError::InvalidParameter("negative weight".into()));
            }
            total += w;
        }
        if (total - T::one()).abs() > cast::<T>(MASS_TOL) {
            return Err(LabError::InvalidParameter(format!(
                "weights sum to {total}, expected 1 within {MASS_TOL:e} relative"
            )));
        }
        let (box_lo, box_hi) = bounding_box(dim, &coords);
        Ok(Self { dim, coords, weights, box_lo, box_hi })
    }

    /// Like [`Self::new`] but rescales the weights to total mass 1 first.
    pub fn new_normalized(dim: usize, coords: Vec<T>, mut weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(LabError::Degenerate("total mass must be positive".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(dim, coords, weights)
    }

    /// A single unit atom at `point`.
    pub fn dirac(point: &[T]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![T::one()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn iter_atoms(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn bounding_box(&self) -> (&[T], &[T]) {
        (&self.box_lo, &self.box_hi)
    }

    /// Diagonal length of the bounding box.
    pub fn diameter(&self) -> T {
        self.box_lo
            .iter()
            .zip(&self.box_hi)
            .map(|(&lo, &hi)| (hi - lo) * (hi - lo))
            .sum::<T>()
            .sqrt()
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Apply a point transformation `x -> f(x)` atom by atom.
    /// The transformation may change the ambient dimension.
    pub fn map_points(&self, out_dim: usize, f: impl Fn(&[T]) -> Vec<T>) -> Result<Self> {
        let mut coords = Vec::with_capacity(out_dim * self.len());
        for (p, _) in self.iter_atoms() {
            let q = f(p);
            if q.len() != out_dim {
                return Err(LabError::DimMismatch { expected: out_dim, got: q.len() });
            }
            coords.extend_from_slice(&q);
        }
        Self::new(out_dim, coords, self.weights.clone())
    }

    /// Translate every atom by `v`.
    pub fn translate(&self, v: &[T]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(LabError::DimMismatch { expected: self.dim, got: v.len() });
        }
        self.map_points(self.dim, |p| p.iter().zip(v).map(|(&a, &b)| a + b).collect())
    }

    /// Index of the atom selected by cumulative weight `u` in `[0,1)`.
    pub(crate) fn pick_atom(&self, u: T) -> usize {
        let mut acc = T::zero();
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }
}

fn bounding_box<T: Scalar>(dim: usize, coords: &[T]) -> (Vec<T>, Vec<T>) {
    let mut lo = vec![T::infinity(); dim];
    let mut hi = vec![T::neg_infinity(); dim];
    for p in coords.chunks_exact(dim) {
        for (k, &x) in p.iter().enumerate() {
            if x < lo[k] {
                lo[k] = x;
            }
            if x > hi[k] {
                hi[k] = x;
            }
        }
    }
    (lo, hi)
}

/// One contraction of an iterated function system: `x -> ratio * rot * x + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsBranch<T: Scalar> {
    /// Contraction ratio, strictly inside (0,1).
    pub ratio: T,
    /// Orthogonal part, row-major `dim x dim`. Identity for pure scalings.
    pub rotation: Vec<T>,
    pub translation: Vec<T>,
}

impl<T: Scalar> IfsBranch<T> {
    /// Pure contraction `x -> ratio * x + shift`.
    pub fn scaling(dim: usize, ratio: T, translation: Vec<T>) -> Self {
        let mut rotation = vec![T::zero(); dim * dim];
        for k in 0..dim {
            rotation[k * dim + k] = T::one();
        }
        Self { ratio, rotation, translation }
    }

    fn apply(&self, dim: usize, x: &[T], out: &mut [T]) {
        for r in 0..dim {
            let mut acc = T::zero();
            for c in 0..dim {
                acc += self.rotation[r * dim + c] * x[c];
            }
            out[r] = self.ratio * acc + self.translation[r];
        }
    }
}

/// A self-similar measure specification: branch maps with selection
/// probabilities, truncated at `depth` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSpec<T: Scalar> {
    pub dim: usize,
    pub branches: Vec<IfsBranch<T>>,
    pub probabilities: Vec<T>,
    pub depth: usize,
}

impl<T: Scalar> IfsSpec<T> {
    pub fn new(
        dim: usize,
        branches: Vec<IfsBranch<T>>,
        probabilities: Vec<T>,
        depth: usize,
    ) -> Result<Self> {
        if branches.is_empty() || branches.len() != probabilities.len() {
            return Err(LabError::InvalidParameter(
                "need one probability per branch, at least one branch".into(),
            ));
        }
        for b in &branches {
            if !(b.ratio > T::zero() && b.ratio < T::one()) {
                return Err(LabError::InvalidParameter(format!(
                    "contraction ratio {} not in (0,1)",
                    b.ratio
                )));
            }
            if b.rotation.len() != dim * dim || b.translation.len() != dim {
                return Err(LabError::DimMismatch { expected: dim, got: b.translation.len() });
            }
        }
        let total: T = probabilities.iter().copied().sum();
        if (total - T::one()).abs() > cast::<T>(MASS_TOL) {
            return Err(LabError::InvalidParameter(format!(
                "branch probabilities sum to {total}, expected 1"
            )));
        }
        if probabilities.iter().any(|&p| p <= T::zero()) {
            return Err(LabError::InvalidParameter("branch probabilities must be positive".into()));
        }
        Ok(Self { dim, branches, probabilities, depth })
    }
}

/// Depth-level approximation of the self-similar measure of `spec`: one atom
/// per `depth`-fold branch composition applied to the origin, weighted by the
/// product of branch probabilities. Coincident atoms are merged.
pub fn ifs_generate<T: Scalar>(spec: &IfsSpec<T>) -> Result<PointMassMeasure<T>> {
    ifs_generate_capped(spec, DEFAULT_ATOM_CAP)
}

pub fn ifs_generate_capped<T: Scalar>(
    spec: &IfsSpec<T>,
    cap: usize,
) -> Result<PointMassMeasure<T>> {
    let m = spec.branches.len();
    let count = m
        .checked_pow(spec.depth as u32)
        .filter(|&c| c <= cap)
        .ok_or(LabError::AtomCapacity { required: usize::MAX, cap })?;
    if count > cap {
        return Err(LabError::AtomCapacity { required: count, cap });
    }

    let dim = spec.dim;
    // Level-by-level expansion: apply every branch to every current atom.
    let mut coords: Vec<T> = vec![T::zero(); dim];
    let mut weights: Vec<T> = vec![T::one()];
    let mut scratch = vec![T::zero(); dim];
    for _ in 0..spec.depth {
        let n = weights.len();
        let mut next_coords = Vec::with_capacity(n * m * dim);
        let mut next_weights = Vec::with_capacity(n * m);
        for (b, branch) in spec.branches.iter().enumerate() {
            let p = spec.probabilities[b];
            for i in 0..n {
                branch.apply(dim, &coords[i * dim..(i + 1) * dim], &mut scratch);
                next_coords.extend_from_slice(&scratch);
                next_weights.push(weights[i] * p);
            }
        }
        coords = next_coords;
        weights = next_weights;
    }

    let (coords, weights) = merge_atoms(dim, coords, weights);
    PointMassMeasure::new_normalized(dim, coords, weights)
}

/// Tensor product of two measures: dimensions add, atoms are all pairs,
/// weights multiply.
pub fn product_measure<T: Scalar>(
    a: &PointMassMeasure<T>,
    b: &PointMassMeasure<T>,
) -> Result<PointMassMeasure<T>> {
    product_measure_capped(a, b, DEFAULT_ATOM_CAP)
}

pub fn product_measure_capped<T: Scalar>(
    a: &PointMassMeasure<T>,
    b: &PointMassMeasure<T>,
    cap: usize,
) -> Result<PointMassMeasure<T>> {
    let n = a
        .len()
        .checked_mul(b.len())
        .filter(|&n| n <= cap)
        .ok_or(LabError::AtomCapacity { required: usize::MAX, cap })?;
    let dim = a.dim() + b.dim();
    let mut coords = Vec::with_capacity(n * dim);
    let mut weights = Vec::with_capacity(n);
    for (pa, wa) in a.iter_atoms() {
        for (pb, wb) in b.iter_atoms() {
            coords.extend_from_slice(pa);
            coords.extend_from_slice(pb);
            weights.push(wa * wb);
        }
    }
    PointMassMeasure::new_normalized(dim, coords, weights)
}

/// Convolution of two measures of equal dimension: atoms at all pairwise sums
/// with multiplied weights; coincident atoms merged within [`MERGE_TOL`].
pub fn convolve<T: Scalar>(
    a: &PointMassMeasure<T>,
    b: &PointMassMeasure<T>,
) -> Result<PointMassMeasure<T>> {
    convolve_capped(a, b, DEFAULT_ATOM_CAP)
}

pub fn convolve_capped<T: Scalar>(
    a: &PointMassMeasure<T>,
    b: &PointMassMeasure<T>,
    cap: usize,
) -> Result<PointMassMeasure<T>> {
    if a.dim() != b.dim() {
        return Err(LabError::DimMismatch { expected: a.dim(), got: b.dim() });
    }
    let n = a
        .len()
        .checked_mul(b.len())
        .filter(|&n| n <= cap)
        .ok_or(LabError::AtomCapacity { required: usize::MAX, cap })?;
    let dim = a.dim();
    let mut coords = Vec::with_capacity(n * dim);
    let mut weights = Vec::with_capacity(n);
    for (pa, wa) in a.iter_atoms() {
        for (pb, wb) in b.iter_atoms() {
            for k in 0..dim {
                coords.push(pa[k] + pb[k]);
            }
            weights.push(wa * wb);
        }
    }
    let (coords, weights) = merge_atoms(dim, coords, weights);
    PointMassMeasure::new_normalized(dim, coords, weights)
}

/// Merge atoms whose coordinates all agree within [`MERGE_TOL`] absolute.
/// Atoms are sorted lexicographically first, so the result is canonical.
fn merge_atoms<T: Scalar>(dim: usize, coords: Vec<T>, weights: Vec<T>) -> (Vec<T>, Vec<T>) {
    let n = weights.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let pi = &coords[i * dim..(i + 1) * dim];
        let pj = &coords[j * dim..(j + 1) * dim];
        pi.partial_cmp(pj).unwrap_or(std::cmp::Ordering::Equal)
    });

    let tol = cast::<T>(MERGE_TOL);
    let mut out_coords: Vec<T> = Vec::with_capacity(coords.len());
    let mut out_weights: Vec<T> = Vec::with_capacity(n);
    for &i in &order {
        let p = &coords[i * dim..(i + 1) * dim];
        let matched = out_weights.last().is_some() && {
            let q_start = out_coords.len() - dim;
            let q = &out_coords[q_start..];
            p.iter().zip(q).all(|(&x, &y)| (x - y).abs() <= tol)
        };
        if matched {
            let last = out_weights.len() - 1;
            out_weights[last] += weights[i];
        } else {
            out_coords.extend_from_slice(p);
            out_weights.push(weights[i]);
        }
    }
    (out_coords, out_weights)
}

/// Mass of the closed Euclidean ball `B(center, r)`.
pub fn ball_mass<T: Scalar>(mu: &PointMassMeasure<T>, center: &[T], r: T) -> T {
    let r2 = r * r;
    let mut mass = T::zero();
    for (p, w) in mu.iter_atoms() {
        let d2: T = p.iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum();
        if d2 <= r2 {
            mass += w;
        }
    }
    mass
}

/// Least-squares fit of the Frostman exponent `s` in `mu(B(x,r)) ~ r^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrostmanFit<T: Scalar> {
    /// Fitted scaling exponent.
    pub exponent: T,
    /// Intercept of the log-log fit.
    pub intercept: T,
    /// The dyadic radii used, strictly decreasing.
    pub radii: Vec<T>,
    /// Root-mean-square residual of the fit.
    pub residual: T,
}

/// Fit the ball-mass scaling exponent of `mu`.
///
/// For each radius the *maximum* ball mass over the given atom centers is
/// used, matching a uniform-in-x Frostman bound rather than an average one.
/// Requires at least 8 centers and 4 strictly decreasing dyadic radii.
pub fn frostman_fit<T: Scalar>(
    mu: &PointMassMeasure<T>,
    centers: &[usize],
    radii: &[T],
) -> Result<FrostmanFit<T>> {
    if mu.len() < 2 {
        return Err(LabError::Degenerate("frostman_fit needs at least two atoms".into()));
    }
    if centers.len() < 8 {
        return Err(LabError::TooFewSamples { needed: 8, got: centers.len() });
    }
    if radii.len() < 4 {
        return Err(LabError::TooFewSamples { needed: 4, got: radii.len() });
    }
    let half = cast::<T>(0.5);
    for w in radii.windows(2) {
        let ratio = w[1] / w[0];
        if (ratio - half).abs() > cast::<T>(1e-9) {
            return Err(LabError::InvalidParameter(
                "radii must be strictly decreasing dyadics (each half the previous)".into(),
            ));
        }
    }

    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut max_mass = T::zero();
        for &c in centers {
            let m = ball_mass(mu, mu.point(c), r);
            if m > max_mass {
                max_mass = m;
            }
        }
        if max_mass <= T::zero() {
            return Err(LabError::Degenerate("empty ball at a fit center".into()));
        }
        pts.push((r.ln(), max_mass.ln()));
    }
    let (slope, intercept, residual) = least_squares(&pts);
    let fit = FrostmanFit { exponent: slope, intercept, radii: radii.to_vec(), residual };
    let bound = cast::<T>(mu.dim() as f64) + cast::<T>(0.25);
    if fit.exponent < -cast::<T>(0.25) || fit.exponent > bound {
        return Err(LabError::Degenerate(format!(
            "fitted exponent {} outside [0, dim + 0.25] slack band",
            fit.exponent
        )));
    }
    Ok(fit)
}

/// Pick `n` atom indices by weight, deterministically from `seed`.
pub fn pick_fit_centers<T: Scalar>(mu: &PointMassMeasure<T>, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| mu.pick_atom(cast::<T>(rng.gen::<f64>()))).collect()
}

/// Plain least squares on `(x, y)` pairs; returns `(slope, intercept, rms residual)`.
pub(crate) fn least_squares<T: Scalar>(pts: &[(T, T)]) -> (T, T, T) {
    let n = cast::<T>(pts.len() as f64);
    let sx: T = pts.iter().map(|p| p.0).sum();
    let sy: T = pts.iter().map(|p| p.1).sum();
    let sxx: T = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: T = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut ss = T::zero();
    for &(x, y) in pts {
        let e = y - (slope * x + intercept);
        ss += e * e;
    }
    (slope, intercept, (ss / n).sqrt())
}
