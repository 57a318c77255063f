//! Configuration maps Φ and the pushforward of configuration measures:
//! histograms of Φ over independent draws from the factor measures, with the
//! L2 and support functionals read off the histogram.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::measure::PointMassMeasure;
use crate::mollify::Mollifier;
use crate::scalar::{cast, Scalar};

/// Above this many atom tuples the pushforward switches from exact
/// enumeration to Monte Carlo.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// The scalar configuration maps of the laboratory. `d` is the dimension per
/// point argument; output dimension is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigMap {
    /// `|x - y|`, two points in ℝ^d.
    Distance { dim: usize },
    /// `prod_j |x^j - y^j|` over k coordinate pairs; 2k points in ℝ^d,
    /// ordered `(x^1..x^k, y^1..y^k)`.
    ProductOfDistances { dim: usize, factors: usize },
    /// `x . y_perp` with `y_perp = (y_2, -y_1)`: the signed parallelogram
    /// area of a pair in the plane.
    SignedArea,
    /// `x . (y + z)`, three points in ℝ^d.
    DotSum { dim: usize },
}

impl ConfigMap {
    pub fn dim_per_point(&self) -> usize {
        match self {
            ConfigMap::Distance { dim } | ConfigMap::DotSum { dim } => *dim,
            ConfigMap::ProductOfDistances { dim, .. } => *dim,
            ConfigMap::SignedArea => 2,
        }
    }

    /// Number of point arguments.
    pub fn arity(&self) -> usize {
        match self {
            ConfigMap::Distance { .. } => 2,
            ConfigMap::ProductOfDistances { factors, .. } => 2 * factors,
            ConfigMap::SignedArea => 2,
            ConfigMap::DotSum { .. } => 3,
        }
    }

    /// Output dimension (always 1 for these maps).
    pub fn output_dim(&self) -> usize {
        1
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConfigMap::Distance { .. } => "distance",
            ConfigMap::ProductOfDistances { .. } => "product-of-distances",
            ConfigMap::SignedArea => "signed-area",
            ConfigMap::DotSum { .. } => "dot-sum",
        }
    }

    /// Evaluate Φ on flattened point arguments (`arity * dim_per_point`
    /// coordinates).
    pub fn evaluate<T: Scalar>(&self, coords: &[T]) -> Result<T> {
        let expected = self.arity() * self.dim_per_point();
        if coords.len() != expected {
            return Err(LabError::DimMismatch { expected, got: coords.len() });
        }
        Ok(self.evaluate_unchecked(coords))
    }

    #[inline]
    pub(crate) fn evaluate_unchecked<T: Scalar>(&self, coords: &[T]) -> T {
        match self {
            ConfigMap::Distance { dim } => {
                let (x, y) = coords.split_at(*dim);
                x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt()
            }
            ConfigMap::ProductOfDistances { dim, factors } => {
                let d = *dim;
                let k = *factors;
                let mut prod = T::one();
                for j in 0..k {
                    let x = &coords[j * d..(j + 1) * d];
                    let y = &coords[(k + j) * d..(k + j + 1) * d];
                    let dist =
                        x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
                    prod *= dist;
                }
                prod
            }
            ConfigMap::SignedArea => coords[0] * coords[3] - coords[1] * coords[2],
            ConfigMap::DotSum { dim } => {
                let d = *dim;
                let x = &coords[0..d];
                let y = &coords[d..2 * d];
                let z = &coords[2 * d..3 * d];
                x.iter().zip(y.iter().zip(z)).map(|(&a, (&b, &c))| a * (b + c)).sum::<T>()
            }
        }
    }
}

/// How the pushforward samples configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushforwardRoute {
    /// Enumerate every atom tuple when the product of atom counts allows it,
    /// otherwise fall back to jittered Monte Carlo.
    Auto,
    /// Force Monte Carlo; `jitter` controls the mollifier perturbation.
    /// Disabling jitter samples the bare atom tuples, which is what the
    /// enumeration-agreement checks compare against.
    ForceMonteCarlo { jitter: bool },
}

/// Histogram of Φ values on the lattice of half-open bins
/// `[i w, (i+1) w)` anchored at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardHistogram<T: Scalar> {
    bin_width: T,
    bins: BTreeMap<i64, T>,
    total_mass: T,
    /// True when a degenerate configuration (zero vector in a slot of the
    /// signed-area map) contributed; the map stays defined but group-orbit
    /// uniqueness fails there.
    pub degenerate_flagged: bool,
}

impl<T: Scalar> PushforwardHistogram<T> {
    fn empty(bin_width: T) -> Self {
        Self { bin_width, bins: BTreeMap::new(), total_mass: T::zero(), degenerate_flagged: false }
    }

    fn deposit(&mut self, value: T, mass: T) {
        let idx = (value / self.bin_width).floor().to_f64().unwrap() as i64;
        *self.bins.entry(idx).or_insert_with(T::zero) += mass;
        self.total_mass += mass;
    }

    pub fn bin_width(&self) -> T {
        self.bin_width
    }

    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Mass in the bin whose left edge is `index * bin_width`.
    pub fn mass_at(&self, index: i64) -> T {
        self.bins.get(&index).copied().unwrap_or_else(T::zero)
    }

    /// `(bin index, left edge, mass)` in increasing bin order.
    pub fn iter_bins(&self) -> impl Iterator<Item = (i64, T, T)> + '_ {
        self.bins
            .iter()
            .map(move |(&i, &m)| (i, cast::<T>(i as f64) * self.bin_width, m))
    }

    /// Union of the bin index sets of two histograms.
    pub fn joint_bins<'a>(&'a self, other: &'a Self) -> Vec<i64> {
        let mut keys: Vec<i64> = self.bins.keys().chain(other.bins.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }
}

/// Average two histograms of equal bin width (pooling two equal-size sample
/// batches into one).
pub fn pooled<T: Scalar>(
    a: &PushforwardHistogram<T>,
    b: &PushforwardHistogram<T>,
) -> Result<PushforwardHistogram<T>> {
    if a.bin_width != b.bin_width {
        return Err(LabError::InvalidParameter("bin widths differ".into()));
    }
    let half = cast::<T>(0.5);
    let mut out = PushforwardHistogram::empty(a.bin_width);
    out.degenerate_flagged = a.degenerate_flagged || b.degenerate_flagged;
    for (&i, &m) in a.bins.iter() {
        *out.bins.entry(i).or_insert_with(T::zero) += m * half;
    }
    for (&i, &m) in b.bins.iter() {
        *out.bins.entry(i).or_insert_with(T::zero) += m * half;
    }
    out.total_mass = (a.total_mass + b.total_mass) * half;
    Ok(out)
}

/// `sum_b mass_b^2 / bin_width`: the L2 norm squared of the piecewise
/// constant density carried by the histogram, which equals
/// `int |nu_eps_hat|^2` by Plancherel up to the binning.
pub fn l2_density_norm<T: Scalar>(h: &PushforwardHistogram<T>) -> T {
    let mut acc = T::zero();
    for (_, &m) in h.bins.iter() {
        acc += m * m;
    }
    acc / h.bin_width
}

/// Support bounds read off a histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBound<T: Scalar> {
    /// Cauchy-Schwarz bound `(total mass)^2 / int density^2 = 1 / l2_density_norm`.
    pub l2_lower: T,
    /// Companion diagnostic: number of bins with mass above the threshold,
    /// times the bin width.
    pub occupied_length: T,
}

/// Lower bound on the Lebesgue measure of the support of the pushforward.
pub fn support_lower_bound<T: Scalar>(h: &PushforwardHistogram<T>) -> SupportBound<T> {
    support_lower_bound_with_threshold(h, T::zero())
}

pub fn support_lower_bound_with_threshold<T: Scalar>(
    h: &PushforwardHistogram<T>,
    mass_threshold: T,
) -> SupportBound<T> {
    let l2 = l2_density_norm(h);
    let occupied = h.bins.values().filter(|&&m| m > mass_threshold).count();
    SupportBound {
        l2_lower: h.total_mass * h.total_mass / l2,
        occupied_length: cast::<T>(occupied as f64) * h.bin_width,
    }
}

/// Push the factor measures through Φ and histogram the values with
/// `bin_width = epsilon`.
///
/// Exact enumeration of atom tuples is used whenever the product of atom
/// counts is at most [`ENUMERATION_LIMIT`]; there the bin width alone plays
/// the role of the ε-regularization. The Monte Carlo route draws atoms
/// i.i.d. by weight and perturbs each point by a mollifier-distributed
/// jitter (the sampled analogue of mollifying every factor).
pub fn pushforward<T: Scalar>(
    map: &ConfigMap,
    measures: &[&PointMassMeasure<T>],
    mollifier: &Mollifier<T>,
    seed: u64,
    n_samples: usize,
) -> Result<PushforwardHistogram<T>> {
    pushforward_with(map, measures, mollifier, PushforwardRoute::Auto, seed, n_samples)
}

pub fn pushforward_with<T: Scalar>(
    map: &ConfigMap,
    measures: &[&PointMassMeasure<T>],
    mollifier: &Mollifier<T>,
    route: PushforwardRoute,
    seed: u64,
    n_samples: usize,
) -> Result<PushforwardHistogram<T>> {
    let arity = map.arity();
    let d = map.dim_per_point();
    if measures.len() != arity {
        return Err(LabError::DimMismatch { expected: arity, got: measures.len() });
    }
    for mu in measures {
        if mu.dim() != d {
            return Err(LabError::DimMismatch { expected: d, got: mu.dim() });
        }
    }
    if mollifier.dim() != d {
        return Err(LabError::DimMismatch { expected: d, got: mollifier.dim() });
    }

    let tuples = measures.iter().try_fold(1usize, |acc, m| acc.checked_mul(m.len()));
    match route {
        PushforwardRoute::Auto => match tuples {
            Some(t) if t <= ENUMERATION_LIMIT => enumerate_pushforward(map, measures, mollifier),
            _ => {
                if n_samples < 1000 {
                    return Err(LabError::TooFewSamples { needed: 1000, got: n_samples });
                }
                monte_carlo_pushforward(map, measures, mollifier, true, seed, n_samples)
            }
        },
        PushforwardRoute::ForceMonteCarlo { jitter } => {
            if n_samples < 1000 {
                return Err(LabError::TooFewSamples { needed: 1000, got: n_samples });
            }
            monte_carlo_pushforward(map, measures, mollifier, jitter, seed, n_samples)
        }
    }
}

fn is_degenerate_signed_area<T: Scalar>(map: &ConfigMap, coords: &[T]) -> bool {
    if !matches!(map, ConfigMap::SignedArea) {
        return false;
    }
    let x_zero = coords[0] == T::zero() && coords[1] == T::zero();
    let y_zero = coords[2] == T::zero() && coords[3] == T::zero();
    x_zero || y_zero
}

fn enumerate_pushforward<T: Scalar>(
    map: &ConfigMap,
    measures: &[&PointMassMeasure<T>],
    mollifier: &Mollifier<T>,
) -> Result<PushforwardHistogram<T>> {
    let arity = map.arity();
    let d = map.dim_per_point();
    let mut hist = PushforwardHistogram::empty(mollifier.epsilon());
    let mut idx = vec![0usize; arity];
    let mut coords = vec![T::zero(); arity * d];
    'outer: loop {
        let mut mass = T::one();
        for (slot, &i) in idx.iter().enumerate() {
            let mu = measures[slot];
            coords[slot * d..(slot + 1) * d].copy_from_slice(mu.point(i));
            mass *= mu.weight(i);
        }
        if mass > T::zero() {
            if is_degenerate_signed_area(map, &coords) {
                hist.degenerate_flagged = true;
            }
            hist.deposit(map.evaluate_unchecked(&coords), mass);
        }
        for slot in (0..arity).rev() {
            idx[slot] += 1;
            if idx[slot] < measures[slot].len() {
                continue 'outer;
            }
            idx[slot] = 0;
        }
        break;
    }
    Ok(hist)
}

fn monte_carlo_pushforward<T: Scalar>(
    map: &ConfigMap,
    measures: &[&PointMassMeasure<T>],
    mollifier: &Mollifier<T>,
    jitter: bool,
    seed: u64,
    n_samples: usize,
) -> Result<PushforwardHistogram<T>> {
    let arity = map.arity();
    let d = map.dim_per_point();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // accumulate counts, convert to masses at the end: total mass is exactly
    // the counting measure of the samples
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut coords = vec![T::zero(); arity * d];
    let mut degenerate = false;
    let bin_w = mollifier.epsilon();
    for _ in 0..n_samples {
        for slot in 0..arity {
            let mu = measures[slot];
            let i = mu.pick_atom(cast::<T>(rng.gen::<f64>()));
            let dst = &mut coords[slot * d..(slot + 1) * d];
            dst.copy_from_slice(mu.point(i));
            if jitter {
                let j = mollifier.sample_jitter(&mut rng);
                for (c, jc) in dst.iter_mut().zip(j) {
                    *c += jc;
                }
            }
        }
        if is_degenerate_signed_area(map, &coords) {
            degenerate = true;
        }
        let v = map.evaluate_unchecked(&coords);
        let idx = (v / bin_w).floor().to_f64().unwrap() as i64;
        *counts.entry(idx).or_insert(0) += 1;
    }
    let mut hist = PushforwardHistogram::empty(bin_w);
    hist.degenerate_flagged = degenerate;
    let n = cast::<T>(n_samples as f64);
    for (idx, c) in counts {
        let m = cast::<T>(c as f64) / n;
        hist.bins.insert(idx, m);
        hist.total_mass += m;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GroupElement, GroupWindow};
    use crate::presets;
    use rand::Rng;

    #[test]
    fn distance_of_three_four_five() {
        let map = ConfigMap::Distance { dim: 2 };
        let v = map.evaluate(&[0.0, 0.0, 3.0, 4.0]).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn signed_area_of_unit_frame() {
        // x = (1,0), y = (0,1): y_perp = (1,0), so x . y_perp = 1
        let map = ConfigMap::SignedArea;
        let v = map.evaluate(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn dot_sum_kills_zero_first_slot() {
        let map = ConfigMap::DotSum { dim: 2 };
        let v = map.evaluate(&[0.0, 0.0, 0.3, -0.9, 2.4, 0.7]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn product_of_distances_factorizes() {
        let map = ConfigMap::ProductOfDistances { dim: 1, factors: 2 };
        // x = (0, 0), y = (3, 5) as two 1-d pairs: |0-3| * |0-5| = 15
        let v = map.evaluate(&[0.0, 0.0, 3.0, 5.0]).unwrap();
        assert_eq!(v, 15.0);
    }

    #[test]
    fn map_invariance_under_symmetry_groups() {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let o2 = GroupWindow::<f64>::Orthogonal2;
        let sl2 = GroupWindow::<f64>::sl2_default();
        let dil = GroupWindow::<f64>::DilationBlock {
            factors: 2,
            block_dim: 2,
            half_width: (2.0f64).ln(),
        };
        for _ in 0..2000 {
            let pt = |rng: &mut rand_chacha::ChaCha8Rng| {
                vec![rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0]
            };

            // distance: rigid motions
            let (x, y) = (pt(&mut rng), pt(&mut rng));
            let g = o2.sample_one(&mut rng);
            let t = pt(&mut rng);
            let map = ConfigMap::Distance { dim: 2 };
            let before = map.evaluate_unchecked(&[x[0], x[1], y[0], y[1]]);
            let gx = g.apply(&x).unwrap();
            let gy = g.apply(&y).unwrap();
            let after = map.evaluate_unchecked(&[
                gx[0] + t[0],
                gx[1] + t[1],
                gy[0] + t[0],
                gy[1] + t[1],
            ]);
            assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));

            // signed area: SL2 pairs
            let map = ConfigMap::SignedArea;
            let g = sl2.sample_one(&mut rng);
            let gx = g.apply(&x).unwrap();
            let gy = g.apply(&y).unwrap();
            let before = map.evaluate_unchecked(&[x[0], x[1], y[0], y[1]]);
            let after = map.evaluate_unchecked(&[gx[0], gx[1], gy[0], gy[1]]);
            assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));

            // dot-sum in the perp form: phi(x,y,z) = x . (y+z)_perp is
            // invariant under (gx, gy, gz) for g in SL2
            let z = pt(&mut rng);
            let perp_form = |x: &[f64], y: &[f64], z: &[f64]| {
                let w = [y[0] + z[0], y[1] + z[1]];
                x[0] * w[1] - x[1] * w[0]
            };
            let gz = g.apply(&z).unwrap();
            let before = perp_form(&x, &y, &z);
            let after = perp_form(&gx, &gy, &gz);
            assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));

            // product of distances: translations and the dilation block group
            let map = ConfigMap::ProductOfDistances { dim: 2, factors: 2 };
            let (x2, y2) = (pt(&mut rng), pt(&mut rng));
            let g = dil.sample_one(&mut rng);
            let before =
                map.evaluate_unchecked(&[x[0], x[1], x2[0], x2[1], y[0], y[1], y2[0], y2[1]]);
            let shift = pt(&mut rng);
            let big_x = g.apply(&[x[0], x[1], x2[0], x2[1]]).unwrap();
            let big_y = g.apply(&[y[0], y[1], y2[0], y2[1]]).unwrap();
            let after = map.evaluate_unchecked(&[
                big_x[0] + shift[0],
                big_x[1] + shift[1],
                big_x[2] + shift[0],
                big_x[3] + shift[1],
                big_y[0] + shift[0],
                big_y[1] + shift[1],
                big_y[2] + shift[0],
                big_y[3] + shift[1],
            ]);
            // careful: the translation must act per d-dim coordinate pair
            assert!(
                (before - after).abs() <= 1e-9 * before.abs().max(1.0),
                "{before} vs {after}"
            );
        }
    }

    #[test]
    fn pushforward_of_diracs_lands_in_zero_bin() {
        let delta = PointMassMeasure::<f64>::dirac(&[0.0, 0.0]).unwrap();
        let m = Mollifier::<f64>::triangular(2, 0.25).unwrap();
        let map = ConfigMap::Distance { dim: 2 };
        let h = pushforward(&map, &[&delta, &delta], &m, 1, 10).unwrap();
        assert_eq!(h.n_bins(), 1);
        assert_eq!(h.mass_at(0), 1.0);
    }

    #[test]
    fn two_atom_distance_enumeration() {
        // pairs (a,a),(b,b),(a,b),(b,a): half the mass at 0, half at |a-b|
        let mu = presets::two_atom::<f64>(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let m = Mollifier::<f64>::triangular(2, 2f64.powi(-5)).unwrap();
        let map = ConfigMap::Distance { dim: 2 };
        let h = pushforward(&map, &[&mu, &mu], &m, 1, 10).unwrap();
        assert_eq!(h.n_bins(), 2);
        assert_eq!(h.mass_at(0), 0.5);
        assert_eq!(h.mass_at(32), 0.5); // |a-b| = 1 lands at bin 1/eps = 32
        let l2 = l2_density_norm(&h);
        assert!((l2 - (0.25 + 0.25) * 32.0).abs() < 1e-12);
    }

    #[test]
    fn dot_sum_sharpness_concentrates_at_zero() {
        let origin = PointMassMeasure::<f64>::dirac(&[0.0, 0.0]).unwrap();
        let f = presets::uniform_square_cloud::<f64>(24, 5).unwrap();
        let h_cloud = presets::uniform_square_cloud::<f64>(24, 6).unwrap();
        let map = ConfigMap::DotSum { dim: 2 };
        for eps_pow in [4, 5, 6] {
            let m = Mollifier::<f64>::triangular(2, 2f64.powi(-eps_pow)).unwrap();
            let h = pushforward(&map, &[&origin, &f, &h_cloud], &m, 1, 10).unwrap();
            assert_eq!(h.n_bins(), 1);
            let sb = support_lower_bound(&h);
            assert_eq!(sb.l2_lower, h.bin_width());
        }
    }

    #[test]
    fn l2_norm_of_uniform_histogram() {
        let mut h = PushforwardHistogram::<f64>::empty(0.125);
        for i in 0..8 {
            h.deposit(i as f64 * 0.125, 0.125);
        }
        // uniform over N bins: 1 / (N w)
        assert!((l2_density_norm(&h) - 1.0).abs() < 1e-12);
        let sb = support_lower_bound(&h);
        assert!((sb.l2_lower - 1.0).abs() < 1e-12);
        assert!((sb.occupied_length - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_bin_concentration() {
        let mut h = PushforwardHistogram::<f64>::empty(0.03125);
        h.deposit(0.01, 1.0);
        assert!((l2_density_norm(&h) - 32.0).abs() < 1e-12);
        assert!((support_lower_bound(&h).l2_lower - 0.03125).abs() < 1e-12);
    }

    #[test]
    fn l2_norm_cauchy_schwarz_floor() {
        // for any histogram, l2_density_norm >= 1/(occupied length)
        let mu = presets::uniform_square_cloud::<f64>(20, 9).unwrap();
        let m = Mollifier::<f64>::triangular(2, 2f64.powi(-4)).unwrap();
        let map = ConfigMap::Distance { dim: 2 };
        let h = pushforward(&map, &[&mu, &mu], &m, 1, 10).unwrap();
        let sb = support_lower_bound(&h);
        assert!(l2_density_norm(&h) >= 1.0 / sb.occupied_length - 1e-12);
        assert!(sb.l2_lower <= sb.occupied_length + 1e-12);
    }

    #[test]
    fn monte_carlo_matches_enumeration_within_binomial_error() {
        use rand_chacha::rand_core::SeedableRng;
        let mut meta = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let n = 40_000usize;
        for inst in 0..4 {
            let a = presets::uniform_square_cloud::<f64>(4 + inst, meta.gen()).unwrap();
            let b = presets::uniform_square_cloud::<f64>(6, meta.gen()).unwrap();
            let m = Mollifier::<f64>::triangular(2, 2f64.powi(-4)).unwrap();
            let map = ConfigMap::Distance { dim: 2 };
            let exact = pushforward(&map, &[&a, &b], &m, 0, 0).unwrap();
            let mc = pushforward_with(
                &map,
                &[&a, &b],
                &m,
                PushforwardRoute::ForceMonteCarlo { jitter: false },
                1000 + inst as u64,
                n,
            )
            .unwrap();
            for idx in exact.joint_bins(&mc) {
                let p = exact.mass_at(idx);
                let got = mc.mass_at(idx);
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!(
                    (got - p).abs() <= 4.0 * se.max(1e-9),
                    "instance {inst} bin {idx}: exact {p}, mc {got}, se {se}"
                );
            }
        }
    }

    #[test]
    fn pushforward_mass_is_one() {
        let mu = presets::uniform_square_cloud::<f64>(10, 3).unwrap();
        let m = Mollifier::<f64>::triangular(2, 2f64.powi(-4)).unwrap();
        let map = ConfigMap::Distance { dim: 2 };
        let exact = pushforward(&map, &[&mu, &mu], &m, 0, 0).unwrap();
        assert!((exact.total_mass() - 1.0).abs() < 1e-12);
        let mc = pushforward_with(
            &map,
            &[&mu, &mu],
            &m,
            PushforwardRoute::ForceMonteCarlo { jitter: true },
            4,
            5000,
        )
        .unwrap();
        assert!((mc.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signed_area_degenerate_inputs_are_flagged() {
        let origin = PointMassMeasure::<f64>::dirac(&[0.0, 0.0]).unwrap();
        let cloud = presets::uniform_square_cloud::<f64>(5, 2).unwrap();
        let m = Mollifier::<f64>::triangular(2, 0.125).unwrap();
        let h = pushforward(&ConfigMap::SignedArea, &[&origin, &cloud], &m, 1, 10).unwrap();
        assert!(h.degenerate_flagged);
        let h2 = pushforward(&ConfigMap::SignedArea, &[&cloud, &cloud], &m, 1, 10).unwrap();
        assert!(!h2.degenerate_flagged);
    }

    #[test]
    fn negative_values_bin_on_the_anchored_lattice() {
        let mut h = PushforwardHistogram::<f64>::empty(0.5);
        h.deposit(-0.25, 0.5); // bin [-0.5, 0)
        h.deposit(0.0, 0.5); // bin [0, 0.5): left-closed
        assert_eq!(h.mass_at(-1), 0.5);
        assert_eq!(h.mass_at(0), 0.5);
    }
}
