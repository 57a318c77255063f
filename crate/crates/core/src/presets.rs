//! Bundled test measures used by the experiment drivers and the test suite.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use num_complex::Complex;

use crate::error::Result;
use crate::fourier::FourierMeasure;
use crate::measure::{ifs_generate, product_measure, IfsBranch, IfsSpec, PointMassMeasure};
use crate::scalar::{cast, Scalar};

/// Middle-thirds Cantor measure truncated at `depth` (2^depth atoms on [0,1]).
pub fn cantor_middle_thirds<T: Scalar>(depth: usize) -> Result<PointMassMeasure<T>> {
    let third = T::one() / cast::<T>(3.0);
    let spec = IfsSpec::new(
        1,
        vec![
            IfsBranch::scaling(1, third, vec![T::zero()]),
            IfsBranch::scaling(1, third, vec![cast::<T>(2.0) * third]),
        ],
        vec![cast::<T>(0.5), cast::<T>(0.5)],
        depth,
    )?;
    ifs_generate(&spec)
}

/// Planar Cantor dust: the product of two depth-`depth` middle-thirds measures
/// (4^depth atoms in the unit square, box dimension 2 log2/log3).
pub fn cantor_dust<T: Scalar>(depth: usize) -> Result<PointMassMeasure<T>> {
    let c = cantor_middle_thirds::<T>(depth)?;
    product_measure(&c, &c)
}

/// `n` equally weighted atoms at `k/(n-1)` on [0,1].
pub fn uniform_grid_1d<T: Scalar>(n: usize) -> Result<PointMassMeasure<T>> {
    let step = T::one() / cast::<T>((n - 1) as f64);
    let coords: Vec<T> = (0..n).map(|k| cast::<T>(k as f64) * step).collect();
    let w = T::one() / cast::<T>(n as f64);
    PointMassMeasure::new_normalized(1, coords, vec![w; n])
}

/// `side x side` equally weighted lattice on the unit square.
pub fn square_lattice_cloud<T: Scalar>(side: usize) -> Result<PointMassMeasure<T>> {
    let g = uniform_grid_1d::<T>(side)?;
    product_measure(&g, &g)
}

/// `n` uniformly random atoms in the unit square, equal weights.
pub fn uniform_square_cloud<T: Scalar>(n: usize, seed: u64) -> Result<PointMassMeasure<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        coords.push(cast::<T>(rng.gen::<f64>()));
        coords.push(cast::<T>(rng.gen::<f64>()));
    }
    let w = T::one() / cast::<T>(n as f64);
    PointMassMeasure::new_normalized(2, coords, vec![w; n])
}

/// `n` uniformly random atoms in the unit interval (1D), equal weights.
pub fn uniform_interval_cloud<T: Scalar>(n: usize, seed: u64) -> Result<PointMassMeasure<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<T> = (0..n).map(|_| cast::<T>(rng.gen::<f64>())).collect();
    let w = T::one() / cast::<T>(n as f64);
    PointMassMeasure::new_normalized(1, coords, vec![w; n])
}

/// `n` equally spaced atoms on the circle of radius `r` centered at origin.
pub fn circle_cloud<T: Scalar>(n: usize, r: T) -> Result<PointMassMeasure<T>> {
    let mut coords = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = cast::<T>(2.0) * T::PI() * cast::<T>(k as f64) / cast::<T>(n as f64);
        coords.push(r * t.cos());
        coords.push(r * t.sin());
    }
    let w = T::one() / cast::<T>(n as f64);
    PointMassMeasure::new_normalized(2, coords, vec![w; n])
}

/// Two atoms of weight 1/2 at `a` and `b`.
pub fn two_atom<T: Scalar>(a: &[T], b: &[T]) -> Result<PointMassMeasure<T>> {
    let mut coords = a.to_vec();
    coords.extend_from_slice(b);
    PointMassMeasure::new(a.len(), coords, vec![cast::<T>(0.5), cast::<T>(0.5)])
}

/// A smooth test density with closed-form transform: the triangular tensor
/// bump at scale `scale` centered at `center`. Its transform
/// `exp(-2 pi i c.xi) prod sinc^2(pi s xi_i)` decays like |xi|^-2 per axis,
/// which serves as the band-limited reference in quadrature tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleBumpDensity<T: Scalar> {
    pub center: Vec<T>,
    pub scale: T,
}

impl<T: Scalar> TriangleBumpDensity<T> {
    pub fn new(center: Vec<T>, scale: T) -> Self {
        Self { center, scale }
    }
}

impl<T: Scalar> FourierMeasure<T> for TriangleBumpDensity<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn ft(&self, xi: &[T]) -> Complex<T> {
        let phase = -cast::<T>(2.0)
            * T::PI()
            * self.center.iter().zip(xi).map(|(&c, &x)| c * x).sum::<T>();
        let mut amp = T::one();
        for &x in xi {
            let z = T::PI() * self.scale * x;
            let s = if z.abs() < cast::<T>(1e-8) {
                T::one() - z * z / cast::<T>(6.0)
            } else {
                z.sin() / z
            };
            amp *= s * s;
        }
        Complex::new(phase.cos(), phase.sin()) * amp
    }
}
