//! Mollifiers and grid densities.
//!
//! The bump profile is the tensor power of the triangular (order-2 B-spline)
//! bump `(1-|u|)_+`: compactly supported, unit mass, and its Fourier
//! transform `sinc^2` is nonnegative with a closed form.

use rand::Rng;

use crate::error::{LabError, Result};
use crate::scalar::{cast, Scalar};

/// Available bump profiles. Only the triangular tensor bump is implemented;
/// the profile is recorded so reports can name it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MollifierProfile {
    TriangularTensor,
}

impl MollifierProfile {
    pub fn name(&self) -> &'static str {
        match self {
            MollifierProfile::TriangularTensor => "triangular-tensor",
        }
    }
}

/// A compactly supported unit-mass bump at scale `epsilon`:
/// `phi_eps(x) = eps^-d * prod_i (1 - |x_i/eps|)_+`.
///
/// Per-axis support radius is exactly `epsilon`; the Fourier transform is
/// `prod_i sinc^2(pi * eps * xi_i) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier<T: Scalar> {
    dim: usize,
    epsilon: T,
    profile: MollifierProfile,
}

fn sinc<T: Scalar>(z: T) -> T {
    // Guard the removable singularity; the cutoff is far above underflow.
    if z.abs() < cast::<T>(1e-8) {
        T::one() - z * z / cast::<T>(6.0)
    } else {
        z.sin() / z
    }
}

impl<T: Scalar> Mollifier<T> {
    pub fn triangular(dim: usize, epsilon: T) -> Result<Self> {
        if dim == 0 || epsilon <= T::zero() {
            return Err(LabError::InvalidParameter(
                "mollifier needs dim >= 1 and epsilon > 0".into(),
            ));
        }
        Ok(Self { dim, epsilon, profile: MollifierProfile::TriangularTensor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn profile(&self) -> MollifierProfile {
        self.profile
    }

    /// Density `phi_eps(x)` at offset `x` from the bump center.
    pub fn density(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim);
        let mut v = self.epsilon.powi(-(self.dim as i32));
        for &xi in x {
            let t = T::one() - (xi / self.epsilon).abs();
            if t <= T::zero() {
                return T::zero();
            }
            v *= t;
        }
        v
    }

    /// Fourier transform `phi_eps_hat(xi) = prod_i sinc^2(pi eps xi_i)`.
    pub fn fourier(&self, xi: &[T]) -> T {
        debug_assert_eq!(xi.len(), self.dim);
        let mut v = T::one();
        for &x in xi {
            let s = sinc(T::PI() * self.epsilon * x);
            v *= s * s;
        }
        v
    }

    /// One-dimensional profile transform at scalar frequency `r`; radial
    /// damping weights are built from this regardless of `dim`.
    pub fn fourier_radial(&self, r: T) -> T {
        let s = sinc(T::PI() * self.epsilon * r);
        s * s
    }

    /// Draw one jitter vector distributed like the bump density. Each axis is
    /// `eps * (u1 - u2)` with `u` uniform, which has the triangular law.
    pub fn sample_jitter<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        (0..self.dim)
            .map(|_| self.epsilon * (cast::<T>(rng.gen::<f64>()) - cast::<T>(rng.gen::<f64>())))
            .collect()
    }

    /// Closed-form autocorrelation `int phi_eps(u) phi_eps(u + delta) du`:
    /// per axis the centered cubic B-spline `(1/eps) B3(delta_i / eps)`,
    /// multiplied across axes.
    pub fn autocorrelation(&self, delta: &[T]) -> T {
        debug_assert_eq!(delta.len(), self.dim);
        let mut v = T::one();
        for &d in delta {
            let t = (d / self.epsilon).abs();
            let axis = if t >= cast::<T>(2.0) {
                return T::zero();
            } else if t >= T::one() {
                let s = cast::<T>(2.0) - t;
                s * s * s / cast::<T>(6.0)
            } else {
                cast::<T>(2.0 / 3.0) - t * t + t * t * t / cast::<T>(2.0)
            };
            v *= axis / self.epsilon;
        }
        v
    }
}

/// A nonnegative density sampled on a uniform rectangular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T: Scalar> {
    dim: usize,
    origin: Vec<T>,
    spacing: T,
    shape: Vec<usize>,
    values: Vec<T>,
    mass: T,
}

impl<T: Scalar> GridDensity<T> {
    pub fn new(origin: Vec<T>, spacing: T, shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let dim = origin.len();
        if dim == 0 || shape.len() != dim {
            return Err(LabError::DimMismatch { expected: dim, got: shape.len() });
        }
        if spacing <= T::zero() {
            return Err(LabError::InvalidParameter("grid spacing must be positive".into()));
        }
        let count: usize = shape.iter().product();
        if values.len() != count {
            return Err(LabError::DimMismatch { expected: count, got: values.len() });
        }
        if values.iter().any(|&v| v < T::zero()) {
            return Err(LabError::InvalidParameter("grid density values must be >= 0".into()));
        }
        let cell = spacing.powi(dim as i32);
        let mass = values.iter().copied().sum::<T>() * cell;
        Ok(Self { dim, origin, spacing, shape, values, mass })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[T] {
        &self.origin
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Cached total mass `h^d * sum(values)`.
    pub fn mass(&self) -> T {
        self.mass
    }

    /// True when the density integrates to 1 within `tol` relative.
    pub fn is_unit_mass(&self, tol: T) -> bool {
        (self.mass - T::one()).abs() <= tol
    }

    /// Coordinates of the lattice node with flat index `i`.
    pub fn node(&self, mut i: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for axis in (0..self.dim).rev() {
            let n = self.shape[axis];
            out[axis] = self.origin[axis] + cast::<T>((i % n) as f64) * self.spacing;
            i /= n;
        }
        out
    }

    /// Iterate `(node coordinates, value)` over the lattice.
    pub fn iter_nodes(&self) -> impl Iterator<Item = (Vec<T>, T)> + '_ {
        (0..self.values.len()).map(|i| (self.node(i), self.values[i]))
    }

    /// `h^d * sum(values^2)`, the lattice L2 norm squared of the density.
    pub fn l2_norm_sq(&self) -> T {
        let cell = self.spacing.powi(self.dim as i32);
        self.values.iter().map(|&v| v * v).sum::<T>() * cell
    }
}

/// Convolve a point measure with a mollifier and sample the result on a grid.
///
/// `grid_spacing` must be at most `epsilon / 2` so the bump is resolved; it is
/// then rounded *down* so that `epsilon` is an exact integer multiple of the
/// spacing. With the triangular profile that choice makes the lattice sum of
/// each translated bump exactly 1 (Poisson summation kills every alias term),
/// so the grid mass equals 1 to rounding, well inside the 1e-6 budget.
pub fn mollify<T: Scalar>(
    mu: &crate::measure::PointMassMeasure<T>,
    m: &Mollifier<T>,
    grid_spacing: T,
) -> Result<GridDensity<T>> {
    if m.dim() != mu.dim() {
        return Err(LabError::DimMismatch { expected: mu.dim(), got: m.dim() });
    }
    let eps = m.epsilon();
    let two = cast::<T>(2.0);
    if grid_spacing > eps / two {
        return Err(LabError::GridTooCoarse {
            spacing: grid_spacing.to_f64().unwrap_or(f64::NAN),
            limit: (eps / two).to_f64().unwrap_or(f64::NAN),
        });
    }
    // Snap: spacing = eps / p with integer p >= 2.
    let p = (eps / grid_spacing).ceil();
    let h = eps / p;
    let dim = mu.dim();

    let (lo, hi) = mu.bounding_box();
    let mut origin = Vec::with_capacity(dim);
    let mut shape = Vec::with_capacity(dim);
    for k in 0..dim {
        let start = lo[k] - eps;
        let extent = hi[k] + eps - start;
        let n = (extent / h).ceil().to_usize().unwrap_or(0) + 1;
        origin.push(start);
        shape.push(n);
    }
    let count: usize = shape.iter().product();
    let mut values = vec![T::zero(); count];

    // Scatter each atom's bump onto the lattice; the support box per atom is
    // (2p+1)^d nodes.
    let mut strides = vec![1usize; dim];
    for k in (0..dim - 1).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let radius = p.to_usize().unwrap_or(0);
    let mut offset = vec![T::zero(); dim];
    for (point, w) in mu.iter_atoms() {
        // Center node indices per axis.
        let base: Vec<isize> =
            (0..dim).map(|k| ((point[k] - origin[k]) / h).round().to_isize().unwrap()).collect();
        let per_axis = 2 * radius + 1;
        let total: usize = (0..dim).map(|_| per_axis).product();
        'node: for flat in 0..total {
            let mut rem = flat;
            let mut idx = 0usize;
            for k in 0..dim {
                let off = (rem % per_axis) as isize - radius as isize;
                rem /= per_axis;
                let j = base[k] + off;
                if j < 0 || j as usize >= shape[k] {
                    continue 'node;
                }
                offset[k] = origin[k] + cast::<T>(j as f64) * h - point[k];
                idx += (j as usize) * strides[k];
            }
            let d = m.density(&offset);
            if d > T::zero() {
                values[idx] += w * d;
            }
        }
    }

    GridDensity::new(origin, h, shape, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PointMassMeasure;
    use crate::presets;

    #[test]
    fn mollifier_profile_has_unit_mass() {
        // midpoint quadrature of the 1d profile
        let m = Mollifier::<f64>::triangular(1, 0.25).unwrap();
        let n = 4000;
        let h = 0.5 / n as f64;
        let mass: f64 = (0..n).map(|i| m.density(&[-0.25 + (i as f64 + 0.5) * h]) * h).sum();
        assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
    }

    #[test]
    fn mollify_dirac_matches_profile() {
        let mu = PointMassMeasure::<f64>::dirac(&[0.0]).unwrap();
        let m = Mollifier::<f64>::triangular(1, 0.25).unwrap();
        let rho = mollify(&mu, &m, 1.0 / 16.0).unwrap();
        for (node, v) in rho.iter_nodes() {
            assert!((v - m.density(&node)).abs() < 1e-12);
        }
        assert!(rho.is_unit_mass(1e-9));
    }

    #[test]
    fn mollify_two_bumps_have_half_mass_each() {
        let mu = PointMassMeasure::<f64>::new(1, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let m = Mollifier::<f64>::triangular(1, 0.125).unwrap();
        let rho = mollify(&mu, &m, 1.0 / 32.0).unwrap();
        assert!(rho.is_unit_mass(1e-6));
        // numerically integrate each bump separately
        let h = rho.spacing();
        let mut left = 0.0;
        let mut right = 0.0;
        for (node, v) in rho.iter_nodes() {
            if node[0] < 0.5 {
                left += v * h;
            } else {
                right += v * h;
            }
        }
        assert!((left - 0.5).abs() < 1e-6, "left {left}");
        assert!((right - 0.5).abs() < 1e-6, "right {right}");
    }

    #[test]
    fn mollify_cantor_mass_summation_oracle() {
        let mu = presets::cantor_middle_thirds::<f64>(5).unwrap();
        let m = Mollifier::triangular(1, 2f64.powi(-6)).unwrap();
        let rho = mollify(&mu, &m, 2f64.powi(-8)).unwrap();
        assert!(rho.is_unit_mass(1e-6), "mass {}", rho.mass());
    }

    #[test]
    fn mollify_rejects_coarse_grid() {
        let mu = PointMassMeasure::<f64>::dirac(&[0.0]).unwrap();
        let m = Mollifier::<f64>::triangular(1, 0.1).unwrap();
        assert!(matches!(mollify(&mu, &m, 0.06), Err(LabError::GridTooCoarse { .. })));
    }

    #[test]
    fn refining_the_grid_keeps_mass_stable() {
        // Halving the spacing must not move the mass by more than 4x the
        // previous quadrature error (here both errors are at rounding level).
        let mu = presets::cantor_middle_thirds::<f64>(3).unwrap();
        let m = Mollifier::triangular(1, 2f64.powi(-4)).unwrap();
        let coarse = mollify(&mu, &m, 2f64.powi(-5)).unwrap();
        let fine = mollify(&mu, &m, 2f64.powi(-6)).unwrap();
        let err_coarse = (coarse.mass() - 1.0).abs();
        let err_fine = (fine.mass() - 1.0).abs();
        assert!(err_coarse < 1e-9 && err_fine < 1e-9);
        assert!((fine.mass() - coarse.mass()).abs() <= 4.0 * err_coarse.max(1e-12));
    }

    #[test]
    fn planar_mollify_is_exact_mass_too() {
        let mu = PointMassMeasure::<f64>::new(2, vec![0.1, 0.2, 0.7, 0.5], vec![0.25, 0.75]).unwrap();
        let m = Mollifier::triangular(2, 2f64.powi(-3)).unwrap();
        let rho = mollify(&mu, &m, 2f64.powi(-5)).unwrap();
        assert!(rho.is_unit_mass(1e-9), "mass {}", rho.mass());
    }

    #[test]
    fn autocorrelation_matches_quadrature() {
        let m = Mollifier::<f64>::triangular(2, 0.25).unwrap();
        // dense midpoint quadrature oracle for a few offsets
        let n = 400;
        let h = 0.5 / n as f64;
        for delta in [[0.0, 0.0], [0.1, -0.05], [0.2, 0.3], [0.45, 0.0]] {
            let mut oracle = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let u = [-0.25 + (i as f64 + 0.5) * h, -0.25 + (j as f64 + 0.5) * h];
                    let shifted = [u[0] + delta[0], u[1] + delta[1]];
                    oracle += m.density(&u) * m.density(&shifted) * h * h;
                }
            }
            let exact = m.autocorrelation(&delta);
            assert!(
                (oracle - exact).abs() <= 1e-3 * exact.max(1.0),
                "delta {delta:?}: {oracle} vs {exact}"
            );
        }
        // peak value (2/3 / eps)^d
        assert!((m.autocorrelation(&[0.0, 0.0]) - (2.0 / 3.0 / 0.25).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn jitter_has_triangular_spread() {
        use rand_chacha::rand_core::SeedableRng;
        let m = Mollifier::<f64>::triangular(2, 0.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut mean = [0.0, 0.0];
        let mut var = 0.0;
        for _ in 0..n {
            let j = m.sample_jitter(&mut rng);
            assert!(j.iter().all(|&x| x.abs() <= 0.5));
            mean[0] += j[0];
            mean[1] += j[1];
            var += j[0] * j[0];
        }
        // triangular law on [-eps, eps]: mean 0, variance eps^2/6
        assert!((mean[0] / n as f64).abs() < 0.01);
        assert!((mean[1] / n as f64).abs() < 0.01);
        assert!((var / n as f64 - 0.25 / 6.0).abs() < 0.005);
    }
}
