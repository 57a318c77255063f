//! The invariance groups as parameterized compact windows with explicit Haar
//! densities: O(2), O(3), the determinant-one dilation block group, and an
//! SL2(R) window in Iwasawa coordinates.
//!
//! Sampling draws chart coordinates from the normalized Haar restriction
//! (inverse CDF where the density is not constant), so every sample carries
//! weight `window_mass / n` and the weights sum to the recorded window mass
//! exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::scalar::{cast, Scalar};

/// Which group a window or element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Trivial,
    Orthogonal2,
    Orthogonal3,
    DilationBlock,
    Sl2,
}

impl GroupKind {
    pub fn name(&self) -> &'static str {
        match self {
            GroupKind::Trivial => "trivial",
            GroupKind::Orthogonal2 => "orthogonal2",
            GroupKind::Orthogonal3 => "orthogonal3",
            GroupKind::DilationBlock => "dilation-block",
            GroupKind::Sl2 => "sl2",
        }
    }
}

/// Chart coordinates of the orthogonal factor of one dilation block.
#[derive(Debug, Clone, PartialEq)]
pub enum OrthogonalParams<T: Scalar> {
    /// O(1): plus or minus one.
    D1 { flip: bool },
    /// O(2): rotation angle, optionally composed with the axis reflection.
    D2 { angle: T, reflected: bool },
    /// O(3): axis-angle rotation, optionally composed with -I.
    D3 { axis: [T; 3], angle: T, reflected: bool },
}

/// Chart coordinates of a group element.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupParams<T: Scalar> {
    Trivial,
    Orthogonal2 { angle: T, reflected: bool },
    Orthogonal3 { axis: [T; 3], angle: T, reflected: bool },
    DilationBlock { log_ratios: Vec<T>, blocks: Vec<OrthogonalParams<T>> },
    /// Iwasawa coordinates `g = k(theta) p`, with `p` upper or lower
    /// triangular according to the window chart.
    Sl2 { theta: T, a: T, b: T },
}

/// A sampled group element: the realizing matrix plus its chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T: Scalar> {
    pub kind: GroupKind,
    /// Side length of the (square) matrix.
    pub dim: usize,
    /// Row-major `dim x dim` matrix of the action `x -> g x`.
    pub matrix: Vec<T>,
    pub params: GroupParams<T>,
}

impl<T: Scalar> GroupElement<T> {
    pub fn identity(kind: GroupKind, dim: usize) -> Self {
        let mut matrix = vec![T::zero(); dim * dim];
        for k in 0..dim {
            matrix[k * dim + k] = T::one();
        }
        let params = match kind {
            GroupKind::Trivial => GroupParams::Trivial,
            GroupKind::Orthogonal2 => {
                GroupParams::Orthogonal2 { angle: T::zero(), reflected: false }
            }
            GroupKind::Orthogonal3 => GroupParams::Orthogonal3 {
                axis: [T::zero(), T::zero(), T::one()],
                angle: T::zero(),
                reflected: false,
            },
            GroupKind::DilationBlock => {
                GroupParams::DilationBlock { log_ratios: vec![], blocks: vec![] }
            }
            GroupKind::Sl2 => GroupParams::Sl2 { theta: T::zero(), a: T::one(), b: T::zero() },
        };
        Self { kind, dim, matrix, params }
    }

    /// Rotation (optionally reflected) in the plane.
    pub fn rotation2(angle: T, reflected: bool) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        // reflection fixes e1, negates e2, applied before the rotation
        let refl = if reflected { -T::one() } else { T::one() };
        let matrix = vec![c, -s * refl, s, c * refl];
        Self {
            kind: GroupKind::Orthogonal2,
            dim: 2,
            matrix,
            params: GroupParams::Orthogonal2 { angle, reflected },
        }
    }

    /// Axis-angle rotation in three dimensions, optionally composed with -I.
    pub fn rotation3(axis: [T; 3], angle: T, reflected: bool) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let u = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let (s, c) = (angle.sin(), angle.cos());
        let ic = T::one() - c;
        let mut m = [
            c + u[0] * u[0] * ic,
            u[0] * u[1] * ic - u[2] * s,
            u[0] * u[2] * ic + u[1] * s,
            u[1] * u[0] * ic + u[2] * s,
            c + u[1] * u[1] * ic,
            u[1] * u[2] * ic - u[0] * s,
            u[2] * u[0] * ic - u[1] * s,
            u[2] * u[1] * ic + u[0] * s,
            c + u[2] * u[2] * ic,
        ];
        if reflected {
            for v in &mut m {
                *v = -*v;
            }
        }
        Self {
            kind: GroupKind::Orthogonal3,
            dim: 3,
            matrix: m.to_vec(),
            params: GroupParams::Orthogonal3 { axis: u, angle, reflected },
        }
    }

    /// Iwasawa element `k(theta) * p` with `p = [[a, b], [0, 1/a]]` (upper
    /// chart) or `p = [[a, 0], [b, 1/a]]` (lower chart).
    pub fn sl2_iwasawa(theta: T, a: T, b: T, chart: Sl2Chart) -> Self {
        let (s, c) = (theta.sin(), theta.cos());
        let inv_a = T::one() / a;
        let matrix = match chart {
            Sl2Chart::UpperTriangular => {
                vec![a * c, b * c - s * inv_a, a * s, b * s + c * inv_a]
            }
            Sl2Chart::LowerTriangular => {
                vec![a * c - b * s, -s * inv_a, a * s + b * c, c * inv_a]
            }
        };
        Self { kind: GroupKind::Sl2, dim: 2, matrix, params: GroupParams::Sl2 { theta, a, b } }
    }

    /// Block-diagonal element `diag(r_1 q_1, ..., r_k q_k)` with orthogonal
    /// blocks `q_i` and `prod r_i = 1`.
    pub fn dilation_block(log_ratios: Vec<T>, blocks_m: Vec<GroupElement<T>>) -> Self {
        let k = log_ratios.len();
        debug_assert_eq!(k, blocks_m.len());
        let d = blocks_m.first().map_or(0, |b| b.dim);
        let dim = k * d;
        let mut matrix = vec![T::zero(); dim * dim];
        let mut params_blocks = Vec::with_capacity(k);
        for (i, blk) in blocks_m.iter().enumerate() {
            let r = log_ratios[i].exp();
            for rr in 0..d {
                for cc in 0..d {
                    matrix[(i * d + rr) * dim + (i * d + cc)] = r * blk.matrix[rr * d + cc];
                }
            }
            params_blocks.push(match &blk.params {
                GroupParams::Orthogonal2 { angle, reflected } => {
                    OrthogonalParams::D2 { angle: *angle, reflected: *reflected }
                }
                GroupParams::Orthogonal3 { axis, angle, reflected } => {
                    OrthogonalParams::D3 { axis: *axis, angle: *angle, reflected: *reflected }
                }
                GroupParams::Trivial => OrthogonalParams::D1 { flip: false },
                _ => unreachable!("dilation blocks are orthogonal"),
            });
        }
        Self {
            kind: GroupKind::DilationBlock,
            dim,
            matrix,
            params: GroupParams::DilationBlock { log_ratios, blocks: params_blocks },
        }
    }

    /// Matrix-vector action `g x`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(LabError::DimMismatch { expected: self.dim, got: x.len() });
        }
        let mut out = vec![T::zero(); self.dim];
        for r in 0..self.dim {
            let mut acc = T::zero();
            for c in 0..self.dim {
                acc += self.matrix[r * self.dim + c] * x[c];
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// Matrix product `self * rhs` (composition of actions).
    pub fn compose(&self, rhs: &GroupElement<T>) -> Result<GroupElement<T>> {
        if self.dim != rhs.dim {
            return Err(LabError::DimMismatch { expected: self.dim, got: rhs.dim });
        }
        let d = self.dim;
        let mut matrix = vec![T::zero(); d * d];
        for r in 0..d {
            for c in 0..d {
                let mut acc = T::zero();
                for k in 0..d {
                    acc += self.matrix[r * d + k] * rhs.matrix[k * d + c];
                }
                matrix[r * d + c] = acc;
            }
        }
        // Chart parameters of a product are recovered lazily where needed.
        Ok(GroupElement { kind: self.kind, dim: d, matrix, params: GroupParams::Trivial })
    }

    /// Determinant (2x2 and 3x3 only; block matrices use the ratio product).
    pub fn det2(&self) -> T {
        debug_assert_eq!(self.dim, 2);
        self.matrix[0] * self.matrix[3] - self.matrix[1] * self.matrix[2]
    }

    /// Max abs entry of `g^T g - I`, the orthogonality defect.
    pub fn orthogonality_defect(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for r in 0..d {
            for c in 0..d {
                let mut acc = T::zero();
                for k in 0..d {
                    acc += self.matrix[k * d + r] * self.matrix[k * d + c];
                }
                let target = if r == c { T::one() } else { T::zero() };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    /// Iwasawa coordinates of a 2x2 matrix in the given chart.
    pub fn sl2_chart_coords(&self, chart: Sl2Chart) -> (T, T, T) {
        debug_assert_eq!(self.dim, 2);
        let (g11, g12, g21, g22) = (self.matrix[0], self.matrix[1], self.matrix[2], self.matrix[3]);
        match chart {
            Sl2Chart::UpperTriangular => {
                let a = (g11 * g11 + g21 * g21).sqrt();
                let theta = g21.atan2(g11);
                let b = (g11 * g12 + g21 * g22) / a;
                (theta, a, b)
            }
            Sl2Chart::LowerTriangular => {
                let inv_a = (g12 * g12 + g22 * g22).sqrt();
                let a = T::one() / inv_a;
                let theta = (-g12).atan2(g22);
                let b = g21 * theta.cos() - g11 * theta.sin();
                (theta, a, b)
            }
        }
    }
}

/// Which triangular factor parameterizes the SL2 window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sl2Chart {
    /// `p = [[a, b], [0, 1/a]]`; Haar density on the chart is `dtheta da db`.
    UpperTriangular,
    /// `p = [[a, 0], [b, 1/a]]`; Haar density carries the extra `1/a^2`.
    LowerTriangular,
}

impl Sl2Chart {
    pub fn name(&self) -> &'static str {
        match self {
            Sl2Chart::UpperTriangular => "upper",
            Sl2Chart::LowerTriangular => "lower",
        }
    }
}

/// A compact chart of one of the supported groups with an explicit Haar
/// density and recorded window mass. Compact groups are probability
/// normalized; SL2 and dilation-block windows report the raw chart mass.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupWindow<T: Scalar> {
    /// The one-element group acting on ℝ^dim.
    Trivial { dim: usize },
    /// All of O(2), probability normalized (reflection with probability 1/2).
    Orthogonal2,
    /// All of O(3), probability normalized.
    Orthogonal3,
    /// `diag(r_1 q_1, .., r_k q_k)` with `prod r_i = 1`, `q_i` in O(d);
    /// the free log-ratios live in `[-half_width, half_width]^{k-1}`.
    DilationBlock { factors: usize, block_dim: usize, half_width: T },
    /// SL2(R) restricted to `a in [1/c, c]`, `b in [-c, c]`, full rotation.
    Sl2 { c: T, chart: Sl2Chart },
}

impl<T: Scalar> GroupWindow<T> {
    pub fn kind(&self) -> GroupKind {
        match self {
            GroupWindow::Trivial { .. } => GroupKind::Trivial,
            GroupWindow::Orthogonal2 => GroupKind::Orthogonal2,
            GroupWindow::Orthogonal3 => GroupKind::Orthogonal3,
            GroupWindow::DilationBlock { .. } => GroupKind::DilationBlock,
            GroupWindow::Sl2 { .. } => GroupKind::Sl2,
        }
    }

    /// Default SL2 window with C = 2.
    pub fn sl2_default() -> Self {
        GroupWindow::Sl2 { c: cast::<T>(2.0), chart: Sl2Chart::UpperTriangular }
    }

    /// Dimension of the space the group acts on.
    pub fn action_dim(&self) -> usize {
        match self {
            GroupWindow::Trivial { dim } => *dim,
            GroupWindow::Orthogonal2 => 2,
            GroupWindow::Orthogonal3 => 3,
            GroupWindow::DilationBlock { factors, block_dim, .. } => factors * block_dim,
            GroupWindow::Sl2 { .. } => 2,
        }
    }

    /// Total Haar mass of the window: 1 for compact groups, the chart mass
    /// for SL2 (`(c - 1/c) * 2c` in either chart) and dilation blocks
    /// (`(2 half_width)^{k-1}`).
    pub fn mass(&self) -> T {
        match self {
            GroupWindow::Trivial { .. } | GroupWindow::Orthogonal2 | GroupWindow::Orthogonal3 => {
                T::one()
            }
            GroupWindow::DilationBlock { factors, half_width, .. } => {
                let two = cast::<T>(2.0);
                (two * *half_width).powi(*factors as i32 - 1)
            }
            GroupWindow::Sl2 { c, .. } => {
                let two = cast::<T>(2.0);
                // int da over [1/c, c] of (1 or 1/a^2) is c - 1/c either way
                (*c - T::one() / *c) * two * *c
            }
        }
    }

    /// Draw `n` Haar samples with equal weights `mass / n`. Deterministic
    /// for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(GroupElement<T>, T)>> {
        if n == 0 {
            return Err(LabError::TooFewSamples { needed: 1, got: 0 });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.mass() / cast::<T>(n as f64);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push((self.sample_one(&mut rng), w));
        }
        Ok(out)
    }

    /// Draw a single element from the normalized Haar restriction.
    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> GroupElement<T> {
        match self {
            GroupWindow::Trivial { dim } => GroupElement::identity(GroupKind::Trivial, *dim),
            GroupWindow::Orthogonal2 => {
                let angle = cast::<T>(rng.gen::<f64>() * 2.0 * std::f64::consts::PI);
                let reflected = rng.gen::<bool>();
                GroupElement::rotation2(angle, reflected)
            }
            GroupWindow::Orthogonal3 => {
                let axis = random_axis::<T, R>(rng);
                let angle = haar_so3_angle::<T, R>(rng);
                let reflected = rng.gen::<bool>();
                GroupElement::rotation3(axis, angle, reflected)
            }
            GroupWindow::DilationBlock { factors, block_dim, half_width } => {
                let k = *factors;
                let mut log_ratios = Vec::with_capacity(k);
                let mut sum = T::zero();
                for _ in 0..k - 1 {
                    let s = (cast::<T>(rng.gen::<f64>() * 2.0) - T::one()) * *half_width;
                    log_ratios.push(s);
                    sum += s;
                }
                log_ratios.push(-sum);
                let blocks: Vec<GroupElement<T>> = (0..k)
                    .map(|_| match block_dim {
                        1 => {
                            let flip = rng.gen::<bool>();
                            let m = if flip { -T::one() } else { T::one() };
                            GroupElement {
                                kind: GroupKind::Trivial,
                                dim: 1,
                                matrix: vec![m],
                                params: GroupParams::Trivial,
                            }
                        }
                        2 => GroupWindow::Orthogonal2.sample_one(rng),
                        3 => GroupWindow::Orthogonal3.sample_one(rng),
                        d => panic!("unsupported block dimension {d}"),
                    })
                    .collect();
                GroupElement::dilation_block(log_ratios, blocks)
            }
            GroupWindow::Sl2 { c, chart } => {
                let theta = cast::<T>(rng.gen::<f64>() * 2.0 * std::f64::consts::PI);
                let b = (cast::<T>(rng.gen::<f64>() * 2.0) - T::one()) * *c;
                let a = match chart {
                    // density constant in a: uniform on [1/c, c]
                    Sl2Chart::UpperTriangular => {
                        T::one() / *c + cast::<T>(rng.gen::<f64>()) * (*c - T::one() / *c)
                    }
                    // density 1/a^2: inverse CDF gives a = 1/(c - u (c - 1/c))
                    Sl2Chart::LowerTriangular => {
                        let u = cast::<T>(rng.gen::<f64>());
                        T::one() / (*c - u * (*c - T::one() / *c))
                    }
                };
                GroupElement::sl2_iwasawa(theta, a, b, *chart)
            }
        }
    }

    /// Chart bounds check for SL2 windows (used by the invariance margin test).
    fn sl2_contains(&self, theta_a_b: (T, T, T)) -> bool {
        match self {
            GroupWindow::Sl2 { c, .. } => {
                let (_, a, b) = theta_a_b;
                a >= T::one() / *c && a <= *c && b.abs() <= *c
            }
            _ => true,
        }
    }
}

fn random_axis<T: Scalar, R: Rng>(rng: &mut R) -> [T; 3] {
    loop {
        let v = [
            2.0 * rng.gen::<f64>() - 1.0,
            2.0 * rng.gen::<f64>() - 1.0,
            2.0 * rng.gen::<f64>() - 1.0,
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 > 1e-8 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [cast::<T>(v[0] / n), cast::<T>(v[1] / n), cast::<T>(v[2] / n)];
        }
    }
}

/// SO(3) Haar angle density on [0, pi] is `(1 - cos psi)/pi`; invert the CDF
/// `(psi - sin psi)/pi = u` with a few Newton steps.
fn haar_so3_angle<T: Scalar, R: Rng>(rng: &mut R) -> T {
    let u: f64 = rng.gen();
    let target = u * std::f64::consts::PI;
    let mut psi = (3.0 * target).cbrt().min(std::f64::consts::PI); // small-angle seed
    for _ in 0..30 {
        let f = psi - psi.sin() - target;
        let fp = 1.0 - psi.cos();
        if fp.abs() < 1e-14 {
            break;
        }
        let step = f / fp;
        psi -= step;
        psi = psi.clamp(0.0, std::f64::consts::PI);
        if step.abs() < 1e-13 {
            break;
        }
    }
    cast::<T>(psi)
}

/// A smooth bump on a group chart: the product of 1D smootherstep windows on
/// selected chart coordinates. Used both as the cutoff psi of the SL2
/// estimates and as the test function of invariance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBump<T: Scalar> {
    /// Inclusive support interval and smoothing margin per chart axis; `None`
    /// leaves that axis unrestricted.
    pub axes: Vec<Option<AxisWindow<T>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisWindow<T: Scalar> {
    pub lo: T,
    pub hi: T,
    /// Width of the smooth ramp at each end; the bump is exactly 1 on
    /// `[lo + margin, hi - margin]` and 0 outside `[lo, hi]`.
    pub margin: T,
}

impl<T: Scalar> AxisWindow<T> {
    pub fn new(lo: T, hi: T, margin: T) -> Self {
        Self { lo, hi, margin }
    }

    fn eval(&self, x: T) -> T {
        if x <= self.lo || x >= self.hi {
            return T::zero();
        }
        let up = smootherstep((x - self.lo) / self.margin);
        let down = smootherstep((self.hi - x) / self.margin);
        up * down
    }
}

/// C^2 quintic ramp: 0 below 0, 1 above 1.
fn smootherstep<T: Scalar>(t: T) -> T {
    if t <= T::zero() {
        T::zero()
    } else if t >= T::one() {
        T::one()
    } else {
        let t3 = t * t * t;
        t3 * (cast::<T>(10.0) - cast::<T>(15.0) * t + cast::<T>(6.0) * t * t)
    }
}

impl<T: Scalar> ChartBump<T> {
    /// Bump over the `(a, b)` axes of an SL2 window chart, leaving the
    /// compact rotation coordinate free. `shrink` pulls the support inside
    /// the window by that fraction of each half-extent.
    pub fn sl2_interior(c: T, shrink: T, margin_frac: T) -> Self {
        let one = T::one();
        let a_lo = one / c;
        let a_hi = c;
        let a_pad = (a_hi - a_lo) * shrink * cast::<T>(0.5);
        let b_pad = c * shrink;
        let a_win = AxisWindow::new(a_lo + a_pad, a_hi - a_pad, (a_hi - a_lo - a_pad - a_pad) * margin_frac);
        let b_win = AxisWindow::new(-c + b_pad, c - b_pad, (c - b_pad) * cast::<T>(2.0) * margin_frac);
        ChartBump { axes: vec![None, Some(a_win), Some(b_win)] }
    }

    /// Evaluate on chart coordinates `(theta, a, b)`.
    pub fn eval_coords(&self, coords: &[T]) -> T {
        let mut v = T::one();
        for (axis, &x) in self.axes.iter().zip(coords) {
            if let Some(w) = axis {
                v *= w.eval(x);
                if v == T::zero() {
                    return v;
                }
            }
        }
        v
    }

    /// Evaluate on an SL2 element via its chart coordinates.
    pub fn eval_sl2(&self, g: &GroupElement<T>, chart: Sl2Chart) -> T {
        let (theta, a, b) = g.sl2_chart_coords(chart);
        self.eval_coords(&[theta, a, b])
    }

    /// Support box (per constrained axis) for margin checks.
    fn support(&self) -> Vec<Option<(T, T)>> {
        self.axes.iter().map(|a| a.map(|w| (w.lo, w.hi))).collect()
    }
}

/// Estimate `| int f(g h) dHaar(g) - int f(g) dHaar(g) |` over a window with
/// shared samples, returning the defect and its standard error.
///
/// `f` is evaluated through a [`ChartBump`] so its support is known: the
/// precondition that `supp(f) h^{-1}` stays inside the window is checked on a
/// coarse grid of the support box and violated margins are an error.
pub fn right_invariance_defect<T: Scalar>(
    window: &GroupWindow<T>,
    bump: &ChartBump<T>,
    h: &GroupElement<T>,
    n: usize,
    seed: u64,
) -> Result<crate::fourier::Estimate<T>> {
    let eval = |g: &GroupElement<T>| -> T {
        match window {
            GroupWindow::Sl2 { chart, .. } => bump.eval_sl2(g, *chart),
            GroupWindow::Orthogonal2 => {
                // canonical angle in [0, 2 pi); the reflection axis is free
                let mut angle = orthogonal2_angle(g);
                if angle < T::zero() {
                    angle += cast::<T>(2.0) * T::PI();
                }
                bump.eval_coords(&[angle])
            }
            GroupWindow::Orthogonal3 => {
                // evaluate on the rotation angle coordinate
                let tr = g.matrix[0] + g.matrix[4] + g.matrix[8];
                let det_sign = if det3(&g.matrix) < T::zero() { -T::one() } else { T::one() };
                let tr_rot = tr * det_sign;
                let cos_psi =
                    ((tr_rot - T::one()) / cast::<T>(2.0)).clamp(-T::one(), T::one());
                bump.eval_coords(&[cos_psi.acos()])
            }
            _ => T::one(),
        }
    };

    // Margin precheck for SL2 windows: map a coarse grid of the bump support
    // through right translation by h^-1 and require it stays inside the chart.
    if let GroupWindow::Sl2 { chart, .. } = window {
        let h_inv = sl2_inverse(h);
        let support = bump.support();
        let (a_lo, a_hi) = support.get(1).copied().flatten().ok_or_else(|| {
            LabError::InvalidParameter("sl2 invariance bump must constrain the a axis".into())
        })?;
        let (b_lo, b_hi) = support.get(2).copied().flatten().ok_or_else(|| {
            LabError::InvalidParameter("sl2 invariance bump must constrain the b axis".into())
        })?;
        let grid = 7;
        for it in 0..8 {
            let theta = cast::<T>(it as f64 / 8.0 * 2.0 * std::f64::consts::PI);
            for ia in 0..grid {
                for ib in 0..grid {
                    let fa = cast::<T>(ia as f64 / (grid - 1) as f64);
                    let fb = cast::<T>(ib as f64 / (grid - 1) as f64);
                    let a = a_lo + fa * (a_hi - a_lo);
                    let b = b_lo + fb * (b_hi - b_lo);
                    let g = GroupElement::sl2_iwasawa(theta, a, b, *chart);
                    let gh_inv = g.compose(&h_inv)?;
                    let coords = gh_inv.sl2_chart_coords(*chart);
                    if !window.sl2_contains(coords) {
                        return Err(LabError::MarginViolated(format!(
                            "support point (a={a}, b={b}) maps to (a={}, b={}) outside the chart",
                            coords.1, coords.2
                        )));
                    }
                }
            }
        }
    }

    let samples = window.sample(n, seed)?;
    let nf = cast::<T>(n as f64);
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    for (g, w) in &samples {
        let gh = g.compose(h)?;
        let diff = eval(&gh) - eval(g);
        sum += *w * diff;
        sum_sq += diff * diff;
    }
    let mean_diff = sum / window.mass();
    let var = (sum_sq / nf - mean_diff * mean_diff).max(T::zero());
    let stderr = window.mass() * (var / nf).sqrt();
    Ok(crate::fourier::Estimate { value: sum.abs(), stderr })
}

// Rotation angle of an O(2) element; the reflection fixes e1, so the first
// column determines the angle for both components.
fn orthogonal2_angle<T: Scalar>(g: &GroupElement<T>) -> T {
    g.matrix[2].atan2(g.matrix[0])
}

fn det3<T: Scalar>(m: &[T]) -> T {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

/// Inverse of a 2x2 determinant-one matrix.
pub fn sl2_inverse<T: Scalar>(g: &GroupElement<T>) -> GroupElement<T> {
    debug_assert_eq!(g.dim, 2);
    GroupElement {
        kind: g.kind,
        dim: 2,
        matrix: vec![g.matrix[3], -g.matrix[1], -g.matrix[2], g.matrix[0]],
        params: GroupParams::Trivial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_window_gives_identity_copies() {
        let w = GroupWindow::<f64>::Trivial { dim: 3 };
        let samples = w.sample(5, 1).unwrap();
        assert_eq!(samples.len(), 5);
        for (g, weight) in &samples {
            assert_eq!(g.matrix, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
            assert!((weight - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn orthogonal2_mean_phase_vanishes() {
        let w = GroupWindow::<f64>::Orthogonal2;
        let n = 40_000;
        let samples = w.sample(n, 42).unwrap();
        let (mut re, mut im) = (0.0, 0.0);
        for (g, _) in &samples {
            if let GroupParams::Orthogonal2 { angle, .. } = g.params {
                re += angle.cos();
                im += angle.sin();
            }
        }
        let mean = ((re / n as f64).powi(2) + (im / n as f64).powi(2)).sqrt();
        assert!(mean <= 3.0 / (n as f64).sqrt(), "|mean e^(i theta)| = {mean}");
    }

    #[test]
    fn sampled_elements_satisfy_matrix_invariants() {
        let windows: Vec<GroupWindow<f64>> = vec![
            GroupWindow::Orthogonal2,
            GroupWindow::Orthogonal3,
            GroupWindow::sl2_default(),
            GroupWindow::Sl2 { c: 2.0, chart: Sl2Chart::LowerTriangular },
            GroupWindow::DilationBlock { factors: 2, block_dim: 2, half_width: (2.0f64).ln() },
        ];
        for w in &windows {
            for (g, weight) in w.sample(500, 7).unwrap() {
                assert!(weight > 0.0);
                match g.kind {
                    GroupKind::Orthogonal2 | GroupKind::Orthogonal3 => {
                        assert!(g.orthogonality_defect() < 1e-12);
                    }
                    GroupKind::Sl2 => {
                        assert!((g.det2() - 1.0).abs() < 1e-12);
                    }
                    GroupKind::DilationBlock => {
                        if let GroupParams::DilationBlock { log_ratios, .. } = &g.params {
                            let prod: f64 = log_ratios.iter().map(|s| s.exp()).product();
                            assert!((prod - 1.0).abs() < 1e-12, "ratio product {prod}");
                        } else {
                            panic!("missing params");
                        }
                    }
                    GroupKind::Trivial => {}
                }
            }
        }
    }

    #[test]
    fn weights_sum_to_window_mass() {
        let w = GroupWindow::<f64>::sl2_default();
        let samples = w.sample(100_000, 3).unwrap();
        let total: f64 = samples.iter().map(|(_, w)| w).sum();
        // K mass 1 times (2 - 1/2) da times 4 db
        assert!((w.mass() - 6.0).abs() < 1e-12);
        assert!((total - 6.0).abs() < 1e-9, "total {total}");

        let dil = GroupWindow::<f64>::DilationBlock {
            factors: 3,
            block_dim: 2,
            half_width: (2.0f64).ln(),
        };
        let total: f64 = dil.sample(10_000, 4).unwrap().iter().map(|(_, w)| w).sum();
        assert!((total - dil.mass()).abs() < 1e-9);
    }

    #[test]
    fn apply_examples() {
        let id = GroupElement::<f64>::identity(GroupKind::Trivial, 2);
        assert_eq!(id.apply(&[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);

        let rot = GroupElement::<f64>::rotation2(std::f64::consts::FRAC_PI_2, false);
        let out = rot.apply(&[1.0, 0.0]).unwrap();
        assert!((out[0]).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);

        // Iwasawa (theta=0, a=2, b=1) acts as [[2,1],[0,1/2]]
        let g = GroupElement::<f64>::sl2_iwasawa(0.0, 2.0, 1.0, Sl2Chart::UpperTriangular);
        let out = g.apply(&[1.0, 1.0]).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-12 && (out[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn iwasawa_composition_consistency() {
        // k(theta) * p(a,b) must reproduce the stored matrix
        let theta = 0.7;
        let (a, b) = (1.3, -0.4);
        let k = GroupElement::<f64>::rotation2(theta, false);
        let p = GroupElement::<f64> {
            kind: GroupKind::Sl2,
            dim: 2,
            matrix: vec![a, b, 0.0, 1.0 / a],
            params: GroupParams::Trivial,
        };
        let kp = k.compose(&p).unwrap();
        let direct = GroupElement::<f64>::sl2_iwasawa(theta, a, b, Sl2Chart::UpperTriangular);
        for (x, y) in kp.matrix.iter().zip(&direct.matrix) {
            assert!((x - y).abs() < 1e-12);
        }
        // and the chart coordinates round-trip
        let (t2, a2, b2) = direct.sl2_chart_coords(Sl2Chart::UpperTriangular);
        assert!((t2 - theta).abs() < 1e-12);
        assert!((a2 - a).abs() < 1e-12);
        assert!((b2 - b).abs() < 1e-12);
    }

    #[test]
    fn lower_chart_round_trip() {
        let g = GroupElement::<f64>::sl2_iwasawa(-0.9, 0.8, 1.7, Sl2Chart::LowerTriangular);
        assert!((g.det2() - 1.0).abs() < 1e-12);
        let (t, a, b) = g.sl2_chart_coords(Sl2Chart::LowerTriangular);
        assert!((t + 0.9).abs() < 1e-12);
        assert!((a - 0.8).abs() < 1e-12);
        assert!((b - 1.7).abs() < 1e-12);
    }

    #[test]
    fn defect_zero_for_identity_translate() {
        let w = GroupWindow::<f64>::sl2_default();
        let bump = ChartBump::sl2_interior(2.0, 0.3, 0.25);
        let h = GroupElement::identity(GroupKind::Sl2, 2);
        let d = right_invariance_defect(&w, &bump, &h, 2000, 5).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn orthogonal2_invariance() {
        use rand_chacha::rand_core::SeedableRng;
        let w = GroupWindow::<f64>::Orthogonal2;
        // smooth periodic test function of the angle via a wrapped bump
        let bump = ChartBump {
            axes: vec![Some(AxisWindow::new(
                0.5,
                2.0 * std::f64::consts::PI - 0.5,
                1.2,
            ))],
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..10 {
            let h = w.sample_one(&mut rng);
            let d = right_invariance_defect(&w, &bump, &h, 10_000, 100 + trial).unwrap();
            assert!(
                d.value <= 3.0 * d.stderr.max(1e-12),
                "trial {trial}: defect {} vs stderr {}",
                d.value,
                d.stderr
            );
        }
    }

    #[test]
    fn sl2_invariance_small_translate() {
        let w = GroupWindow::<f64>::sl2_default();
        let bump = ChartBump::sl2_interior(2.0, 0.35, 0.25);
        // small upper-triangular translate: a' = 1.05, b' = 0.02
        let h = GroupElement::<f64> {
            kind: GroupKind::Sl2,
            dim: 2,
            matrix: vec![1.05, 0.02, 0.0, 1.0 / 1.05],
            params: GroupParams::Trivial,
        };
        let d = right_invariance_defect(&w, &bump, &h, 100_000, 12).unwrap();
        assert!(
            d.value <= 3.0 * d.stderr,
            "defect {} vs 3 x stderr {}",
            d.value,
            3.0 * d.stderr
        );
        // and a small rotation translate
        let h = GroupElement::<f64>::rotation2(0.04, false);
        let h = GroupElement { kind: GroupKind::Sl2, ..h };
        let d = right_invariance_defect(&w, &bump, &h, 100_000, 13).unwrap();
        assert!(
            d.value <= 3.0 * d.stderr,
            "rotation defect {} vs 3 x stderr {}",
            d.value,
            3.0 * d.stderr
        );
    }

    #[test]
    fn sl2_margin_violation_detected() {
        let w = GroupWindow::<f64>::sl2_default();
        // bump all the way to the window edge: any real translate breaks it
        let bump = ChartBump::sl2_interior(2.0, 0.0, 0.1);
        let h = GroupElement::<f64> {
            kind: GroupKind::Sl2,
            dim: 2,
            matrix: vec![1.4, 0.0, 0.0, 1.0 / 1.4],
            params: GroupParams::Trivial,
        };
        assert!(matches!(
            right_invariance_defect(&w, &bump, &h, 100, 1),
            Err(LabError::MarginViolated(_))
        ));
    }

    #[test]
    fn so3_angle_density_matches_haar() {
        use rand_chacha::rand_core::SeedableRng;
        // empirical mean of psi under (1-cos psi)/pi is pi/2 + 2/pi
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let n = 50_000;
        let mean: f64 =
            (0..n).map(|_| haar_so3_angle::<f64, _>(&mut rng)).sum::<f64>() / n as f64;
        let expect = std::f64::consts::FRAC_PI_2 + 2.0 / std::f64::consts::PI;
        assert!((mean - expect).abs() < 0.01, "mean {mean} vs {expect}");
    }

    #[test]
    fn orthogonal3_invariance() {
        use rand_chacha::rand_core::SeedableRng;
        let w = GroupWindow::<f64>::Orthogonal3;
        let bump = ChartBump {
            axes: vec![Some(AxisWindow::new(0.2, std::f64::consts::PI - 0.2, 0.8))],
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for trial in 0..5 {
            let h = w.sample_one(&mut rng);
            let d = right_invariance_defect(&w, &bump, &h, 20_000, 300 + trial).unwrap();
            assert!(
                d.value <= 3.5 * d.stderr.max(1e-12),
                "trial {trial}: defect {} vs stderr {}",
                d.value,
                d.stderr
            );
        }
    }
}
