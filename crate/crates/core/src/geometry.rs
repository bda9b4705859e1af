//! Coordinate-chart calculus: metric fields, Christoffel symbols, constraint
//! one-forms and the g-orthogonal projectors onto `D = ker A` and `D^⊥`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::NonholonomicSystem;
use crate::error::{GeomError, Result};
use crate::fd::{self, Fd};
use crate::linalg::{self, all_finite, coords_f64, symmetrize};
use crate::scalar::{lit, Real};

/// Chart coordinates of a point of the configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint<T: Real>(DVector<T>);

impl<T: Real> ChartPoint<T> {
    pub fn new(coords: DVector<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(GeomError::InvalidArgument(
                "chart point needs n >= 1".into(),
            ));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite {
                what: "chart point",
                at: coords_f64(&coords),
            });
        }
        Ok(Self(coords))
    }

    pub fn from_slice(coords: &[T]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(DVector::zeros(dim.max(1)))
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.0
    }

    pub fn into_coords(self) -> DVector<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Velocity components attached to a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Real> {
    pub base: ChartPoint<T>,
    pub comps: DVector<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(base: ChartPoint<T>, comps: DVector<T>) -> Result<Self> {
        if comps.len() != base.dim() {
            return Err(GeomError::DimensionMismatch {
                what: "tangent vector",
                expected: base.dim(),
                got: comps.len(),
            });
        }
        if !comps.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite {
                what: "tangent vector",
                at: coords_f64(base.coords()),
            });
        }
        Ok(Self { base, comps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SignaturePolicy {
    RequirePositiveDefinite,
    /// Only invertibility is required (indefinite kinetic metrics).
    AllowIndefinite,
}

pub type MatrixFn<T> = Arc<dyn Fn(&DVector<T>) -> Result<DMatrix<T>> + Send + Sync>;
pub type MatricesFn<T> = Arc<dyn Fn(&DVector<T>) -> Result<Vec<DMatrix<T>>> + Send + Sync>;

/// A metric field `q ↦ g(q)` on an `n`-dimensional chart.
#[derive(Clone)]
pub struct MetricField<T: Real> {
    dim: usize,
    eval: MatrixFn<T>,
    partials: Option<MatricesFn<T>>,
    policy: SignaturePolicy,
    fd: Fd<T>,
}

impl<T: Real> fmt::Debug for MetricField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("analytic_partials", &self.partials.is_some())
            .field("policy", &self.policy)
            .finish()
    }
}

impl<T: Real> MetricField<T> {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    {
        Self::try_new(dim, move |q| Ok(eval(q)))
    }

    pub fn try_new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&DVector<T>) -> Result<DMatrix<T>> + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(eval),
            partials: None,
            policy: SignaturePolicy::RequirePositiveDefinite,
            fd: Fd::metric(),
        }
    }

    /// Euclidean metric.
    pub fn flat(dim: usize) -> Self {
        Self::new(dim, move |_| DMatrix::identity(dim, dim))
            .with_partials(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    /// Constant metric `m` (symmetrized).
    pub fn constant(m: DMatrix<T>) -> Self {
        let dim = m.nrows();
        let m = symmetrize(&m);
        Self::new(dim, move |_| m.clone())
            .with_partials(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    /// Supplies `∂_i g`, one matrix per chart coordinate.
    pub fn with_partials<F>(mut self, partials: F) -> Self
    where
        F: Fn(&DVector<T>) -> Vec<DMatrix<T>> + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(move |q| Ok(partials(q))));
        self
    }

    pub fn with_policy(mut self, policy: SignaturePolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Finite-difference settings used when partials are not analytic.
    pub fn with_fd(mut self, fd: Fd<T>) -> Self {
        self.fd = fd;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn policy(&self) -> SignaturePolicy {
        self.policy
    }

    pub fn fd(&self) -> Fd<T> {
        self.fd
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    fn check_dim(&self, q: &DVector<T>) -> Result<()> {
        if q.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                what: "metric argument",
                expected: self.dim,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Symmetrized matrix without the signature check.
    pub fn eval_raw(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        self.check_dim(q)?;
        let m = (self.eval)(q)?;
        if m.shape() != (self.dim, self.dim) {
            return Err(GeomError::DimensionMismatch {
                what: "metric matrix",
                expected: self.dim,
                got: m.nrows(),
            });
        }
        if !all_finite(&m) {
            return Err(GeomError::NonFinite {
                what: "metric",
                at: coords_f64(q),
            });
        }
        Ok(symmetrize(&m))
    }

    /// Symmetrized matrix with the signature policy applied.
    pub fn at(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        let m = self.eval_raw(q)?;
        if self.policy == SignaturePolicy::RequirePositiveDefinite
            && !linalg::is_positive_definite(&m)
        {
            return Err(GeomError::NotPositiveDefinite { at: coords_f64(q) });
        }
        Ok(m)
    }

    /// `∂_i g(q)` for every coordinate `i`.
    pub fn partials_at(&self, q: &DVector<T>, fd: Fd<T>) -> Result<Vec<DMatrix<T>>> {
        self.check_dim(q)?;
        if let Some(p) = &self.partials {
            let ps = p(q)?;
            if ps.len() != self.dim {
                return Err(GeomError::DimensionMismatch {
                    what: "metric partials",
                    expected: self.dim,
                    got: ps.len(),
                });
            }
            return Ok(ps.iter().map(symmetrize).collect());
        }
        (0..self.dim)
            .map(|axis| fd::partial(|y| self.eval_raw(y), q, axis, fd))
            .collect()
    }

    pub fn inner(&self, q: &DVector<T>, a: &DVector<T>, b: &DVector<T>) -> Result<T> {
        Ok(linalg::bilinear(&self.at(q)?, a, b))
    }

    /// Christoffel symbols with this field's default finite-difference settings.
    pub fn christoffel(&self, q: &DVector<T>) -> Result<Christoffel<T>> {
        christoffel_at(self, q, self.fd)
    }
}

/// Christoffel symbols `Γ^k_{ij}` at one point; `symbols[k][(i, j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel<T: Real> {
    symbols: Vec<DMatrix<T>>,
}

impl<T: Real> Christoffel<T> {
    pub fn dim(&self) -> usize {
        self.symbols.len()
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.symbols[k][(i, j)]
    }

    /// The matrix `(Γ^k_{ij})_{ij}` for a fixed upper index.
    pub fn upper(&self, k: usize) -> &DMatrix<T> {
        &self.symbols[k]
    }

    /// `Γ(a, b)^k = Γ^k_{ij} a^i b^j`
    pub fn contract(&self, a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(
            self.dim(),
            self.symbols.iter().map(|s| linalg::bilinear(s, a, b)),
        )
    }
}

/// Symmetrized metric matrix with the field's signature policy applied.
pub fn metric_at<T: Real>(g: &MetricField<T>, q: &ChartPoint<T>) -> Result<DMatrix<T>> {
    g.at(q.coords())
}

/// Levi-Civita symbols `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
///
/// Uses the field's analytic partials when present, finite differences with
/// `fd` otherwise. Indefinite metrics are accepted as long as they are
/// invertible.
pub fn christoffel_at<T: Real>(
    g: &MetricField<T>,
    q: &DVector<T>,
    fd: Fd<T>,
) -> Result<Christoffel<T>> {
    christoffel_with_metric(g, &g.at(q)?, q, fd)
}

/// [`christoffel_at`] with the metric matrix `m = g(q)` already evaluated.
pub(crate) fn christoffel_with_metric<T: Real>(
    g: &MetricField<T>,
    m: &DMatrix<T>,
    q: &DVector<T>,
    fd: Fd<T>,
) -> Result<Christoffel<T>> {
    let n = g.dim();
    let dg = g.partials_at(q, fd)?;
    let half = lit::<T>(0.5);
    // lowered[l][(i, j)] = ½(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
    let lowered: Vec<DMatrix<T>> = (0..n)
        .map(|l| {
            DMatrix::from_fn(n, n, |i, j| {
                half * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])
            })
        })
        .collect();
    // Raise l: stack the lowered symbols as columns indexed by (i, j) and solve once.
    let rhs = DMatrix::from_fn(n, n * n, |l, ij| lowered[l][(ij / n, ij % n)]);
    let raised = linalg::solve(m, &rhs, "Levi-Civita metric inversion", q)?;
    let symbols = (0..n)
        .map(|k| {
            let s = DMatrix::from_fn(n, n, |i, j| raised[(k, i * n + j)]);
            symmetrize(&s)
        })
        .collect();
    Ok(Christoffel { symbols })
}

type ConstraintFn<T> = Arc<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>;
type ConstraintPartialsFn<T> = Arc<dyn Fn(&DVector<T>) -> Vec<DMatrix<T>> + Send + Sync>;

/// Constraint one-forms `A(q)` (an `m × n` matrix); the distribution is `D_q = ker A(q)`.
#[derive(Clone)]
pub struct ConstraintField<T: Real> {
    dim: usize,
    corank: usize,
    eval: ConstraintFn<T>,
    partials: Option<ConstraintPartialsFn<T>>,
}

impl<T: Real> fmt::Debug for ConstraintField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintField")
            .field("dim", &self.dim)
            .field("corank", &self.corank)
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}

impl<T: Real> ConstraintField<T> {
    pub fn new<F>(dim: usize, corank: usize, eval: F) -> Result<Self>
    where
        F: Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    {
        if corank >= dim {
            return Err(GeomError::InvalidArgument(format!(
                "constraint corank {corank} leaves no admissible directions in dimension {dim}"
            )));
        }
        Ok(Self {
            dim,
            corank,
            eval: Arc::new(eval),
            partials: None,
        })
    }

    /// No constraints (`D = TQ`).
    pub fn unconstrained(dim: usize) -> Self {
        Self {
            dim,
            corank: 0,
            eval: Arc::new(move |_| DMatrix::zeros(0, dim)),
            partials: Some(Arc::new(move |_| vec![DMatrix::zeros(0, dim); dim])),
        }
    }

    /// Supplies `∂_i A`, one `m × n` matrix per chart coordinate.
    pub fn with_partials<F>(mut self, partials: F) -> Self
    where
        F: Fn(&DVector<T>) -> Vec<DMatrix<T>> + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(partials));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn corank(&self) -> usize {
        self.corank
    }

    /// Rank of the distribution, `k = n − m`.
    pub fn rank(&self) -> usize {
        self.dim - self.corank
    }

    pub fn at(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        if q.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                what: "constraint argument",
                expected: self.dim,
                got: q.len(),
            });
        }
        let a = (self.eval)(q);
        if a.shape() != (self.corank, self.dim) {
            return Err(GeomError::DimensionMismatch {
                what: "constraint matrix rows",
                expected: self.corank,
                got: a.nrows(),
            });
        }
        if !all_finite(&a) {
            return Err(GeomError::NonFinite {
                what: "constraint",
                at: coords_f64(q),
            });
        }
        Ok(a)
    }

    /// `Σ_l dir^l ∂_l A(q)`, the derivative of `A` along `dir`.
    pub fn derivative_along(
        &self,
        q: &DVector<T>,
        dir: &DVector<T>,
        fd: Fd<T>,
    ) -> Result<DMatrix<T>> {
        if let Some(p) = &self.partials {
            let ps = p(q);
            let mut out = DMatrix::zeros(self.corank, self.dim);
            for (l, pl) in ps.iter().enumerate() {
                out += pl * dir[l];
            }
            return Ok(out);
        }
        fd::directional(|y| self.at(y), q, dir, fd)
    }

    /// `‖A(q) v‖_∞`
    pub fn residual(&self, q: &DVector<T>, v: &DVector<T>) -> Result<T> {
        Ok(linalg::sup_norm(&(self.at(q)? * v)))
    }
}

/// `(P, g⁻¹Aᵀ)` shared by the projector and the constrained dynamics.
fn projector_parts<T: Real>(g: &DMatrix<T>, a: &DMatrix<T>, q: &DVector<T>) -> Result<DMatrix<T>> {
    let n = g.nrows();
    if a.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let ginv_at = linalg::solve(g, &a.transpose(), "metric inversion", q)?;
    let schur = a * &ginv_at;
    let coeff = linalg::solve(&schur, a, "constraint Gram matrix A g^-1 A^T", q)?;
    Ok(DMatrix::identity(n, n) - ginv_at * coeff)
}

/// g-orthogonal projector onto `D_q`:
/// `P = Id − g⁻¹Aᵀ(A g⁻¹ Aᵀ)⁻¹A`.
pub fn orthogonal_projector_at<T: Real>(
    g: &MetricField<T>,
    a: &ConstraintField<T>,
    q: &DVector<T>,
) -> Result<DMatrix<T>> {
    projector_parts(&g.at(q)?, &a.at(q)?, q)
}

/// Complementary projector `P′ = Id − P` onto `D_q^⊥`.
pub fn complement_projector_at<T: Real>(
    g: &MetricField<T>,
    a: &ConstraintField<T>,
    q: &DVector<T>,
) -> Result<DMatrix<T>> {
    let p = orthogonal_projector_at(g, a, q)?;
    Ok(DMatrix::identity(p.nrows(), p.ncols()) - p)
}

/// Levi-Civita derivative `∇^g_X Y` at `q`.
pub fn levi_civita_derivative<T, X, Y>(
    g: &MetricField<T>,
    x: X,
    y: Y,
    q: &DVector<T>,
    fd: Fd<T>,
) -> Result<DVector<T>>
where
    T: Real,
    X: Fn(&DVector<T>) -> DVector<T>,
    Y: Fn(&DVector<T>) -> DVector<T>,
{
    let xq = x(q);
    let yq = y(q);
    let dy: DVector<T> = fd::directional(|p| Ok(y(p)), q, &xq, fd)?;
    Ok(dy + christoffel_at(g, q, g.fd())?.contract(&xq, &yq))
}

/// Nonholonomic connection `∇^nh_X Y = P(∇^g_X Y) + ∇^g_X [P′(Y)]` at `q`.
///
/// The fields are callables on chart coordinates; directional derivatives
/// are central differences with `fd`.
pub fn nh_covariant_derivative<T, X, Y>(
    sys: &NonholonomicSystem<T>,
    x: X,
    y: Y,
    q: &ChartPoint<T>,
    fd: Fd<T>,
) -> Result<TangentVector<T>>
where
    T: Real,
    X: Fn(&DVector<T>) -> DVector<T>,
    Y: Fn(&DVector<T>) -> DVector<T>,
{
    let g = sys.metric();
    let a = sys.constraints();
    let qc = q.coords();
    let p = orthogonal_projector_at(g, a, qc)?;
    let tangential = &p * levi_civita_derivative(g, &x, &y, qc, fd)?;

    let xq = x(qc);
    let normal_part =
        |pt: &DVector<T>| -> Result<DVector<T>> { Ok(complement_projector_at(g, a, pt)? * y(pt)) };
    let d_normal: DVector<T> = fd::directional(normal_part, qc, &xq, fd)?;
    let normal = d_normal + christoffel_at(g, qc, g.fd())?.contract(&xq, &normal_part(qc)?);

    TangentVector::new(q.clone(), tangential + normal)
}

/// g-orthonormal basis of `D_q = ker A(q)`, one column per direction.
///
/// The null space is read off a reduced row echelon form computed with full
/// pivoting (ties resolved toward the lowest index), then orthonormalized by
/// modified Gram–Schmidt in the order of the free columns.
pub fn distribution_basis<T: Real>(
    g: &MetricField<T>,
    a: &ConstraintField<T>,
    q: &DVector<T>,
) -> Result<DMatrix<T>> {
    let n = a.dim();
    let m = a.corank();
    let mut r = a.at(q)?;
    let scale = r.amax().max(T::one());
    let tiny = lit::<T>(1e-12) * scale;
    let mut pivot_cols: Vec<usize> = Vec::with_capacity(m);

    for row in 0..m {
        let mut best: Option<(usize, usize, T)> = None;
        for i in row..m {
            for j in (0..n).filter(|j| !pivot_cols.contains(j)) {
                let val = r[(i, j)].abs();
                if best.is_none_or(|(_, _, b)| val > b) {
                    best = Some((i, j, val));
                }
            }
        }
        let (pi, pj, val) = best.expect("non-empty pivot search");
        if val <= tiny {
            return Err(GeomError::Singular {
                what: "constraint matrix (rank deficient)",
                at: coords_f64(q),
            });
        }
        r.swap_rows(row, pi);
        let piv = r[(row, pj)];
        for j in 0..n {
            r[(row, j)] /= piv;
        }
        for i in (0..m).filter(|&i| i != row) {
            let f = r[(i, pj)];
            if f != T::zero() {
                for j in 0..n {
                    let sub = f * r[(row, j)];
                    r[(i, j)] -= sub;
                }
            }
        }
        pivot_cols.push(pj);
    }

    let gm = g.at(q)?;
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(n - m);
    for free in (0..n).filter(|j| !pivot_cols.contains(j)) {
        let mut v = DVector::zeros(n);
        v[free] = T::one();
        for (row, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -r[(row, free)];
        }
        for b in &basis {
            let c = linalg::bilinear(&gm, b, &v);
            v -= b * c;
        }
        let norm = linalg::bilinear(&gm, &v, &v).sqrt();
        basis.push(v / norm);
    }
    Ok(DMatrix::from_columns(&basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn flat_metric_is_identity_with_zero_christoffels() {
        let g = MetricField::<f64>::flat(3);
        let q = ChartPoint::origin(3);
        assert_eq!(metric_at(&g, &q).unwrap(), DMatrix::identity(3, 3));
        let gam = christoffel_at(&g, &v(&[0.3, -1.0, 2.0]), Fd::metric()).unwrap();
        for k in 0..3 {
            assert_eq!(gam.upper(k).amax(), 0.0);
        }
    }

    #[test]
    fn indefinite_metric_rejected_under_positive_definite_policy() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g = MetricField::constant(m.clone());
        assert!(matches!(
            g.at(&v(&[0.0, 0.0])),
            Err(GeomError::NotPositiveDefinite { .. })
        ));
        let g = g.with_policy(SignaturePolicy::AllowIndefinite);
        assert_eq!(g.at(&v(&[0.0, 0.0])).unwrap(), m);
    }

    #[test]
    fn non_finite_metric_is_an_error() {
        let g = MetricField::<f64>::new(1, |q| DMatrix::from_element(1, 1, 1.0 / q[0]));
        assert!(matches!(g.at(&v(&[0.0])), Err(GeomError::NonFinite { .. })));
    }

    #[test]
    fn metric_is_symmetrized() {
        let g =
            MetricField::<f64>::new(2, |_| DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]));
        let m = g.at(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 0)], 0.5);
    }

    #[test]
    fn singular_metric_has_no_christoffels() {
        let g =
            MetricField::<f64>::new(2, |_| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]))
                .with_policy(SignaturePolicy::AllowIndefinite);
        assert!(matches!(
            christoffel_at(&g, &v(&[0.0, 0.0]), Fd::metric()),
            Err(GeomError::Singular { .. })
        ));
    }

    #[test]
    fn christoffel_analytic_and_fd_paths_agree() {
        // Polar-like metric diag(1, r²) in (r, θ) with partials supplied.
        let analytic =
            MetricField::<f64>::new(2, |q| DMatrix::from_diagonal(&v(&[1.0, q[0] * q[0]])))
                .with_partials(|q| {
                    vec![
                        DMatrix::from_diagonal(&v(&[0.0, 2.0 * q[0]])),
                        DMatrix::zeros(2, 2),
                    ]
                });
        let numeric =
            MetricField::<f64>::new(2, |q| DMatrix::from_diagonal(&v(&[1.0, q[0] * q[0]])));
        let q = v(&[1.3, 0.4]);
        for fd in [Fd::central3(1e-4), Fd::central5(1e-4)] {
            let a = christoffel_at(&analytic, &q, fd).unwrap();
            let b = christoffel_at(&numeric, &q, fd).unwrap();
            for k in 0..2 {
                let rel = (a.upper(k) - b.upper(k)).amax() / a.upper(k).amax().max(1.0);
                assert!(rel < 10.0 * 1e-8, "k={k} rel={rel}");
            }
        }
        let a = christoffel_at(&analytic, &q, Fd::metric()).unwrap();
        // Γ^r_θθ = −r, Γ^θ_rθ = 1/r
        assert!((a.get(0, 1, 1) + 1.3).abs() < 1e-14);
        assert!((a.get(1, 0, 1) - 1.0 / 1.3).abs() < 1e-14);
        assert_eq!(a.get(1, 0, 1), a.get(1, 1, 0));
    }

    #[test]
    fn particle_projector_matches_hand_computation() {
        let entry = systems::particle_system::<f64>();
        let sys = &entry.system;
        let p0 =
            orthogonal_projector_at(sys.metric(), sys.constraints(), &v(&[0.0, 0.0, 0.0])).unwrap();
        assert!((p0 - DMatrix::from_diagonal(&v(&[1.0, 1.0, 0.0]))).amax() < 1e-15);
        let p1 =
            orthogonal_projector_at(sys.metric(), sys.constraints(), &v(&[0.0, 1.0, 0.0])).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.5, 0.0, 1.0, 0.0, 0.5, 0.0, 0.5]);
        assert!((p1 - expected).amax() < 1e-15);
    }

    #[test]
    fn projector_needs_full_rank_constraints() {
        let g = MetricField::<f64>::flat(3);
        let a = ConstraintField::new(3, 2, |_| {
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0])
        })
        .unwrap();
        assert!(matches!(
            orthogonal_projector_at(&g, &a, &v(&[0.0, 0.0, 0.0])),
            Err(GeomError::Singular { .. })
        ));
        assert!(distribution_basis(&g, &a, &v(&[0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn distribution_basis_is_orthonormal_and_admissible() {
        let entry = systems::disk_system::<f64>(1.5, 0.7).unwrap();
        let sys = &entry.system;
        let q = v(&[0.2, -0.1, 0.3, 0.8]);
        let b = distribution_basis(sys.metric(), sys.constraints(), &q).unwrap();
        assert_eq!(b.ncols(), 2);
        assert!((sys.constraints().at(&q).unwrap() * &b).amax() < 1e-12);
        let gram = b.transpose() * sys.metric().at(&q).unwrap() * &b;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-12);
        // Deterministic: same input, bitwise identical output.
        assert_eq!(
            b,
            distribution_basis(sys.metric(), sys.constraints(), &q).unwrap()
        );
    }

    #[test]
    fn particle_distribution_basis_at_origin_is_canonical() {
        let entry = systems::particle_system::<f64>();
        let b = distribution_basis(
            entry.system.metric(),
            entry.system.constraints(),
            &v(&[0.0, 0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(
            b,
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
    }
}
