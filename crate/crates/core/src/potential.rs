//! Quadratic potentials `F(x) = ½ xᵀMx` on the simplex and their lifts
//! `F̃(y) = F(y²)` to the unit sphere.
//!
//! Gradients are closed form. With `x = y²` componentwise,
//! `∂F̃/∂y_i = 2 y_i [Mx]_i`, and the tangential part on the sphere is
//! `∇*F̃(y) = ∇F̃(y) − ⟨∇F̃(y), y⟩ y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::{NORM_TOL, SIMPLEX_SUM_TOL, SYMMETRY_TOL};

/// Symmetric `n × n` payoff matrix, stored dense and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct PayoffMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    n: usize,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for PayoffMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        if repr.entries.len() != repr.n {
            return Err(Error::InvalidMatrix(format!(
                "declared n = {} but {} rows given",
                repr.n,
                repr.entries.len()
            )));
        }
        PayoffMatrix::from_rows(&repr.entries)
    }
}

impl From<PayoffMatrix> for MatrixRepr {
    fn from(m: PayoffMatrix) -> Self {
        MatrixRepr {
            n: m.n,
            entries: m.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl PayoffMatrix {
    /// Builds a matrix from row slices; rejects non-square, non-symmetric or
    /// non-finite input and `n < 2`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(n, entries)
    }

    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMatrix(format!("n must be at least 2, got {n}")));
        }
        if entries.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {v}")));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(PayoffMatrix { n, entries })
    }

    /// `c·I`.
    pub fn scaled_identity(n: usize, c: f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = c;
        }
        Self::from_row_major(n, entries)
    }

    /// The 3×3 matrix of the path graph on three vertices, `A + ½I`.
    pub fn two_edge() -> Self {
        Self::from_rows(&[[0.5, 1.0, 0.0], [1.0, 0.5, 1.0], [0.0, 1.0, 0.5]])
            .expect("two-edge matrix is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `out = M v`, no allocation.
    #[inline]
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(v, &mut out);
        out
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

/// A point of the probability simplex (population fractions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.0
    }
}

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSimplexPoint("empty coordinate vector".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidSimplexPoint(format!("coordinate {c} is not a nonnegative number")));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::InvalidSimplexPoint(format!("coordinates sum to {sum}")));
        }
        Ok(SimplexPoint(coords))
    }

    /// Barycenter `1/n` in every coordinate.
    pub fn uniform(n: usize) -> Self {
        SimplexPoint(vec![1.0 / n as f64; n])
    }

    /// Vertex `e_v` of the simplex.
    pub fn vertex(n: usize, v: usize) -> Self {
        let mut c = vec![0.0; n];
        c[v] = 1.0;
        SimplexPoint(c)
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidSimplexPoint("weights must have positive sum".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        SimplexPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1_distance(&self, other: &SimplexPoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// A unit vector in `Rⁿ`; its componentwise square lies on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint(Vec<f64>);

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpherePoint::new(v)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = norm(&coords);
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(Error::NotOnSphere { norm });
        }
        Ok(SpherePoint(coords))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let norm = norm(&coords);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numeric(format!("cannot normalize vector of norm {norm}")));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(SpherePoint(coords))
    }

    /// `(cos θ, sin θ)` on the unit circle.
    pub fn from_angle(theta: f64) -> Self {
        SpherePoint(vec![theta.cos(), theta.sin()])
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        SpherePoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Angle `atan2(y₁, y₀)` in `[0, 2π)`; meaningful for `n = 2`.
    pub fn angle(&self) -> f64 {
        self.0[1].atan2(self.0[0]).rem_euclid(std::f64::consts::TAU)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `F(x) = ½ xᵀMx`.
pub fn potential(m: &PayoffMatrix, x: &SimplexPoint) -> Result<f64> {
    m.check_dim(x.dim())?;
    Ok(quadratic_form(m, x.coords()))
}

#[inline]
pub(crate) fn quadratic_form(m: &PayoffMatrix, x: &[f64]) -> f64 {
    0.5 * m
        .rows()
        .zip(x)
        .map(|(row, xi)| xi * dot(row, x))
        .sum::<f64>()
}

/// Payoff accumulation rates `V(x) = ∇F(x) = Mx`.
pub fn simplex_payoff(m: &PayoffMatrix, x: &SimplexPoint) -> Result<Vec<f64>> {
    m.check_dim(x.dim())?;
    Ok(m.mul_vec(x.coords()))
}

/// `F̃(y) = F(y²)`.
pub fn sphere_potential(m: &PayoffMatrix, y: &SpherePoint) -> Result<f64> {
    m.check_dim(y.dim())?;
    let x: Vec<f64> = y.coords().iter().map(|v| v * v).collect();
    Ok(quadratic_form(m, &x))
}

/// Euclidean gradient of `F̃`: component `i` is `2 y_i [M y²]_i`.
pub fn sphere_gradient(m: &PayoffMatrix, y: &SpherePoint) -> Result<Vec<f64>> {
    m.check_dim(y.dim())?;
    let n = m.n();
    let mut scratch = vec![0.0; n];
    let mut grad = vec![0.0; n];
    sphere_gradient_into(m, y.coords(), &mut scratch, &mut grad);
    Ok(grad)
}

/// Tangential gradient `∇F̃ − ⟨∇F̃, y⟩ y`.
pub fn projected_gradient(m: &PayoffMatrix, y: &SpherePoint) -> Result<Vec<f64>> {
    m.check_dim(y.dim())?;
    let n = m.n();
    let mut scratch = vec![0.0; n];
    let mut grad = vec![0.0; n];
    projected_gradient_into(m, y.coords(), &mut scratch, &mut grad);
    Ok(grad)
}

/// Writes `∇F̃(y)` into `grad`, using `scratch` for `y²` and then `My²`.
#[inline]
pub(crate) fn sphere_gradient_into(m: &PayoffMatrix, y: &[f64], scratch: &mut [f64], grad: &mut [f64]) {
    for (g, v) in grad.iter_mut().zip(y) {
        *g = v * v;
    }
    m.mul_vec_into(grad, scratch);
    for ((g, v), mx) in grad.iter_mut().zip(y).zip(scratch.iter()) {
        *g = 2.0 * v * mx;
    }
}

#[inline]
pub(crate) fn projected_gradient_into(m: &PayoffMatrix, y: &[f64], scratch: &mut [f64], grad: &mut [f64]) {
    sphere_gradient_into(m, y, scratch, grad);
    let radial = dot(grad, y);
    for (g, v) in grad.iter_mut().zip(y) {
        *g -= radial * v;
    }
}

/// `F̃(θ) = F([cos²θ, sin²θ])` for a 2×2 matrix.
pub fn circle_potential(m: &PayoffMatrix, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (u, v) = (c * c, s * s);
    0.5 * (m.get(0, 0) * u * u + 2.0 * m.get(0, 1) * u * v + m.get(1, 1) * v * v)
}

/// `dF̃/dθ = 2 cosθ sinθ ([Mx]₁ − [Mx]₀)` with `x = (cos²θ, sin²θ)`.
pub fn circle_potential_derivative(m: &PayoffMatrix, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (u, v) = (c * c, s * s);
    let mx0 = m.get(0, 0) * u + m.get(0, 1) * v;
    let mx1 = m.get(0, 1) * u + m.get(1, 1) * v;
    2.0 * c * s * (mx1 - mx0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sp(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> SpherePoint {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        SpherePoint::normalize(v).unwrap()
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> PayoffMatrix {
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                e[i * n + j] = v;
                e[j * n + i] = v;
            }
        }
        PayoffMatrix::from_row_major(n, e).unwrap()
    }

    #[test]
    fn two_edge_potential_values() {
        let m = PayoffMatrix::two_edge();
        assert!((potential(&m, &sp(&[0.5, 0.5, 0.0])).unwrap() - 0.375).abs() < 1e-12);
        assert!((potential(&m, &sp(&[0.2, 0.6, 0.2])).unwrap() - 0.35).abs() < 1e-12);
        let third = 1.0 / 3.0;
        assert!((potential(&m, &sp(&[third, third, third])).unwrap() - 11.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn payoff_examples() {
        let m = PayoffMatrix::two_edge();
        assert_eq!(simplex_payoff(&m, &SimplexPoint::vertex(3, 1)).unwrap(), vec![1.0, 0.5, 1.0]);
        for i in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| m.get(r, i)).collect();
            assert_eq!(simplex_payoff(&m, &SimplexPoint::vertex(3, i)).unwrap(), col);
        }
        let half = PayoffMatrix::scaled_identity(2, 0.5).unwrap();
        assert_eq!(simplex_payoff(&half, &sp(&[0.5, 0.5])).unwrap(), vec![0.25, 0.25]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = PayoffMatrix::two_edge();
        let err = potential(&m, &sp(&[0.5, 0.5])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
        assert!(sphere_gradient(&m, &SpherePoint::from_angle(0.3)).is_err());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(PayoffMatrix::from_rows(&[[1.0, 2.0], [3.0, 1.0]]).is_err());
        assert!(PayoffMatrix::from_rows(&[[1.0]]).is_err());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SpherePoint::new(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn sphere_potential_examples() {
        let m = PayoffMatrix::two_edge();
        let s = 0.5f64.sqrt();
        let y = SpherePoint::new(vec![s, s, 0.0]).unwrap();
        assert!((sphere_potential(&m, &y).unwrap() - 0.375).abs() < 1e-12);
        let y = SpherePoint::new(vec![0.2f64.sqrt(), 0.6f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        assert!((sphere_potential(&m, &y).unwrap() - 0.35).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_vertex() {
        let m = PayoffMatrix::two_edge();
        let y = SpherePoint::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(sphere_gradient(&m, &y).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(projected_gradient(&m, &y).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn projected_gradient_vanishes_at_clique_point() {
        let m = PayoffMatrix::two_edge();
        let s = 0.5f64.sqrt();
        let y = SpherePoint::new(vec![s, s, 0.0]).unwrap();
        let g = projected_gradient(&m, &y).unwrap();
        assert!(norm(&g) < 1e-15, "{g:?}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for &n in &[3usize, 10, 100] {
            let m = random_symmetric(&mut rng, n);
            for _ in 0..100 {
                let y = random_unit(&mut rng, n);
                let g = sphere_gradient(&m, &y).unwrap();
                let mut fd = vec![0.0; n];
                for i in 0..n {
                    let mut yp = y.coords().to_vec();
                    let mut ym = y.coords().to_vec();
                    yp[i] += h;
                    ym[i] -= h;
                    let fp = quadratic_form(&m, &yp.iter().map(|v| v * v).collect::<Vec<_>>());
                    let fm = quadratic_form(&m, &ym.iter().map(|v| v * v).collect::<Vec<_>>());
                    fd[i] = (fp - fm) / (2.0 * h);
                }
                let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                let rel = norm(&diff) / norm(&fd).max(1e-300);
                assert!(rel < 1e-6, "n={n} rel={rel}");
            }
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = PayoffMatrix::two_edge();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"n":3,"entries":[[0.5,1.0,0.0],[1.0,0.5,1.0],[0.0,1.0,0.5]]}"#);
        let back: PayoffMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<PayoffMatrix>(r#"{"n":2,"entries":[[1,2],[3,1]]}"#).is_err());
        assert!(serde_json::from_str::<PayoffMatrix>(r#"{"n":3,"entries":[[1,0],[0,1]]}"#).is_err());
    }

    #[test]
    fn circle_forms() {
        let half = PayoffMatrix::scaled_identity(2, 0.5).unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.13;
            let expect = 0.25 * (t.cos().powi(4) + t.sin().powi(4));
            assert!((circle_potential(&half, t) - expect).abs() < 1e-15);
            assert!((circle_potential_derivative(&half, t) + 0.25 * (4.0 * t).sin()).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_symmetric(&mut rng, 2);
        for k in 0..50 {
            let t = k as f64 * 0.13;
            let y = SpherePoint::from_angle(t);
            assert!((circle_potential(&m, t) - sphere_potential(&m, &y).unwrap()).abs() < 1e-12);
            let h = 1e-6;
            let fd = (circle_potential(&m, t + h) - circle_potential(&m, t - h)) / (2.0 * h);
            assert!((fd - circle_potential_derivative(&m, t)).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn projected_gradient_is_tangent(seed in any::<u64>(), n in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_symmetric(&mut rng, n);
            let y = random_unit(&mut rng, n);
            let g = sphere_gradient(&m, &y).unwrap();
            let pg = projected_gradient(&m, &y).unwrap();
            let scale = norm(&g).max(1.0);
            prop_assert!(dot(&pg, y.coords()).abs() <= crate::tolerance::ORTHOGONALITY_TOL * scale);
        }

        #[test]
        fn sphere_potential_is_even_in_each_coordinate(seed in any::<u64>(), n in 2usize..20, flips in any::<u32>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_symmetric(&mut rng, n);
            let y = random_unit(&mut rng, n);
            let flipped: Vec<f64> = y.coords().iter().enumerate()
                .map(|(i, v)| if flips >> (i % 32) & 1 == 1 { -v } else { *v })
                .collect();
            let a = sphere_potential(&m, &y).unwrap();
            let b = sphere_potential(&m, &SpherePoint::new(flipped).unwrap()).unwrap();
            prop_assert_eq!(a, b);
            let x = SimplexPoint::from_vec_unchecked(y.coords().iter().map(|v| v * v).collect());
            prop_assert_eq!(a, potential(&m, &x).unwrap());
        }
    }
}
