//! Symmetric matrices and uniformly elliptic operators `F : S(n) → ℝ`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Real symmetric `n × n` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries; rejects asymmetric or
    /// non-finite input.
    pub fn from_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::input(format!(
                "expected {} entries for n = {n}",
                n * n
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::input("matrix is not symmetric"));
                }
            }
        }
        Ok(SymMatrix {
            n,
            a: entries.to_vec(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, v) in d.iter().enumerate() {
            m.a[i * n + i] = *v;
        }
        m
    }

    /// `Σ w_k v_k v_kᵀ`.
    pub fn from_spectral(values: &[f64], vectors: &[Vec<f64>]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (w, v) in values.iter().zip(vectors) {
            for i in 0..n {
                for j in 0..n {
                    m.a[i * n + j] += w * v[i] * v[j];
                }
            }
        }
        m.symmetrize();
        m
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (self.a[i * n + j] + self.a[j * n + i]);
                self.a[i * n + j] = s;
                self.a[j * n + i] = s;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            a: self.a.iter().map(|x| c * x).collect(),
        }
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    /// Quadratic form `vᵀ M v`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * self.a[i * n + j] * v[j];
            }
        }
        s
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eig_sym(m: &SymMatrix) -> Result<Vec<f64>> {
    Ok(eigen_sym(m)?.values)
}

/// Full symmetric eigendecomposition: closed form for `n ≤ 2`, cyclic Jacobi
/// rotations otherwise.
pub fn eigen_sym(m: &SymMatrix) -> Result<Eigen> {
    if m.a.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let mut pairs = match m.n {
        1 => vec![(m.a[0], vec![1.0])],
        2 => eigen2(m.a[0], m.a[1], m.a[3]),
        _ => jacobi(m),
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(Eigen { values, vectors })
}

fn eigen2(a: f64, b: f64, d: f64) -> Vec<(f64, Vec<f64>)> {
    if b == 0.0 {
        return vec![(a, vec![1.0, 0.0]), (d, vec![0.0, 1.0])];
    }
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(b);
    let det = a * d - b * b;
    // Take the root without cancellation directly, the other from the determinant.
    let (hi, lo) = if mean >= 0.0 {
        let hi = mean + r;
        (hi, if hi != 0.0 { det / hi } else { mean - r })
    } else {
        let lo = mean - r;
        (det / lo, lo)
    };
    // Rotation angle for the eigenvector of `hi`.
    let theta = 0.5 * b.atan2(half);
    let (s, c) = theta.sin_cos();
    vec![(hi, vec![c, s]), (lo, vec![-s, c])]
}

fn jacobi(m: &SymMatrix) -> Vec<(f64, Vec<f64>)> {
    let n = m.n;
    let mut a = m.a.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    (0..n)
        .map(|k| (a[k * n + k], (0..n).map(|i| v[i * n + k]).collect()))
        .collect()
}

/// Ellipticity constants `0 < λ ≤ Λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityPair {
    lambda: f64,
    big_lambda: f64,
}

impl EllipticityPair {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite()) {
            return Err(Error::input(format!(
                "ellipticity requires 0 < λ ≤ Λ, got λ = {lambda}, Λ = {big_lambda}"
            )));
        }
        Ok(EllipticityPair { lambda, big_lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }
}

/// `Λ Σ_{e>0} e + λ Σ_{e<0} e` over the eigenvalues of `m`.
pub fn pucci_plus(m: &SymMatrix, e: EllipticityPair) -> Result<f64> {
    Ok(pucci_plus_eigs(&eig_sym(m)?, e))
}

/// `λ Σ_{e>0} e + Λ Σ_{e<0} e` over the eigenvalues of `m`.
pub fn pucci_minus(m: &SymMatrix, e: EllipticityPair) -> Result<f64> {
    Ok(pucci_minus_eigs(&eig_sym(m)?, e))
}

pub fn pucci_plus_eigs(eigs: &[f64], e: EllipticityPair) -> f64 {
    eigs.iter()
        .map(|&v| {
            if v > 0.0 {
                e.big_lambda * v
            } else {
                e.lambda * v
            }
        })
        .sum()
}

pub fn pucci_minus_eigs(eigs: &[f64], e: EllipticityPair) -> f64 {
    eigs.iter()
        .map(|&v| {
            if v > 0.0 {
                e.lambda * v
            } else {
                e.big_lambda * v
            }
        })
        .sum()
}

/// Coefficient field `A(x)` of a linear operator `tr(A(x) M)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(SymMatrix),
    Field(Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>),
}

impl Coefficient {
    pub fn at(&self, x: &[f64]) -> SymMatrix {
        match self {
            Coefficient::Constant(a) => a.clone(),
            Coefficient::Field(f) => f(x),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(a) => f.debug_tuple("Constant").field(a).finish(),
            Coefficient::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Sup,
    Inf,
}

#[derive(Debug, Clone)]
pub enum OperatorKind {
    PucciPlus,
    PucciMinus,
    /// `tr(A(x) M)` with `λI ≤ A ≤ ΛI`.
    LinearTrace(Coefficient),
    /// `sup_k tr(A_k M)` or `inf_k tr(A_k M)` over a finite family.
    InfSupOfLinear {
        family: Vec<SymMatrix>,
        mode: Extremum,
    },
}

/// A uniformly `(λ,Λ)`-elliptic operator with `F(0) = 0`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub ellipticity: EllipticityPair,
}

impl OperatorSpec {
    pub fn pucci_plus(e: EllipticityPair) -> Self {
        OperatorSpec {
            kind: OperatorKind::PucciPlus,
            ellipticity: e,
        }
    }

    pub fn pucci_minus(e: EllipticityPair) -> Self {
        OperatorSpec {
            kind: OperatorKind::PucciMinus,
            ellipticity: e,
        }
    }

    /// The Laplacian `tr(M)` in dimension `n`, declared with `λ = Λ = 1`.
    pub fn laplacian(n: usize) -> Self {
        OperatorSpec {
            kind: OperatorKind::LinearTrace(Coefficient::Constant(SymMatrix::identity(n))),
            ellipticity: EllipticityPair::new(1.0, 1.0).unwrap(),
        }
    }

    pub fn linear(a: SymMatrix, e: EllipticityPair) -> Self {
        OperatorSpec {
            kind: OperatorKind::LinearTrace(Coefficient::Constant(a)),
            ellipticity: e,
        }
    }

    /// `M ↦ −F(−M)`, the operator whose supersolutions are negatives of
    /// subsolutions of `F`.
    pub fn dual(&self) -> OperatorSpec {
        let kind = match &self.kind {
            OperatorKind::PucciPlus => OperatorKind::PucciMinus,
            OperatorKind::PucciMinus => OperatorKind::PucciPlus,
            OperatorKind::LinearTrace(a) => OperatorKind::LinearTrace(a.clone()),
            OperatorKind::InfSupOfLinear { family, mode } => OperatorKind::InfSupOfLinear {
                family: family.clone(),
                mode: match mode {
                    Extremum::Sup => Extremum::Inf,
                    Extremum::Inf => Extremum::Sup,
                },
            },
        };
        OperatorSpec {
            kind,
            ellipticity: self.ellipticity,
        }
    }

    /// Evaluates `F(M)` at position `x`.
    pub fn apply(&self, m: &SymMatrix, x: &[f64]) -> Result<f64> {
        apply_operator(self, m, x)
    }
}

pub fn apply_operator(spec: &OperatorSpec, m: &SymMatrix, x: &[f64]) -> Result<f64> {
    Ok(match &spec.kind {
        OperatorKind::PucciPlus => pucci_plus(m, spec.ellipticity)?,
        OperatorKind::PucciMinus => pucci_minus(m, spec.ellipticity)?,
        OperatorKind::LinearTrace(a) => a.at(x).trace_product(m),
        OperatorKind::InfSupOfLinear { family, mode } => {
            let traces = family.iter().map(|a| a.trace_product(m));
            match mode {
                Extremum::Sup => traces.fold(f64::NEG_INFINITY, f64::max),
                Extremum::Inf => traces.fold(f64::INFINITY, f64::min),
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest relative excess over the `λ tr N ≤ F(M+N) − F(M) ≤ Λ tr N`
    /// sandwich (0 when none).
    pub worst_excess: f64,
}

/// Samples random `(M, N ≥ 0)` pairs and counts violations of uniform
/// ellipticity beyond a `1e-10` relative tolerance.
pub fn check_uniform_ellipticity(
    spec: &OperatorSpec,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<EllipticityReport> {
    if samples == 0 {
        return Err(Error::input("samples must be ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lam, big) = (spec.ellipticity.lambda, spec.ellipticity.big_lambda);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let m = random_sym(&mut rng, dim, 2.0);
        // Every tenth draw uses N = 0.
        let n_mat = if s % 10 == 0 {
            SymMatrix::zeros(dim)
        } else {
            random_psd(&mut rng, dim)
        };
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f0 = apply_operator(spec, &m, &x)?;
        let f1 = apply_operator(spec, &m.add(&n_mat), &x)?;
        let diff = f1 - f0;
        let tr = n_mat.trace();
        let scale = 1.0 + f0.abs() + f1.abs() + big * tr;
        let excess = ((lam * tr - diff).max(diff - big * tr)) / scale;
        if excess > 1e-10 {
            violations += 1;
        }
        worst = worst.max(excess.max(0.0));
    }
    Ok(EllipticityReport {
        samples,
        violations,
        worst_excess: worst,
    })
}

pub(crate) fn random_sym(rng: &mut impl Rng, n: usize, scale: f64) -> SymMatrix {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.gen_range(-scale..scale);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    SymMatrix { n, a }
}

/// `Q D Qᵀ` with a random orthogonal `Q` and `D ≥ 0`; some diagonal entries
/// are forced to zero so that singular `N` are exercised.
pub(crate) fn random_psd(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let q = eigen_sym(&random_sym(rng, n, 1.0)).expect("finite").vectors;
    let d: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..3.0)
            }
        })
        .collect();
    SymMatrix::from_spectral(&d, &q)
}
