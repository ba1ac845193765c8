//! Migration kernels on the window: validation, Liggett–Spitzer weights and
//! the matrix-exponential semigroups `e^{tA}` and `e^{t|A|}`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::state::Config;

/// Dense square migration kernel with nonnegative off-diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationMatrix {
    n: usize,
    entries: Vec<f64>,
    norm: f64,
}

impl MigrationMatrix {
    /// Builds and validates a kernel from dense rows.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Matrix(format!(
                "row {r} has {} entries, expected {n}",
                rows[r].len()
            )));
        }
        Self::from_row_major(n, rows.into_iter().flatten().collect())
    }

    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Matrix(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        let mut m = MigrationMatrix { n, entries, norm: 0.0 };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        MigrationMatrix {
            n,
            entries: vec![0.0; n * n],
            norm: 0.0,
        }
    }

    /// Symmetric nearest-neighbour walk on a cycle minus the identity,
    /// `A(k,l) = a(k,l) - 1{k=l}`.
    pub fn cycle(n: usize) -> Self {
        Self::biased_cycle(n, 0.5)
    }

    /// Cycle walk stepping to `k+1` with probability `p_right` and to `k-1`
    /// otherwise, minus the identity.
    pub fn biased_cycle(n: usize, p_right: f64) -> Self {
        assert!(n > 0, "cycle needs at least one site");
        assert!((0.0..=1.0).contains(&p_right));
        let mut e = vec![0.0; n * n];
        for k in 0..n {
            e[k * n + (k + 1) % n] += p_right;
            e[k * n + (k + n - 1) % n] += 1.0 - p_right;
            e[k * n + k] -= 1.0;
        }
        MigrationMatrix::from_row_major(n, e).expect("cycle kernel is valid")
    }

    /// Dense CSV, one row per line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .enumerate()
            .map(|(r, line)| {
                line.split(',')
                    .map(|f| {
                        f.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Parse(format!("matrix row {r}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MigrationMatrix::new(rows)
    }

    /// Sparse JSON triples `[[k,l,value],...]`; window size is one past the
    /// largest index unless `n` is given.
    pub fn from_json_triples(text: &str, n: Option<usize>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Triple(usize, usize, f64);
        let triples: Vec<Triple> = serde_json::from_str(text)?;
        let max = triples.iter().map(|t| t.0.max(t.1) + 1).max().unwrap_or(0);
        let n = n.unwrap_or(max);
        if max > n {
            return Err(Error::Matrix(format!("triple index {} outside window of {n}", max - 1)));
        }
        let mut e = vec![0.0; n * n];
        for Triple(k, l, v) in triples {
            e[k * n + l] += v;
        }
        MigrationMatrix::from_row_major(n, e)
    }

    /// Checks `A(k,l) >= 0` for `k != l` and finiteness, then caches
    /// `||A|| = sup_k sum_l |A(k,l)| + |A(l,k)|`.
    pub fn validate(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            for l in 0..n {
                let v = self.entries[k * n + l];
                if !v.is_finite() {
                    return Err(Error::Matrix(format!("entry A({k},{l}) is not finite")));
                }
                if k != l && v < 0.0 {
                    return Err(Error::NegativeOffDiagonal {
                        row: k,
                        col: l,
                        value: v,
                    });
                }
            }
        }
        self.norm = (0..n)
            .map(|k| (0..n).map(|l| self.get(k, l).abs() + self.get(l, k).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.n + l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.n..(k + 1) * self.n]
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn transpose(&self) -> MigrationMatrix {
        let n = self.n;
        let mut e = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                e[l * n + k] = self.get(k, l);
            }
        }
        MigrationMatrix {
            n,
            entries: e,
            norm: self.norm,
        }
    }

    /// Entrywise absolute value `|A|`.
    pub fn abs(&self) -> MigrationMatrix {
        MigrationMatrix {
            n: self.n,
            entries: self.entries.iter().map(|v| v.abs()).collect(),
            norm: self.norm,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|k| (0..k).all(|l| self.get(k, l) == self.get(l, k)))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// `(A f)(k) = sum_l A(k,l) f(l)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n, "vector length must match the window");
        (0..self.n).map(|k| self.apply_at(k, f)).collect()
    }

    #[inline]
    pub fn apply_at(&self, k: usize, f: &[f64]) -> f64 {
        self.row(k).iter().zip(f).map(|(a, b)| a * b).sum()
    }

    /// Sites reachable from `start` through nonzero off-diagonal entries,
    /// following `k -> l` whenever `A(k,l) != 0`.
    pub fn reachable_from(&self, start: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack: Vec<usize> = start.into_iter().collect();
        while let Some(k) = stack.pop() {
            if std::mem::replace(&mut seen[k], true) {
                continue;
            }
            for l in 0..self.n {
                if l != k && self.get(l, k) != 0.0 && !seen[l] {
                    stack.push(l);
                }
            }
        }
        seen
    }
}

/// `(A x_i)(k)` for every site of the window.
pub fn drift_apply(a: &MigrationMatrix, x: &Config, type_index: u8) -> Vec<f64> {
    a.apply(&x.component(type_index))
}

/// Positive summable weights with `sum_l beta(l) (|A(k,l)| + |A(l,k)|) <= M beta(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaWeights {
    pub beta: Vec<f64>,
    pub m: f64,
}

impl BetaWeights {
    /// Direct sweep of the weight inequality over every site.
    pub fn verify(&self, a: &MigrationMatrix) -> Result<()> {
        let n = a.len();
        if self.beta.len() != n {
            return Err(Error::Matrix("beta does not cover the window".into()));
        }
        if let Some(k) = self.beta.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::Matrix(format!("beta({k}) = {} is not positive", self.beta[k])));
        }
        for k in 0..n {
            let lhs: f64 = (0..n)
                .map(|l| self.beta[l] * (a.get(k, l).abs() + a.get(l, k).abs()))
                .sum();
            let rhs = self.m * self.beta[k];
            if lhs > rhs * (1.0 + 1e-12) {
                return Err(Error::Matrix(format!(
                    "weight inequality fails at site {k}: {lhs} > {rhs}"
                )));
            }
        }
        Ok(())
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        crate::state::beta_norm(u, &self.beta)
    }
}

/// Liggett–Spitzer weights by the geometric series
/// `beta = sum_n c^{-n} B^n gamma`, `B(k,l) = |A(k,l)| + |A(l,k)|`,
/// `c = 2||A||`, `gamma` uniform. The series ratio is at most 1/2.
///
/// `M` is reported as the tightest constant for the returned `beta`
/// (floored at 1); the construction guarantees it never exceeds `c`.
pub fn find_beta(a: &MigrationMatrix) -> BetaWeights {
    let n = a.len();
    let seed = 1.0 / n.max(1) as f64;
    let sym = |k: usize, l: usize| a.get(k, l).abs() + a.get(l, k).abs();
    let c = if a.norm() > 0.0 { 2.0 * a.norm() } else { 1.0 };

    let mut beta = vec![seed; n];
    let mut term = vec![seed; n];
    for _ in 0..200 {
        let next: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|l| sym(k, l) * term[l]).sum::<f64>() / c)
            .collect();
        let size: f64 = next.iter().sum();
        for (b, t) in beta.iter_mut().zip(&next) {
            *b += t;
        }
        term = next;
        if size <= 1e-17 * beta.iter().sum::<f64>() {
            break;
        }
    }

    let m = (0..n)
        .map(|k| (0..n).map(|l| sym(k, l) * beta[l]).sum::<f64>() / beta[k])
        .fold(1.0, f64::max);
    BetaWeights { beta, m }
}

/// `e^{tA}` as a dense row-major matrix by scaling and squaring with a
/// truncated Taylor series whose a priori remainder is below `1e-13`.
pub fn expm(a: &MigrationMatrix, t: f64) -> Vec<f64> {
    assert!(t >= 0.0, "time must be nonnegative");
    let n = a.len();
    let mut eye = vec![0.0; n * n];
    for k in 0..n {
        eye[k * n + k] = 1.0;
    }
    let row_norm = (0..n)
        .map(|k| a.row(k).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let theta_full = row_norm * t;
    if theta_full == 0.0 {
        return eye;
    }

    let squarings = if theta_full > 0.5 {
        (theta_full / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = t / 2f64.powi(squarings);
    let theta = row_norm * scale;

    // Smallest order with theta^{m+1}/(m+1)! / (1 - theta/(m+2)) < 1e-13.
    let mut order = 1usize;
    let mut tail = theta * theta / 2.0;
    while tail / (1.0 - theta / (order as f64 + 2.0)) >= 1e-13 {
        order += 1;
        tail *= theta / (order as f64 + 1.0);
    }

    let b: Vec<f64> = a.entries.iter().map(|v| v * scale).collect();
    // Horner: I + B(I + B/2(I + B/3(...)))
    let mut acc = eye.clone();
    for j in (1..=order).rev() {
        let mut prod = matmul(n, &b, &acc);
        for v in prod.iter_mut() {
            *v /= j as f64;
        }
        for (p, e) in prod.iter_mut().zip(&eye) {
            *p += e;
        }
        acc = prod;
    }
    for _ in 0..squarings {
        acc = matmul(n, &acc, &acc);
    }
    acc
}

fn matmul(n: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let xik = x[i * n + k];
            if xik == 0.0 {
                continue;
            }
            let yrow = &y[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, v) in orow.iter_mut().zip(yrow) {
                *o += xik * v;
            }
        }
    }
    out
}

fn matvec(n: usize, m: &[f64], f: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|k| m[k * n..(k + 1) * n].iter().zip(f).map(|(a, b)| a * b).sum())
        .collect()
}

/// `S_t f = e^{tA} f`.
pub fn semigroup_apply(a: &MigrationMatrix, t: f64, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), a.len());
    matvec(a.len(), &expm(a, t), f)
}

/// `bold-S_t f = e^{t|A|} f`.
pub fn bold_apply(a: &MigrationMatrix, t: f64, f: &[f64]) -> Vec<f64> {
    semigroup_apply(&a.abs(), t, f)
}
