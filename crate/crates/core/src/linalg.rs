//! Dense square-matrix helpers for the small state dimensions used here
//! (typically d <= 3): determinants, inverses, operator norms, the matrix
//! exponential, and symmetric eigenvalue bounds.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = c;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Mat {
            n,
            a: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.a[i * n + j] * x[j];
            }
            out[i] = s;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec(x, &mut out);
        out
    }

    /// y = A^T x
    pub fn tr_matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            out[j] = 0.0;
        }
        for i in 0..n {
            for j in 0..n {
                out[j] += self.a[i * n + j] * x[i];
            }
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik != 0.0 {
                    for j in 0..n {
                        out.a[i * n + j] += aik * other.a[k * n + j];
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j];
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        Mat {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }

    /// Sum of squared entries; equals Tr(A A^T).
    pub fn frobenius_sq(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut lu = self.a.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut pivot = col;
            let mut best = lu[col * n + col].abs();
            for r in (col + 1)..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = lu[col * n + col];
            det *= p;
            for r in (col + 1)..n {
                let factor = lu[r * n + col] / p;
                for j in col..n {
                    lu[r * n + j] -= factor * lu[col * n + j];
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        let n = self.n;
        let mut aug = vec![0.0; n * 2 * n];
        for i in 0..n {
            for j in 0..n {
                aug[i * 2 * n + j] = self.a[i * n + j];
            }
            aug[i * 2 * n + n + i] = 1.0;
        }
        for col in 0..n {
            let mut pivot = col;
            let mut best = aug[col * 2 * n + col].abs();
            for r in (col + 1)..n {
                let v = aug[r * 2 * n + col].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best < 1e-300 {
                return Err(Error::InvalidInput("singular matrix".into()));
            }
            if pivot != col {
                for j in 0..2 * n {
                    aug.swap(col * 2 * n + j, pivot * 2 * n + j);
                }
            }
            let p = aug[col * 2 * n + col];
            for j in 0..2 * n {
                aug[col * 2 * n + j] /= p;
            }
            for r in 0..n {
                if r != col {
                    let factor = aug[r * 2 * n + col];
                    if factor != 0.0 {
                        for j in 0..2 * n {
                            aug[r * 2 * n + j] -= factor * aug[col * 2 * n + j];
                        }
                    }
                }
            }
        }
        let mut inv = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                inv.a[i * n + j] = aug[i * 2 * n + n + j];
            }
        }
        Ok(inv)
    }

    /// Spectral norm via power iteration on A^T A with a deterministic start.
    pub fn op_norm(&self) -> f64 {
        let n = self.n;
        if n == 1 {
            return self.a[0].abs();
        }
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let mut av = vec![0.0; n];
        let mut atav = vec![0.0; n];
        let mut lambda = 0.0;
        for _ in 0..400 {
            self.matvec(&v, &mut av);
            self.tr_matvec(&av, &mut atav);
            let norm: f64 = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                return 0.0;
            }
            let new_lambda: f64 = v.iter().zip(&atav).map(|(a, b)| a * b).sum();
            for i in 0..n {
                v[i] = atav[i] / norm;
            }
            if (new_lambda - lambda).abs() <= 1e-14 * new_lambda.abs().max(1.0) {
                lambda = new_lambda;
                break;
            }
            lambda = new_lambda;
        }
        lambda.max(0.0).sqrt()
    }

    /// Condition number estimate in the spectral norm.
    pub fn condition(&self) -> Result<f64> {
        let inv = self.inverse()?;
        Ok(self.op_norm() * inv.op_norm())
    }

    /// Matrix exponential by scaling and squaring with a Taylor series.
    pub fn expm(&self) -> Mat {
        let norm = self.op_norm();
        let s = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let scaled = self.scale(2f64.powi(-s));
        let mut term = Mat::identity(self.n);
        let mut sum = Mat::identity(self.n);
        for k in 1..=24 {
            term = term.matmul(&scaled).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        let mut result = sum;
        for _ in 0..s {
            result = result.matmul(&result);
        }
        result
    }

    /// Eigenvalue range of the symmetric part (A + A^T)/2, by Jacobi sweeps.
    pub fn symmetric_part_eig_bounds(&self) -> (f64, f64) {
        let n = self.n;
        let mut s = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.a[i * n + j] = 0.5 * (self.get(i, j) + self.get(j, i));
            }
        }
        // Jacobi rotations
        for _ in 0..100 {
            let mut off = 0.0;
            let mut p = 0;
            let mut q = 1;
            for i in 0..n {
                for j in (i + 1)..n {
                    if s.get(i, j).abs() > off {
                        off = s.get(i, j).abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if off < 1e-14 || n == 1 {
                break;
            }
            let app = s.get(p, p);
            let aqq = s.get(q, q);
            let apq = s.get(p, q);
            let theta = 0.5 * (aqq - app) / apq;
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * c;
            for k in 0..n {
                let skp = s.get(k, p);
                let skq = s.get(k, q);
                s.set(k, p, c * skp - sn * skq);
                s.set(k, q, sn * skp + c * skq);
            }
            for k in 0..n {
                let spk = s.get(p, k);
                let sqk = s.get(q, k);
                s.set(p, k, c * spk - sn * sqk);
                s.set(q, k, sn * spk + c * sqk);
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            lo = lo.min(s.get(i, i));
            hi = hi.max(s.get(i, i));
        }
        (lo, hi)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
