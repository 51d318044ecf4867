//! Small dense complex-matrix helpers used throughout the crate.

use ndarray::Array2;
use num_complex::Complex64;

pub type CMat = Array2<Complex64>;

pub fn zeros(n: usize, m: usize) -> CMat {
    Array2::from_elem((n, m), Complex64::new(0.0, 0.0))
}

pub fn eye(n: usize) -> CMat {
    let mut m = zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Embed single-site operators into a tensor product of spaces with the given
/// dimensions. `ops` lists (site, operator) pairs; sites not listed act as the
/// identity. Listed sites must be strictly increasing.
pub fn embed(dims: &[usize], ops: &[(usize, &CMat)]) -> CMat {
    let mut out: Option<CMat> = None;
    let mut next = ops.iter().peekable();
    for (site, &d) in dims.iter().enumerate() {
        let factor = match next.peek() {
            Some(&&(s, op)) if s == site => {
                next.next();
                op.clone()
            }
            _ => eye(d),
        };
        out = Some(match out {
            None => factor,
            Some(acc) => kron(&acc, &factor),
        });
    }
    out.unwrap_or_else(|| eye(1))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) + b.dot(a)
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value, estimated by power iteration on A†A.
///
/// Relative accuracy around 1e-3 is plenty for pass/fail residual thresholds;
/// the Frobenius norm is used as a safe upper bound if iteration stalls.
pub fn operator_norm(a: &CMat) -> f64 {
    let (n, m) = a.dim();
    if n == 0 || m == 0 {
        return 0.0;
    }
    let fro = fro_norm(a);
    if fro == 0.0 {
        return 0.0;
    }
    let ah = a.t().mapv(|z| z.conj());
    let mut v: Vec<Complex64> = (0..m)
        .map(|i| Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut lambda = 0.0_f64;
    for _ in 0..200 {
        // w = A†A v
        let av: Vec<Complex64> = (0..n)
            .map(|i| (0..m).map(|j| a[(i, j)] * v[j]).sum())
            .collect();
        let w: Vec<Complex64> = (0..m)
            .map(|i| (0..n).map(|j| ah[(i, j)] * av[j]).sum())
            .collect();
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        let done = (next - lambda).abs() <= 1e-4 * next.max(1e-300);
        lambda = next;
        v = w;
        v.iter_mut().for_each(|z| *z /= nw);
        if done {
            break;
        }
    }
    lambda.min(fro)
}

/// Matrix-vector product.
pub fn matvec(a: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let (n, m) = a.dim();
    assert_eq!(m, v.len());
    (0..n)
        .map(|i| (0..m).map(|j| a[(i, j)] * v[j]).sum())
        .collect()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
