//! Row-major dense kernels used by the encoder.

/// `out[m×n] = a[m×k] · b[k×n]`
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    out[..m * n].iter_mut().for_each(|x| *x = 0.0);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
}

/// `out[m×k] = dy[m×n] · w[k×n]ᵀ`
pub fn matmul_bt(dy: &[f64], w: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let dyr = &dy[i * n..(i + 1) * n];
        for kk in 0..k {
            out[i * k + kk] = dot(dyr, &w[kk * n..(kk + 1) * n]);
        }
    }
}

/// `dw[k×n] += a[m×k]ᵀ · dy[m×n]`
pub fn add_at_b(a: &[f64], dy: &[f64], m: usize, k: usize, n: usize, dw: &mut [f64]) {
    for i in 0..m {
        let dyr = &dy[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            for (d, &g) in dw[kk * n..(kk + 1) * n].iter_mut().zip(dyr) {
                *d += aik * g;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place softmax over a slice; entries equal to `-inf` get probability 0.
pub fn softmax_in_place(x: &mut [f64]) {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in x.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in x.iter_mut() {
        *v /= s;
    }
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// tanh approximation of GELU
#[inline]
pub fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

#[inline]
pub fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_A * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

pub const LN_EPS: f64 = 1e-5;

/// Layer norm over rows of width `d`. Returns per-row `rstd`; `xhat` holds the
/// normalized input and `out` the scaled/shifted result.
pub fn layer_norm(
    x: &[f64],
    g: &[f64],
    b: &[f64],
    d: usize,
    xhat: &mut [f64],
    out: &mut [f64],
) -> Vec<f64> {
    let rows = x.len() / d;
    let mut rstds = Vec::with_capacity(rows);
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + LN_EPS).sqrt();
        for c in 0..d {
            let h = (xr[c] - mean) * rstd;
            xhat[r * d + c] = h;
            out[r * d + c] = h * g[c] + b[c];
        }
        rstds.push(rstd);
    }
    rstds
}

/// Backward of [`layer_norm`]; accumulates into `dg`, `db` and adds the input
/// gradient into `dx`.
#[allow(clippy::too_many_arguments)]
pub fn layer_norm_backward(
    dy: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    g: &[f64],
    d: usize,
    dg: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    let rows = dy.len() / d;
    let mut dxhat = vec![0.0; d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xr = &xhat[r * d..(r + 1) * d];
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for c in 0..d {
            dg[c] += dyr[c] * xr[c];
            db[c] += dyr[c];
            dxhat[c] = dyr[c] * g[c];
            m1 += dxhat[c];
            m2 += dxhat[c] * xr[c];
        }
        m1 /= d as f64;
        m2 /= d as f64;
        for c in 0..d {
            dx[r * d + c] += rstd[r] * (dxhat[c] - m1 - xr[c] * m2);
        }
    }
}
