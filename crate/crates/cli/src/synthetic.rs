//! Deterministic synthetic coefficient fields.
//!
//! A lattice of spacing `ℓ` (the correlation length) carries hash noise in
//! `[0, 1)`: `splitmix64(seed, i, j)` for blobs, and a single column
//! `splitmix64(seed, 0, j)` for horizontal layers. Two Jacobi smoothing passes
//! `u ← ½u + ½·mean(neighbours)` follow, then the lattice values are rescaled
//! to `[0, 1]`. A triangle takes the bilinear interpolant `s` at its centroid
//! and gets the value `contrast^s ∈ [1, contrast]`.

use fracporo::mesh::FineMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldStyle {
    Layered,
    LognormalBlobs,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn noise(seed: u64, i: u64, j: u64) -> f64 {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ i) ^ j.wrapping_mul(0x2545_f491_4f6c_dd1d));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(u: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for j in 0..ny {
        for i in 0..nx {
            let mut sum = 0.0;
            let mut count = 0.0;
            let mut add = |ii: usize, jj: usize| {
                sum += u[jj * nx + ii];
                count += 1.0;
            };
            if i > 0 {
                add(i - 1, j);
            }
            if i + 1 < nx {
                add(i + 1, j);
            }
            if j > 0 {
                add(i, j - 1);
            }
            if j + 1 < ny {
                add(i, j + 1);
            }
            let c = u[j * nx + i];
            out[j * nx + i] = if count > 0.0 {
                0.5 * c + 0.5 * sum / count
            } else {
                c
            };
        }
    }
    out
}

/// Per-triangle field with values in `[1, contrast]`.
///
/// `correlation_length` defaults to a twentieth of the larger domain extent.
pub fn generate_synthetic_field(
    seed: u64,
    mesh: &FineMesh,
    contrast: f64,
    style: FieldStyle,
    correlation_length: Option<f64>,
) -> Vec<f64> {
    let nt = mesh.triangle_count();
    if contrast <= 1.0 {
        return vec![1.0; nt];
    }
    let b = mesh.bounds();
    let ell = correlation_length.unwrap_or(b.width().max(b.height()) / 20.0);
    let nx = match style {
        FieldStyle::LognormalBlobs => (b.width() / ell).ceil() as usize + 1,
        FieldStyle::Layered => 1,
    };
    let ny = (b.height() / ell).ceil() as usize + 1;
    let mut u: Vec<f64> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| noise(seed, i as u64, j as u64)))
        .collect();
    for _ in 0..2 {
        u = smooth(&u, nx, ny);
    }
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in &mut u {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
    (0..nt)
        .map(|t| {
            let c = mesh.centroid(t);
            let x = ((c[0] - b.xmin) / ell).clamp(0.0, (nx - 1) as f64);
            let y = ((c[1] - b.ymin) / ell).clamp(0.0, (ny - 1) as f64);
            let i = (x.floor() as usize).min(nx.saturating_sub(2));
            let j = (y.floor() as usize).min(ny.saturating_sub(2));
            let (fx, fy) = (x - i as f64, y - j as f64);
            let at = |ii: usize, jj: usize| u[jj.min(ny - 1) * nx + ii.min(nx - 1)];
            let s = (1.0 - fx) * (1.0 - fy) * at(i, j)
                + fx * (1.0 - fy) * at(i + 1, j)
                + (1.0 - fx) * fy * at(i, j + 1)
                + fx * fy * at(i + 1, j + 1);
            contrast.powf(s.clamp(0.0, 1.0))
        })
        .collect()
}
