/// Plane-strain Lamé parameters `(λ, μ)`.
pub fn lame(young: f64, poisson: f64) -> (f64, f64) {
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    (lambda, mu)
}

/// Constant gradients of the three P1 hat functions.
pub fn gradients(p: [[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ]
}

fn area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

pub fn element_stiffness(p: [[f64; 2]; 3], k: f64) -> [[f64; 3]; 3] {
    let g = gradients(p);
    let s = k * area(p);
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = s * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    out
}

pub fn element_mass(area: f64, c: f64) -> [[f64; 3]; 3] {
    let d = c * area / 6.0;
    let o = c * area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// 6x6 stiffness, local DOF order `(x0, y0, x1, y1, x2, y2)`.
pub(super) fn element_elasticity(p: [[f64; 2]; 3], lambda: f64, mu: f64) -> [[f64; 6]; 6] {
    let g = gradients(p);
    let a = area(p);
    // strain rows (ε_xx, ε_yy, γ_xy) of each local DOF
    let mut b = [[0.0; 6]; 3];
    for n in 0..3 {
        b[0][2 * n] = g[n][0];
        b[1][2 * n + 1] = g[n][1];
        b[2][2 * n] = g[n][1];
        b[2][2 * n + 1] = g[n][0];
    }
    let c = [
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ];
    let mut out = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let mut s = 0.0;
            for r in 0..3 {
                for q in 0..3 {
                    s += b[r][i] * c[r][q] * b[q][j];
                }
            }
            out[i][j] = a * s;
        }
    }
    out
}

/// `∫ f φ_a` with the degree-2 three-point rule at edge-interior points.
pub(super) fn element_load(p: [[f64; 2]; 3], f: &impl Fn([f64; 2]) -> f64) -> [f64; 3] {
    const BARY: [[f64; 3]; 3] = [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ];
    let w = area(p) / 3.0;
    let mut out = [0.0; 3];
    for l in BARY {
        let x = [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ];
        let fx = f(x);
        for a in 0..3 {
            out[a] += w * fx * l[a];
        }
    }
    out
}
