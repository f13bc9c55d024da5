//! Normal form of a modal system computed in complex first-order modal coordinates.
//!
//! The system `ü_j + ω_j² u_j + g_jkl u_k u_l + h_jklm u_k u_l u_m = 0` is written as
//! `ż_j = iω_j z_j + (i/2ω_j) F_j(u)` with `u_j = z_j + z̄_j`, parametrized over the master
//! coordinates by dense power series, and converted to real tensors by linear substitution.

use num_complex::Complex64;

type C = Complex64;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn im(x: f64) -> C {
    C::new(0.0, x)
}

/// Dense modal system with fully symmetric coefficient arrays.
#[derive(Clone, Debug)]
pub struct ModalSystem {
    pub omegas: Vec<f64>,
    /// `g[j][k][l]`, row-major `N³`.
    pub g: Vec<f64>,
    /// `h[j][k][l][m]`, row-major `N⁴`.
    pub h: Vec<f64>,
}

impl ModalSystem {
    /// From 1-based coefficient lists, summing duplicates.
    pub fn from_lists(omegas: &[f64], g: &[([usize; 3], f64)], h: &[([usize; 4], f64)]) -> Self {
        let n = omegas.len();
        let mut gd = vec![0.0; n * n * n];
        let mut hd = vec![0.0; n * n * n * n];
        for &([j, k, l], v) in g {
            gd[((j - 1) * n + k - 1) * n + l - 1] += v;
        }
        for &([j, k, l, m], v) in h {
            hd[(((j - 1) * n + k - 1) * n + l - 1) * n + m - 1] += v;
        }
        Self { omegas: omegas.to_vec(), g: gd, h: hd }
    }

    pub fn n(&self) -> usize {
        self.omegas.len()
    }

    pub fn g(&self, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n();
        self.g[(j * n + k) * n + l]
    }

    pub fn h(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        let n = self.n();
        self.h[((j * n + k) * n + l) * n + m]
    }
}

/// Oracle output over `n` masters; state indices `0..2n` with `s >= n` conjugate.
#[derive(Clone, Debug)]
pub struct ModalNormalForm {
    pub masters: Vec<usize>,
    /// Second-order parametrization `W[j][k][l]` for all `2N` modal coordinates.
    pub w2: Vec<Vec<Vec<C>>>,
    /// Reduced dynamics at second order, `R2[s][k][l]`.
    pub r2: Vec<Vec<Vec<C>>>,
    /// Reduced dynamics at third order, symmetrized over `(k, l, m)`.
    pub r3: Vec<Vec<Vec<Vec<C>>>>,
    /// Quadratic force `g_{pkl}` of `r̈ + ω² r + f(r, ṙ) = 0`.
    pub g: Vec<Vec<Vec<f64>>>,
    /// Coefficients of `r_k r_l r_m`, fully symmetric.
    pub rrr: Vec<Vec<Vec<Vec<f64>>>>,
    /// Coefficients of `r_k ṙ_l ṙ_m`, symmetric in `(l, m)`.
    pub rvv: Vec<Vec<Vec<Vec<f64>>>>,
    /// Cubic part of `ṙ − s` as a symmetric tensor over `x = (r, s)`.
    pub velocity_correction: Vec<Vec<Vec<Vec<f64>>>>,
    /// Largest imaginary part discarded during the real conversion.
    pub max_discarded_imag: f64,
}

impl ModalNormalForm {
    /// Physical (= modal) displacement vector of the state pair `(k, l)`.
    pub fn psi(&self, k: usize, l: usize) -> Vec<f64> {
        let nn = self.w2.len() / 2;
        (0..nn).map(|j| (self.w2[j][k][l] + self.w2[j + nn][k][l]).re).collect()
    }
}

/// Masters resonant with `ω_a ± ω_b` within the relative tolerance.
pub fn resonant_targets(omegas: &[f64], masters: &[usize], a: usize, b: usize, eps_rel: f64) -> Vec<usize> {
    let (wa, wb) = (omegas[masters[a]], omegas[masters[b]]);
    (0..masters.len())
        .filter(|&r| {
            let w = omegas[masters[r]];
            ((wa + wb) - w).abs() / w < eps_rel || ((wa - wb).abs() - w).abs() / w < eps_rel
        })
        .collect()
}

/// Normal form over `masters` (0-based mode positions, ascending).
pub fn modal_normal_form(sys: &ModalSystem, masters: &[usize], eps_rel: f64) -> ModalNormalForm {
    let nm = sys.n();
    let n = masters.len();
    let nn = 2 * n;
    let lam_mode = |j: usize| if j < nm { sys.omegas[j] } else { -sys.omegas[j - nm] };
    let lam_state = |k: usize| if k < n { sys.omegas[masters[k]] } else { -sys.omegas[masters[k - n]] };
    let mode_of_state = |k: usize| masters[k % n];
    // z_j gets +i/(2ω) F_j, z̄_j gets −i/(2ω) F_j.
    let force_scale = |j: usize| {
        let w = sys.omegas[j % nm];
        if j < nm {
            im(0.5 / w)
        } else {
            im(-0.5 / w)
        }
    };
    let master_pos = |mode: usize| masters.iter().position(|&m| m == mode);

    // First order: u¹_p = Σ_k U1[p][k] z_k.
    let u1 = |p: usize, k: usize| if mode_of_state(k) == p { c(1.0) } else { c(0.0) };

    let mut w2 = vec![vec![vec![c(0.0); nn]; nn]; 2 * nm];
    let mut r2 = vec![vec![vec![c(0.0); nn]; nn]; nn];
    for j in 0..2 * nm {
        let mode = j % nm;
        for k in 0..nn {
            for l in 0..nn {
                let mut nonlin = c(0.0);
                for p in 0..nm {
                    for q in 0..nm {
                        nonlin += u1(p, k) * u1(q, l) * sys.g(mode, p, q);
                    }
                }
                nonlin *= force_scale(j);
                let resonant = master_pos(mode).is_some_and(|r| {
                    resonant_targets(&sys.omegas, masters, k % n, l % n, eps_rel).contains(&r)
                });
                if resonant {
                    let r = master_pos(mode).unwrap();
                    let s = if j < nm { r } else { r + n };
                    r2[s][k][l] = nonlin;
                } else {
                    let den = im(lam_state(k) + lam_state(l) - lam_mode(j));
                    w2[j][k][l] = nonlin / den;
                }
            }
        }
    }

    // u²_q[k][l] = W_q + W_q̄.
    let u2 = |q: usize, k: usize, l: usize| w2[q][k][l] + w2[q + nm][k][l];

    let mut r3 = vec![vec![vec![vec![c(0.0); nn]; nn]; nn]; nn];
    for (s, block) in r3.iter_mut().enumerate() {
        let j = if s < n { masters[s] } else { masters[s - n] + nm };
        let mode = j % nm;
        for k in 0..nn {
            for l in 0..nn {
                for m in 0..nn {
                    let mut t = c(0.0);
                    for p in 0..nm {
                        for q in 0..nm {
                            let g = sys.g(mode, p, q);
                            if g != 0.0 {
                                t += u1(p, k) * u2(q, l, m) * (2.0 * g);
                            }
                            for r in 0..nm {
                                let h = sys.h(mode, p, q, r);
                                if h != 0.0 {
                                    t += u1(p, k) * u1(q, l) * u1(r, m) * h;
                                }
                            }
                        }
                    }
                    t *= force_scale(j);
                    let mut drift = c(0.0);
                    for p in 0..nn {
                        drift += w2[j][p][m] * r2[p][k][l] + w2[j][k][p] * r2[p][l][m];
                    }
                    block[k][l][m] = t - drift;
                }
            }
        }
    }
    let r3 = symmetrize3(&r3);

    let real = real_conversion(masters, sys, &r2, &r3);
    ModalNormalForm { masters: masters.to_vec(), w2, r2, r3, ..real }
}

fn symmetrize3(t: &[Vec<Vec<Vec<C>>>]) -> Vec<Vec<Vec<Vec<C>>>> {
    let rows = t.len();
    let nn = t[0].len();
    let mut out = vec![vec![vec![vec![c(0.0); nn]; nn]; nn]; rows];
    for s in 0..rows {
        for k in 0..nn {
            for l in 0..nn {
                for m in 0..nn {
                    let b = &t[s];
                    out[s][k][l][m] =
                        (b[k][l][m] + b[k][m][l] + b[l][k][m] + b[l][m][k] + b[m][k][l] + b[m][l][k]) / 6.0;
                }
            }
        }
    }
    out
}

fn real_conversion(
    masters: &[usize],
    sys: &ModalSystem,
    r2: &[Vec<Vec<C>>],
    r3: &[Vec<Vec<Vec<C>>>],
) -> ModalNormalForm {
    let n = masters.len();
    let nn = 2 * n;
    let w: Vec<f64> = masters.iter().map(|&m| sys.omegas[m]).collect();
    // z = T x, x = (r, s).
    let mut tm = vec![vec![c(0.0); nn]; nn];
    for a in 0..n {
        tm[a][a] = c(0.5);
        tm[a][n + a] = im(-0.5 / w[a]);
        tm[a + n][a] = c(0.5);
        tm[a + n][n + a] = im(0.5 / w[a]);
    }
    // ẋ_i = Σ_s P[i][s] ż_s.
    let mut pm = vec![vec![c(0.0); nn]; nn];
    for a in 0..n {
        pm[a][a] = c(1.0);
        pm[a][a + n] = c(1.0);
        pm[n + a][a] = im(w[a]);
        pm[n + a][a + n] = im(-w[a]);
    }
    let mut q = vec![vec![vec![c(0.0); nn]; nn]; nn];
    let mut cc = vec![vec![vec![vec![c(0.0); nn]; nn]; nn]; nn];
    for i in 0..nn {
        for s in 0..nn {
            if pm[i][s] == c(0.0) {
                continue;
            }
            for k in 0..nn {
                for l in 0..nn {
                    let f = pm[i][s] * r2[s][k][l];
                    if f == c(0.0) {
                        continue;
                    }
                    for x1 in 0..nn {
                        for x2 in 0..nn {
                            q[i][x1][x2] += f * tm[k][x1] * tm[l][x2];
                        }
                    }
                }
            }
            for k in 0..nn {
                for l in 0..nn {
                    for m in 0..nn {
                        let f = pm[i][s] * r3[s][k][l][m];
                        if f == c(0.0) {
                            continue;
                        }
                        for x1 in 0..nn {
                            for x2 in 0..nn {
                                for x3 in 0..nn {
                                    cc[i][x1][x2][x3] += f * tm[k][x1] * tm[l][x2] * tm[m][x3];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let cc: Vec<_> = symmetrize3(&cc);
    // Linear flow L: ṙ = s, ṡ = −ω² r.
    let lin = |x: usize, y: usize| -> f64 {
        if x < n {
            if y == n + x {
                1.0
            } else {
                0.0
            }
        } else if y == x - n {
            -w[x - n] * w[x - n]
        } else {
            0.0
        }
    };
    let mut max_imag = 0.0f64;
    let mut g = vec![vec![vec![0.0; n]; n]; n];
    let mut rrr = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    let mut rvv = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    let mut corr = vec![vec![vec![vec![0.0; nn]; nn]; nn]; n];
    for a in 0..n {
        // Cubic force tensor over x: −(C_s + 3 C_r(x, x, L x)), symmetrized.
        let mut t = vec![vec![vec![c(0.0); nn]; nn]; nn];
        for x1 in 0..nn {
            for x2 in 0..nn {
                for x3 in 0..nn {
                    let mut v = cc[n + a][x1][x2][x3];
                    for y in 0..nn {
                        let l = lin(y, x3);
                        if l != 0.0 {
                            v += 3.0 * cc[a][x1][x2][y] * l;
                        }
                    }
                    t[x1][x2][x3] = -v;
                    corr[a][x1][x2][x3] = cc[a][x1][x2][x3].re;
                    max_imag = max_imag.max(cc[a][x1][x2][x3].im.abs());
                }
            }
        }
        let t = symmetrize3(&[t]).pop().unwrap();
        for k in 0..n {
            for l in 0..n {
                let v = -(q[n + a][k][l] + q[n + a][l][k]) * 0.5;
                max_imag = max_imag.max(v.im.abs());
                g[a][k][l] = v.re;
                for m in 0..n {
                    let v = t[k][l][m];
                    max_imag = max_imag.max(v.im.abs());
                    rrr[a][k][l][m] = v.re;
                    let v = t[k][n + l][n + m] * 3.0;
                    max_imag = max_imag.max(v.im.abs());
                    rvv[a][k][l][m] = v.re;
                }
            }
        }
    }
    ModalNormalForm {
        masters: Vec::new(),
        w2: Vec::new(),
        r2: Vec::new(),
        r3: Vec::new(),
        g,
        rrr,
        rvv,
        velocity_correction: corr,
        max_discarded_imag: max_imag,
    }
}
