use nalgebra::DMatrix;

/// Christoffel symbols `Γ^k_{ij}` in the coordinate basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[(k * n + i) * n + j] = v;
    }

    /// `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij})`.
    pub fn from_metric_derivatives(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = ginv.nrows();
        let first = first_kind(dg);
        let mut out = Christoffel::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * first[(l * n + i) * n + j];
                    }
                    out.set(k, i, j, s);
                    out.set(k, j, i, s);
                }
            }
        }
        out
    }

    /// The matrix `A^k_j = Γ^k_{ij} c^i` governing transport along velocity `c`.
    pub fn contract(&self, velocity: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            let ci = velocity[i];
            if ci == 0.0 {
                continue;
            }
            for k in 0..n {
                for j in 0..n {
                    a[(k, j)] += self.get(k, i, j) * ci;
                }
            }
        }
        a
    }

    /// Geodesic acceleration `-Γ^k_{ij} v^i v^j`.
    pub fn acceleration(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    if v[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        s += self.get(k, i, j) * v[i] * v[j];
                    }
                }
                -s
            })
            .collect()
    }

    /// Largest absolute difference to another connection.
    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// `Γ_{l,ij}` flattened as `[(l*n + i)*n + j]`.
fn first_kind(dg: &[DMatrix<f64>]) -> Vec<f64> {
    let n = dg.len();
    let mut out = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[(l * n + i) * n + j] =
                    0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    out
}

/// Riemann tensor `R^l_{kij}` with `R(∂_i, ∂_j)∂_k = R^l_{kij} ∂_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    #[inline]
    fn idx(&self, l: usize, k: usize, i: usize, j: usize) -> usize {
        ((l * self.n + k) * self.n + i) * self.n + j
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        self.data[self.idx(l, k, i, j)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Assemble from `g^{-1}`, `∂g` and `∂∂g` (`ddg[m][l]` is `∂_m ∂_l g`).
    pub fn from_metric_derivatives(
        ginv: &DMatrix<f64>,
        dg: &[DMatrix<f64>],
        ddg: &[Vec<DMatrix<f64>>],
    ) -> Self {
        let n = ginv.nrows();
        let gamma = Christoffel::from_metric_derivatives(ginv, dg);
        let first = first_kind(dg);
        // ∂_m g^{kl} = -g^{ka} ∂_m g_{ab} g^{bl}
        let dginv: Vec<DMatrix<f64>> = dg.iter().map(|d| -(ginv * d * ginv)).collect();
        // ∂_m Γ^k_{ij}, stored as [((m*n + k)*n + i)*n + j]
        let mut dgamma = vec![0.0; n * n * n * n];
        for m in 0..n {
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let d_first = 0.5
                            * (ddg[m][i][(j, l)] + ddg[m][j][(i, l)] - ddg[m][l][(i, j)]);
                        let f = first[(l * n + i) * n + j];
                        for k in 0..n {
                            dgamma[((m * n + k) * n + i) * n + j] +=
                                dginv[m][(k, l)] * f + ginv[(k, l)] * d_first;
                        }
                    }
                }
            }
        }
        let dg_at = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
        let mut out = Riemann {
            n,
            data: vec![0.0; n * n * n * n],
        };
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut r = dg_at(i, l, j, k) - dg_at(j, l, i, k);
                        for m in 0..n {
                            r += gamma.get(l, i, m) * gamma.get(m, j, k)
                                - gamma.get(l, j, m) * gamma.get(m, i, k);
                        }
                        let at = out.idx(l, k, i, j);
                        out.data[at] = r;
                    }
                }
            }
        }
        out
    }

    /// `R(x, y) z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (l, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..n {
                if z[k] == 0.0 {
                    continue;
                }
                for i in 0..n {
                    if x[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        s += self.get(l, k, i, j) * z[k] * x[i] * y[j];
                    }
                }
            }
            *o = s;
        }
        out
    }

    /// Curvature endomorphism `R(∂_i, ∂_j)` as a matrix acting on components.
    pub fn endomorphism(&self, i: usize, j: usize) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |l, k| self.get(l, k, i, j))
    }

    /// `R_{lkij} = g_{la} R^a_{kij}`, flattened like the raised tensor.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for a in 0..n {
                            s += g[(l, a)] * self.get(a, k, i, j);
                        }
                        out[self.idx(l, k, i, j)] = s;
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}
